#pragma once

#include <string_view>

#include "etmpc/active_set.hpp"
#include "etmpc/flops.hpp"
#include "etmpc/problem.hpp"

namespace etmpc {

/// Affine law u = K x + b (first input only) valid on the polytope T x <= d.
/// T has q rows: the q - q_A inactive-constraint rows first, then the q_A
/// multiplier-sign rows.
struct Region {
  RowMatrix K;  ///< m x n
  Vector b;     ///< m
  RowMatrix T;  ///< q x n
  Vector d;     ///< q
  ActiveSet active;  ///< generating active set (empty when received as raw matrices)
};

enum class BackendKind {
  naive_inverse,  ///< explicit Gauss-Jordan inverse, instrumented flop counts
  lu_pivoted,     ///< LU with partial pivoting and forward/backward substitution
};

std::string_view backend_name(BackendKind kind) noexcept;
BackendKind parse_backend(std::string_view text);

/// Row-wise slack on T x <= d so that states on a facet do not re-trigger.
inline constexpr double kMembershipTolerance = 1e-9;

/// Law and polytope for the given active set. Throws Error(rank_deficient)
/// when G_A H^-1 G_A' has a pivot below 1e-10 * its infinity norm, and
/// Error(invalid_argument) if q_A > mN or aset.q() != q.
///
/// With the naive backend and a non-null counter, every flop is booked in the
/// order of the local node's A1 schedule; the lu backend ignores the counter.
Region build_region(const CondensedQp& qp, const ActiveSet& aset, BackendKind backend,
                    FlopCounter* counter = nullptr);

/// Same region with (G_A H^-1 G_A')^-1 supplied instead of computed (A2).
Region build_region_with_phi(const CondensedQp& qp, const ActiveSet& aset, const Matrix& phi,
                             FlopCounter* counter = nullptr);

/// u = K x + b
Vector evaluate_law(const Region& region, const Vector& x);

/// T x <= d + kMembershipTolerance * (1 + |d|), row by row with early exit.
bool contains(const Region& region, const Vector& x);

/// Max absolute entry difference across K, b, T, d (shapes must match).
double region_distance(const Region& a, const Region& b);

}  // namespace etmpc
