#pragma once

#include <vector>

#include "etmpc/linalg.hpp"

namespace etmpc {

/// Default relative pivot threshold: a pivot below tol * ||M||_inf means the
/// matrix is treated as singular.
inline constexpr double kPivotTolerance = 1e-10;

/// LU factorization with partial (row) pivoting, P M = L U, stored compactly.
/// Row updates go through the dispatching axpy kernel.
class PivotedLu {
 public:
  /// Throws Error(rank_deficient) when a pivot falls below tol * ||m||_inf.
  explicit PivotedLu(const Matrix& m, double rel_pivot_tol = kPivotTolerance);

  Eigen::Index size() const noexcept { return lu_.rows(); }

  /// Solves M X = rhs by forward and backward substitution.
  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;

  Matrix inverse() const;

  /// Smallest |pivot| relative to ||M||_inf (diagnostics).
  double min_relative_pivot() const noexcept { return min_rel_pivot_; }

 private:
  RowMatrix lu_;
  std::vector<Eigen::Index> perm_;
  double min_rel_pivot_ = 0.0;
};

}  // namespace etmpc
