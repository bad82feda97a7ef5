#pragma once

#include <optional>
#include <vector>

#include "etmpc/active_set.hpp"
#include "etmpc/problem.hpp"

namespace etmpc {

struct QpOptions {
  /// Absolute threshold on |G_i U - E_i x - w_i| for a row to count as active.
  double eps_active = 1e-7;
  /// Rows violated by no more than this are treated as satisfied. Rows that do
  /// not depend on U (stage-0 state bounds) would otherwise make a state that
  /// sits on its bound up to rounding infeasible.
  double feasibility_tol = 1e-9;
  /// Multipliers at or below this magnitude count as zero when pruning
  /// weakly active rows that would break full row rank of G_A.
  double zero_multiplier = 1e-9;
  /// Optional working set to start from (warm start). Off by default so that
  /// every event is a cold solve.
  std::optional<ActiveSet> warm_start;
  int max_iterations = 0;  ///< 0 selects 10 * (q + mN)
  bool record_trace = false;
};

struct QpSolution {
  Vector u_star;
  ActiveSet active;
  Vector multipliers;  ///< aligned with active.indices(), all >= 0
  double objective = 0.0;
  int iterations = 0;
  /// Objective 1/2 U'HU + x'FU after every primal step (record_trace only).
  std::vector<double> objective_trace;
};

/// Dual active-set method (Goldfarb-Idnani) for the strictly convex QP
///   min 1/2 U'HU + x'FU  s.t.  GU - Ex <= w.
/// Starts from the unconstrained minimizer and adds violated rows until primal
/// feasibility; the working set stays linearly independent throughout.
///
/// Throws Error(infeasible) if no U satisfies the constraints at x and
/// Error(degenerate_active_set) if the reported active set cannot be made full
/// row rank or the iteration cap is reached.
QpSolution solve_qp(const CondensedQp& qp, const Vector& x, const QpOptions& options = {});

/// Rows with |G_i U - E_i x - w_i| <= eps_active (closed threshold).
ActiveSet identify_active_set(const CondensedQp& qp, const Vector& u_star, const Vector& x, double eps_active);

/// G U - E x - w
Vector constraint_residual(const CondensedQp& qp, const Vector& u, const Vector& x);

double qp_objective(const CondensedQp& qp, const Vector& u, const Vector& x);

/// ||H U + F'x + G_A' lambda||_inf
double stationarity_residual(const CondensedQp& qp, const Vector& x, const QpSolution& sol);

/// True iff G_A H^-1 G_A' factors with every pivot above the rank tolerance.
bool has_full_row_rank(const CondensedQp& qp, std::span<const std::size_t> rows);

}  // namespace etmpc
