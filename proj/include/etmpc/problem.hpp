#pragma once

#include <optional>
#include <string>
#include <vector>

#include "etmpc/linalg.hpp"

namespace etmpc {

/// Linear MPC with box constraints on inputs, states and the terminal state:
///
///   min  x_N' P x_N + sum_{k<N} x_k' Q x_k + u_k' R u_k
///   s.t. x_{k+1} = A x_k + B u_k,  u_lo <= u_k <= u_hi,
///        x_lo <= x_k <= x_hi (k = 0..N-1),  t_lo <= x_N <= t_hi.
struct MpcProblem {
  std::string name;
  Matrix A, B, Q, R;
  std::optional<Matrix> P;  ///< Terminal weight; empty selects the DARE solution.
  int horizon = 2;
  Vector x_lo, x_hi, u_lo, u_hi;
  std::optional<Vector> t_lo, t_hi;  ///< Terminal box; empty selects the state box.

  Eigen::Index n() const noexcept { return A.rows(); }
  Eigen::Index m() const noexcept { return B.cols(); }
  const Vector& terminal_lo() const { return t_lo ? *t_lo : x_lo; }
  const Vector& terminal_hi() const { return t_hi ? *t_hi : x_hi; }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string to_string() const;
};

/// Checks every structural and definiteness assumption; never throws.
ValidationReport validate(const MpcProblem& problem);

/// Popov-Belevitch-Hautus test over eigenvalues with |lambda| >= 1.
bool is_stabilizable(const Matrix& A, const Matrix& B);

struct DareOptions {
  int max_iterations = 10000;
  double tolerance = 1e-10;
};

/// ||P - (A'PA - A'PB (R + B'PB)^-1 B'PA + Q)||_inf
double dare_residual(const Matrix& P, const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

/// Fixed-point iteration of the Riccati recursion from P = Q until the
/// residual drops to options.tolerance. Throws Error(dare_divergence) at the cap.
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const DareOptions& options = {});

/// Exact zero-order-hold discretization from exp([[A B],[0 0]] * ts).
std::pair<Matrix, Matrix> discretize_zoh(const Matrix& A_cont, const Matrix& B_cont, double ts);

struct QpDims {
  Eigen::Index n = 0, m = 0, N = 0, q = 0;
  Eigen::Index mN() const noexcept { return m * N; }
};

/// Dense QP  min_U 1/2 U'HU + x'FU  s.t.  GU - Ex <= w.
///
/// Box constraint rows are ordered as: input upper bounds (mN rows), input
/// lower bounds (mN), state upper bounds for stages 0..N-1 (nN), state lower
/// bounds (nN), terminal upper (n), terminal lower (n). Within each block
/// rows run stage-major, component-minor.
struct CondensedQp {
  QpDims dims;
  Matrix H;   ///< mN x mN, symmetric positive definite
  Matrix F;   ///< n x mN
  Matrix G;   ///< q x mN
  Matrix E;   ///< q x n
  Vector w;   ///< q
  Matrix S;   ///< q x n, E + G H^-1 F'
  Matrix Hinv;
  Matrix Ft;  ///< F', kept precomputed next to Hinv and S
  /// U-independent part of the original cost: J = 1/2 U'HU + x'FU + x'Cx.
  Matrix state_cost;
  /// Lower Cholesky factor of H and L^-1 G' (mN x q), used by the QP solver.
  Matrix chol_l;
  Matrix scaled_normals;

  Eigen::Index n() const noexcept { return dims.n; }
  Eigen::Index m() const noexcept { return dims.m; }
  Eigen::Index q() const noexcept { return dims.q; }
};

/// Builds a CondensedQp from (G, E, w) and the cost pair (H, F); the generic
/// entry point for non-box constraint sets.
CondensedQp make_condensed_qp(QpDims dims, Matrix H, Matrix F, Matrix G, Matrix E, Vector w,
                              Matrix state_cost = {});

/// Condenses a validated box-constrained problem. The terminal weight is P if
/// given, otherwise the DARE solution. Throws Error(dimension_mismatch).
CondensedQp condense(const MpcProblem& problem);

/// Terminal weight actually used by condense().
Matrix terminal_weight(const MpcProblem& problem);

/// Number of box constraint rows, 2mN + 2nN + 2n.
inline Eigen::Index box_constraint_count(Eigen::Index n, Eigen::Index m, Eigen::Index N) {
  return 2 * m * N + 2 * n * N + 2 * n;
}

}  // namespace etmpc
