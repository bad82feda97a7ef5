#include "etmpc/problem.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <sstream>

#include "etmpc/error.hpp"

namespace etmpc {

namespace {

constexpr double kSymmetryTol = 1e-10;

bool is_symmetric(const Matrix& m) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * (1.0 + m.cwiseAbs().maxCoeff());
}

/// Smallest eigenvalue of the symmetric part.
double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void check_box(ValidationReport& r, const Vector& lo, const Vector& hi, Eigen::Index dim, const char* what) {
  if (lo.size() != dim || hi.size() != dim) {
    r.violations.push_back(std::string(what) + " bounds have wrong length");
    return;
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!(lo(i) < 0.0 && 0.0 < hi(i))) {
      std::ostringstream os;
      os << what << " box must contain the origin in its interior (component " << i << ": [" << lo(i) << ", "
         << hi(i) << "])";
      r.violations.push_back(os.str());
      return;
    }
  }
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

std::string ValidationReport::to_string() const {
  if (ok()) return "pass";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) os << (i ? "; " : "") << violations[i];
  return os.str();
}

bool is_stabilizable(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows();
  if (n == 0) return true;
  Eigen::ComplexEigenSolver<Matrix> es(A, false);
  const Eigen::MatrixXcd Ac = A.cast<std::complex<double>>();
  const Eigen::MatrixXcd Bc = B.cast<std::complex<double>>();
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::complex<double> lambda = es.eigenvalues()(k);
    if (std::abs(lambda) < 1.0 - 1e-12) continue;
    Eigen::MatrixXcd pbh(n, n + B.cols());
    pbh << Ac - lambda * Eigen::MatrixXcd::Identity(n, n), Bc;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(pbh);
    lu.setThreshold(1e-9);
    if (lu.rank() < n) return false;
  }
  return true;
}

ValidationReport validate(const MpcProblem& p) {
  ValidationReport r;
  const Eigen::Index n = p.A.rows(), m = p.B.cols();
  if (p.horizon <= 1) r.violations.push_back("horizon must exceed 1");
  if (n == 0 || p.A.cols() != n) {
    r.violations.push_back("A must be square and nonempty");
    return r;
  }
  if (p.B.rows() != n || m == 0) {
    r.violations.push_back("B must have n rows and at least one column");
    return r;
  }
  if (p.Q.rows() != n || p.Q.cols() != n) {
    r.violations.push_back("Q must be n x n");
  } else if (!is_symmetric(p.Q) || min_eigenvalue(p.Q) < -1e-12) {
    r.violations.push_back("Q must be symmetric positive semidefinite");
  }
  if (p.R.rows() != m || p.R.cols() != m) {
    r.violations.push_back("R must be m x m");
  } else if (!is_symmetric(p.R) || min_eigenvalue(p.R) <= 1e-12) {
    r.violations.push_back("R must be symmetric positive definite");
  }
  if (p.P) {
    if (p.P->rows() != n || p.P->cols() != n)
      r.violations.push_back("P must be n x n");
    else if (!is_symmetric(*p.P) || min_eigenvalue(*p.P) <= 1e-12)
      r.violations.push_back("P must be symmetric positive definite");
  }
  if (!is_stabilizable(p.A, p.B)) r.violations.push_back("(A, B) is not stabilizable");
  check_box(r, p.x_lo, p.x_hi, n, "state");
  check_box(r, p.u_lo, p.u_hi, m, "input");
  if (p.t_lo || p.t_hi) check_box(r, p.terminal_lo(), p.terminal_hi(), n, "terminal");
  return r;
}

double dare_residual(const Matrix& P, const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const Matrix BtPA = B.transpose() * P * A;
  const Matrix rhs = A.transpose() * P * A - BtPA.transpose() * (R + B.transpose() * P * B).ldlt().solve(BtPA) + Q;
  return inf_norm(P - rhs);
}

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const DareOptions& options) {
  Matrix P = symmetrize(Q);
  double residual = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Matrix BtPA = B.transpose() * P * A;
    Matrix next = A.transpose() * P * A - BtPA.transpose() * (R + B.transpose() * P * B).ldlt().solve(BtPA) + Q;
    P = symmetrize(next);
    residual = dare_residual(P, A, B, Q, R);
    if (!std::isfinite(residual)) break;
    if (residual <= options.tolerance) {
      if (min_eigenvalue(P) <= 0.0) throw Error(Errc::dare_divergence, "DARE solution is not positive definite");
      return P;
    }
  }
  std::ostringstream os;
  os << "DARE divergence: residual " << residual << " after " << options.max_iterations << " iterations";
  throw Error(Errc::dare_divergence, os.str());
}

std::pair<Matrix, Matrix> discretize_zoh(const Matrix& A_cont, const Matrix& B_cont, double ts) {
  if (!(ts > 0.0)) throw Error(Errc::invalid_argument, "sampling time must be positive");
  const Eigen::Index n = A_cont.rows(), m = B_cont.cols();
  if (A_cont.cols() != n || B_cont.rows() != n) throw Error(Errc::dimension_mismatch, "ZOH: A/B shapes");
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = A_cont * ts;
  aug.topRightCorner(n, m) = B_cont * ts;
  const Matrix e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

Matrix terminal_weight(const MpcProblem& p) {
  return p.P ? *p.P : solve_dare(p.A, p.B, p.Q, p.R);
}

CondensedQp make_condensed_qp(QpDims dims, Matrix H, Matrix F, Matrix G, Matrix E, Vector w, Matrix state_cost) {
  const Eigen::Index mN = dims.mN();
  if (H.rows() != mN || H.cols() != mN || F.rows() != dims.n || F.cols() != mN || G.rows() != dims.q ||
      G.cols() != mN || E.rows() != dims.q || E.cols() != dims.n || w.size() != dims.q)
    throw Error(Errc::dimension_mismatch, "condensed QP data does not match its dimensions");

  CondensedQp qp;
  qp.dims = dims;
  qp.H = symmetrize(H);
  Eigen::LLT<Matrix> llt(qp.H);
  if (llt.info() != Eigen::Success) throw Error(Errc::invalid_argument, "H is not positive definite");
  qp.chol_l = llt.matrixL();
  // Pivoted LDL' for the explicit inverse.
  qp.Hinv = symmetrize(qp.H.ldlt().solve(Matrix::Identity(mN, mN)));
  qp.F = std::move(F);
  qp.Ft = qp.F.transpose();
  qp.G = std::move(G);
  qp.E = std::move(E);
  qp.w = std::move(w);
  qp.S = qp.E + qp.G * (qp.Hinv * qp.Ft);
  qp.state_cost = state_cost.size() ? std::move(state_cost) : Matrix::Zero(dims.n, dims.n);
  qp.scaled_normals = qp.chol_l.triangularView<Eigen::Lower>().solve(qp.G.transpose());
  return qp;
}

CondensedQp condense(const MpcProblem& p) {
  const Eigen::Index n = p.n(), m = p.m(), N = p.horizon;
  if (p.B.rows() != n || p.Q.rows() != n || p.R.rows() != m || p.x_lo.size() != n || p.x_hi.size() != n ||
      p.u_lo.size() != m || p.u_hi.size() != m || p.terminal_lo().size() != n || p.terminal_hi().size() != n)
    throw Error(Errc::dimension_mismatch, "problem matrices and bounds have inconsistent dimensions");
  if (N < 2) throw Error(Errc::invalid_argument, "horizon must exceed 1");
  const Matrix P = terminal_weight(p);
  const Eigen::Index mN = m * N;

  // Stacked predictions X = Omega x + Gamma U over stages 0..N.
  Matrix omega = Matrix::Zero(n * (N + 1), n);
  Matrix gamma = Matrix::Zero(n * (N + 1), mN);
  omega.topRows(n).setIdentity();
  for (Eigen::Index k = 1; k <= N; ++k) {
    omega.middleRows(k * n, n) = p.A * omega.middleRows((k - 1) * n, n);
    gamma.middleRows(k * n, n) = p.A * gamma.middleRows((k - 1) * n, n);
    gamma.block(k * n, (k - 1) * m, n, m) = p.B;
  }

  Matrix qbar = Matrix::Zero(n * (N + 1), n * (N + 1));
  for (Eigen::Index k = 0; k < N; ++k) qbar.block(k * n, k * n, n, n) = p.Q;
  qbar.block(N * n, N * n, n, n) = P;
  Matrix rbar = Matrix::Zero(mN, mN);
  for (Eigen::Index k = 0; k < N; ++k) rbar.block(k * m, k * m, m, m) = p.R;

  const Matrix qg = qbar * gamma;
  const Matrix H = 2.0 * (gamma.transpose() * qg + rbar);
  const Matrix F = 2.0 * omega.transpose() * qg;
  const Matrix state_cost = omega.transpose() * qbar * omega;

  const Eigen::Index q = box_constraint_count(n, m, N);
  Matrix G = Matrix::Zero(q, mN);
  Matrix E = Matrix::Zero(q, n);
  Vector w(q);
  Eigen::Index row = 0;
  // Input upper / lower.
  G.block(row, 0, mN, mN).setIdentity();
  for (Eigen::Index k = 0; k < N; ++k) w.segment(row + k * m, m) = p.u_hi;
  row += mN;
  G.block(row, 0, mN, mN) = -Matrix::Identity(mN, mN);
  for (Eigen::Index k = 0; k < N; ++k) w.segment(row + k * m, m) = -p.u_lo;
  row += mN;
  // State upper / lower, stages 0..N-1:  x_k = Omega_k x + Gamma_k U.
  for (int sign : {1, -1}) {
    for (Eigen::Index k = 0; k < N; ++k) {
      G.middleRows(row, n) = sign * gamma.middleRows(k * n, n);
      E.middleRows(row, n) = -sign * omega.middleRows(k * n, n);
      w.segment(row, n) = sign > 0 ? Vector(p.x_hi) : Vector(-p.x_lo);
      row += n;
    }
  }
  for (int sign : {1, -1}) {
    G.middleRows(row, n) = sign * gamma.middleRows(N * n, n);
    E.middleRows(row, n) = -sign * omega.middleRows(N * n, n);
    w.segment(row, n) = sign > 0 ? Vector(p.terminal_hi()) : Vector(-p.terminal_lo());
    row += n;
  }

  return make_condensed_qp(QpDims{n, m, N, q}, H, F, std::move(G), std::move(E), std::move(w), state_cost);
}

}  // namespace etmpc
