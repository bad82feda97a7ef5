#pragma once

#include <doctest.h>

#include <random>

#include "etmpc/problem_io.hpp"
#include "etmpc/qp.hpp"

namespace etmpc::testing {

inline MpcProblem bundled(const std::string& name) { return load_problem(resolve_problem_path(name)); }

/// x+ = x + u, N = 2, Q = R = P = 1, |u| <= 1, |x| <= 4 (q = 10).
inline MpcProblem scalar_chain() {
  MpcProblem p;
  p.name = "chain";
  p.A = Matrix::Ones(1, 1);
  p.B = Matrix::Ones(1, 1);
  p.Q = Matrix::Ones(1, 1);
  p.R = Matrix::Ones(1, 1);
  p.P = Matrix::Ones(1, 1);
  p.horizon = 2;
  p.x_lo = Vector::Constant(1, -4);
  p.x_hi = Vector::Constant(1, 4);
  p.u_lo = Vector::Constant(1, -1);
  p.u_hi = Vector::Constant(1, 1);
  return p;
}

/// Random stabilizable problem with n, m, N small; bounds wide enough that the
/// origin is well inside.
inline MpcProblem random_problem(std::mt19937_64& rng, int n, int m, int N) {
  std::normal_distribution<double> g(0.0, 1.0);
  MpcProblem p;
  p.name = "random";
  p.A = Matrix(n, n);
  p.B = Matrix(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.A(i, j) = 0.4 * g(rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) p.B(i, j) = g(rng);
  const Matrix mq = Matrix::NullaryExpr(n, n, [&] { return g(rng); });
  p.Q = mq * mq.transpose() + 0.1 * Matrix::Identity(n, n);
  const Matrix mr = Matrix::NullaryExpr(m, m, [&] { return g(rng); });
  p.R = mr * mr.transpose() + 0.5 * Matrix::Identity(m, m);
  p.P = p.Q;
  p.horizon = N;
  p.x_lo = Vector::Constant(n, -3);
  p.x_hi = Vector::Constant(n, 3);
  p.u_lo = Vector::Constant(m, -1);
  p.u_hi = Vector::Constant(m, 1);
  return p;
}

/// Stacked prediction: x_k for k = 0..N under U, by direct simulation.
inline std::vector<Vector> rollout(const MpcProblem& p, const Vector& x0, const Vector& U) {
  std::vector<Vector> xs{x0};
  const auto m = p.m();
  for (int k = 0; k < p.horizon; ++k) xs.push_back(p.A * xs.back() + p.B * U.segment(k * m, m));
  return xs;
}

struct BruteForce {
  bool feasible = false;
  Vector u;
  std::vector<std::size_t> positive;  ///< rows with multiplier > 1e-9
};

/// Best of all KKT points over row subsets (q <= 16): the textbook oracle.
inline BruteForce brute_force_qp(const CondensedQp& qp, const Vector& x) {
  BruteForce best;
  double best_obj = std::numeric_limits<double>::infinity();
  const auto q = static_cast<unsigned>(qp.q());
  const Eigen::Index nu = qp.dims.mN();
  for (unsigned mask = 0; mask < (1u << q); ++mask) {
    std::vector<Eigen::Index> rows;
    for (unsigned i = 0; i < q; ++i)
      if (mask >> i & 1u) rows.push_back(static_cast<Eigen::Index>(i));
    const auto k = static_cast<Eigen::Index>(rows.size());
    if (k > nu) continue;
    Matrix ga(k, nu);
    Vector ba(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      ga.row(j) = qp.G.row(rows[static_cast<std::size_t>(j)]);
      ba(j) = qp.w(rows[static_cast<std::size_t>(j)]) + qp.E.row(rows[static_cast<std::size_t>(j)]).dot(x);
    }
    Vector u, lambda(k);
    if (k == 0) {
      u = qp.H.ldlt().solve(-qp.F.transpose() * x);
    } else {
      // Range-space solve: (G H^-1 G') lambda = -(G H^-1 F'x + b).
      const Matrix hi_gt = qp.H.ldlt().solve(ga.transpose());
      const Matrix schur = ga * hi_gt;
      Eigen::FullPivLU<Matrix> lu(schur);
      if (lu.rank() < k) continue;
      const Vector u0 = qp.H.ldlt().solve(-qp.F.transpose() * x);
      lambda = lu.solve(ga * u0 - ba);
      u = u0 - hi_gt * lambda;
      if (lambda.minCoeff() < -1e-9) continue;
    }
    if ((qp.G * u - qp.E * x - qp.w).maxCoeff() > 1e-9) continue;
    const double obj = 0.5 * u.dot(qp.H * u) + x.dot(qp.F * u);
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      best.feasible = true;
      best.u = u;
      best.positive.clear();
      for (Eigen::Index j = 0; j < k; ++j)
        if (lambda(j) > 1e-9) best.positive.push_back(static_cast<std::size_t>(rows[static_cast<std::size_t>(j)]));
    }
  }
  return best;
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace etmpc::testing
