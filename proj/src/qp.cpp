#include "etmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "etmpc/error.hpp"
#include "etmpc/lu.hpp"

namespace etmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCertifyTol = 1e-7;

/// Working-set geometry in the scaled space where H becomes the identity.
/// Columns of `basis` are L^-1 g_i for the working rows; a QR of it gives the
/// projector onto the complement of the working normals.
struct WorkingGeometry {
  Eigen::HouseholderQR<Matrix> qr;
  Eigen::Index k = 0;

  void factor(const CondensedQp& qp, const std::vector<std::size_t>& working) {
    k = static_cast<Eigen::Index>(working.size());
    Matrix basis(qp.dims.mN(), k);
    for (Eigen::Index j = 0; j < k; ++j) basis.col(j) = qp.scaled_normals.col(static_cast<Eigen::Index>(working[j]));
    qr.compute(basis);
  }

  /// Splits the scaled normal of the candidate row into the primal step
  /// (scaled space, orthogonal to the working normals) and the dual step.
  void directions(const Vector& d, Vector& z_scaled, Vector& r) const {
    const Eigen::Index n = d.size();
    if (k == 0) {
      z_scaled = d;
      r.resize(0);
      return;
    }
    Vector qtd = qr.householderQ().adjoint() * d;
    r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(qtd.head(k));
    qtd.head(k).setZero();
    z_scaled = qr.householderQ() * qtd;
    (void)n;
  }
};

}  // namespace

Vector constraint_residual(const CondensedQp& qp, const Vector& u, const Vector& x) {
  return qp.G * u - qp.E * x - qp.w;
}

double qp_objective(const CondensedQp& qp, const Vector& u, const Vector& x) {
  return 0.5 * u.dot(qp.H * u) + x.dot(qp.F * u);
}

ActiveSet identify_active_set(const CondensedQp& qp, const Vector& u_star, const Vector& x, double eps_active) {
  const Vector res = constraint_residual(qp, u_star, x);
  std::vector<std::size_t> rows;
  for (Eigen::Index i = 0; i < res.size(); ++i)
    if (std::fabs(res(i)) <= eps_active) rows.push_back(static_cast<std::size_t>(i));
  return ActiveSet(static_cast<std::size_t>(qp.q()), std::move(rows));
}

bool has_full_row_rank(const CondensedQp& qp, std::span<const std::size_t> rows) {
  if (rows.empty()) return true;
  if (static_cast<Eigen::Index>(rows.size()) > qp.dims.mN()) return false;
  const Matrix ga = select_rows(qp.G, rows);
  const Matrix gram = ga * qp.Hinv * ga.transpose();
  try {
    PivotedLu lu(gram);
  } catch (const Error&) {
    return false;
  }
  return true;
}

double stationarity_residual(const CondensedQp& qp, const Vector& x, const QpSolution& sol) {
  Vector r = qp.H * sol.u_star + qp.Ft * x;
  const auto idx = sol.active.indices();
  for (std::size_t j = 0; j < idx.size(); ++j)
    r += sol.multipliers(static_cast<Eigen::Index>(j)) * qp.G.row(static_cast<Eigen::Index>(idx[j])).transpose();
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

QpSolution solve_qp(const CondensedQp& qp, const Vector& x, const QpOptions& options) {
  const Eigen::Index q = qp.q(), mN = qp.dims.mN();
  if (x.size() != qp.n()) throw Error(Errc::dimension_mismatch, "QP state has wrong length");
  const Vector b = qp.w + qp.E * x;  // G U <= b
  const Vector g = qp.Ft * x;
  const Vector row_norm = qp.G.rowwise().norm();
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : static_cast<int>(10 * (q + mN));

  QpSolution sol;
  Vector u = -(qp.Hinv * g);
  std::vector<std::size_t> working;
  std::vector<double> mult;
  WorkingGeometry geom;

  auto record = [&] {
    if (options.record_trace) sol.objective_trace.push_back(qp_objective(qp, u, x));
  };
  record();

  auto drop = [&](std::size_t pos) {
    working.erase(working.begin() + static_cast<std::ptrdiff_t>(pos));
    mult.erase(mult.begin() + static_cast<std::ptrdiff_t>(pos));
  };

  if (options.warm_start) {
    // Equality-constrained solve on the warm set; keep the rows whose
    // multipliers come out nonnegative, then continue as usual.
    std::vector<std::size_t> rows(options.warm_start->indices().begin(), options.warm_start->indices().end());
    while (!rows.empty() && has_full_row_rank(qp, rows)) {
      const Matrix ga = select_rows(qp.G, rows);
      const Vector ba = select_entries(b, rows);
      const Matrix y = qp.Hinv * ga.transpose();
      const Vector lambda = (ga * y).ldlt().solve(-(ga * (qp.Hinv * g)) - ba);
      std::size_t worst = rows.size();
      double worst_val = -1e-12;
      for (std::size_t j = 0; j < rows.size(); ++j)
        if (lambda(static_cast<Eigen::Index>(j)) < worst_val) worst_val = lambda(static_cast<Eigen::Index>(j)), worst = j;
      if (worst == rows.size()) {
        u = -(qp.Hinv * (g + ga.transpose() * lambda));
        working = rows;
        mult.assign(lambda.data(), lambda.data() + lambda.size());
        record();
        break;
      }
      rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(worst));
    }
  }

  int iter = 0;
  for (;; ++iter) {
    if (iter >= max_iter) throw Error(Errc::degenerate_active_set, "QP iteration cap reached");
    // Most violated row outside the working set, scaled by its norm.
    Eigen::Index p = -1;
    double worst = 0.0;
    const Vector slack = b - qp.G * u;
    for (Eigen::Index i = 0; i < q; ++i) {
      if (slack(i) >= -options.feasibility_tol) continue;
      if (std::find(working.begin(), working.end(), static_cast<std::size_t>(i)) != working.end()) continue;
      const double scaled = slack(i) / std::max(row_norm(i), 1e-300);
      if (p < 0 || scaled < worst) {
        worst = scaled;
        p = i;
      }
    }
    if (p < 0) break;

    // G_p U <= b_p in the solver's orientation: normal n_p = -G_p', s_p = b_p - G_p U.
    const Vector d = -qp.scaled_normals.col(p);
    double s_p = slack(p);
    double mult_p = 0.0;
    for (;;) {
      geom.factor(qp, working);
      Vector z_scaled, r;
      // Working normals are -scaled_normals columns; flip the dual step accordingly.
      geom.directions(d, z_scaled, r);
      r = -r;
      const double z_norm = z_scaled.norm();
      const bool primal_step = z_norm > 1e-12 * std::max(1.0, d.norm());

      double t1 = kInf;
      std::size_t leaving = working.size();
      for (std::size_t j = 0; j < working.size(); ++j) {
        const double rj = r(static_cast<Eigen::Index>(j));
        if (rj > 0.0) {
          const double ratio = mult[j] / rj;
          if (ratio < t1) {
            t1 = ratio;
            leaving = j;
          }
        }
      }
      const double t2 = primal_step ? -s_p / z_scaled.squaredNorm() : kInf;
      const double t = std::min(t1, t2);
      if (t == kInf) {
        std::ostringstream os;
        os << "QP infeasible at x: constraint row " << p << " cannot be satisfied";
        throw Error(Errc::infeasible, os.str());
      }
      for (std::size_t j = 0; j < working.size(); ++j) mult[j] -= t * r(static_cast<Eigen::Index>(j));
      mult_p += t;
      if (primal_step) {
        // U moves along H^-1 n_p projected: z = L^-T z_scaled.
        const Vector z = qp.chol_l.transpose().triangularView<Eigen::Upper>().solve(z_scaled);
        u += t * z;
        s_p += t * z_scaled.squaredNorm();
        record();
      }
      if (primal_step && t2 <= t1) {
        working.push_back(static_cast<std::size_t>(p));
        mult.push_back(mult_p);
        break;
      }
      drop(leaving);
      if (++iter >= max_iter) throw Error(Errc::degenerate_active_set, "QP iteration cap reached");
    }
  }
  // Near-dependent working normals let the dual iterate run off to huge
  // multipliers on infeasible data instead of reaching z = 0 exactly, so the
  // result is certified before it is reported.
  {
    const Vector viol = qp.G * u - b;
    for (Eigen::Index i = 0; i < q; ++i)
      if (viol(i) > kCertifyTol * (1.0 + std::fabs(b(i)))) {
        std::ostringstream os;
        os << "QP infeasible at x: constraint row " << i << " violated by " << viol(i) << " at termination";
        throw Error(Errc::infeasible, os.str());
      }
    Vector grad = qp.H * u + g;
    for (std::size_t j = 0; j < working.size(); ++j)
      grad += mult[j] * qp.G.row(static_cast<Eigen::Index>(working[j])).transpose();
    const double scale = 1.0 + g.lpNorm<Eigen::Infinity>() + (qp.H * u).lpNorm<Eigen::Infinity>();
    if (grad.size() && grad.lpNorm<Eigen::Infinity>() > kCertifyTol * scale)
      throw Error(Errc::degenerate_active_set, "QP terminated without stationarity");
  }
  sol.iterations = iter;
  sol.u_star = u;
  sol.objective = qp_objective(qp, u, x);

  // Report: working rows first, then further rows at equality whose addition
  // keeps G_A full row rank. Rows left out carry zero multipliers.
  const ActiveSet identified = identify_active_set(qp, u, x, options.eps_active);
  std::vector<std::size_t> rows = working;
  std::sort(rows.begin(), rows.end());
  if (!has_full_row_rank(qp, rows))
    throw Error(Errc::degenerate_active_set, "working set lost full row rank");
  for (std::size_t i : identified.indices()) {
    if (std::binary_search(rows.begin(), rows.end(), i)) continue;
    std::vector<std::size_t> trial = rows;
    trial.insert(std::upper_bound(trial.begin(), trial.end(), i), i);
    if (has_full_row_rank(qp, trial)) rows = std::move(trial);
  }
  // Working rows whose multiplier vanished and that are no longer at equality
  // (possible only through rounding) are dropped.
  std::vector<std::size_t> final_rows;
  for (std::size_t i : rows) {
    const auto it = std::find(working.begin(), working.end(), i);
    const bool weak = it != working.end() && std::fabs(mult[static_cast<std::size_t>(it - working.begin())]) <= options.zero_multiplier;
    if (weak && !identified.contains(i)) continue;
    final_rows.push_back(i);
  }
  sol.active = ActiveSet(static_cast<std::size_t>(q), final_rows);
  sol.multipliers = Vector::Zero(static_cast<Eigen::Index>(final_rows.size()));
  for (std::size_t j = 0; j < final_rows.size(); ++j) {
    const auto it = std::find(working.begin(), working.end(), final_rows[j]);
    if (it != working.end())
      sol.multipliers(static_cast<Eigen::Index>(j)) = std::max(0.0, mult[static_cast<std::size_t>(it - working.begin())]);
  }
  return sol;
}

}  // namespace etmpc
