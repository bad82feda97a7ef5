#include "etmpc/flops.hpp"

#include <cmath>
#include <sstream>

#include "etmpc/error.hpp"
#include "etmpc/lu.hpp"

namespace etmpc::counted {

Matrix multiply(const Matrix& a, const Matrix& b, FlopCounter* counter) {
  if (a.cols() != b.rows()) throw Error(Errc::dimension_mismatch, "counted multiply: inner dimensions");
  const Eigen::Index rows = a.rows(), cols = b.cols(), inner = a.cols();
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      double acc = 0.0;
      if (inner > 0) {
        acc = a(i, 0) * b(0, j);
        for (Eigen::Index k = 1; k < inner; ++k) acc += a(i, k) * b(k, j);
      }
      out(i, j) = acc;
    }
  }
  if (counter) counter->add_flops(static_cast<std::int64_t>(rows) * cols * (2 * inner - 1));
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b, FlopCounter* counter) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::dimension_mismatch, "counted subtract: shapes differ");
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, j) = a(i, j) - b(i, j);
  if (counter) counter->add_flops(static_cast<std::int64_t>(a.size()));
  return out;
}

Matrix gauss_jordan_inverse(const Matrix& m, FlopCounter* counter) {
  if (m.rows() != m.cols()) throw Error(Errc::dimension_mismatch, "inverse of a non-square matrix");
  const Eigen::Index n = m.rows();
  const double threshold = kPivotTolerance * inf_norm(m);
  Matrix a = m;
  std::vector<Eigen::Index> col_of(n);
  for (Eigen::Index i = 0; i < n; ++i) col_of[i] = i;
  std::int64_t executed = 0;

  // In-place sweep: after step k, column k holds the k-th column of the inverse
  // of the leading block. Row swaps are undone as column swaps at the end.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> swaps;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i < n; ++i)
      if (std::fabs(a(i, k)) > std::fabs(a(p, k))) p = i;
    if (!(std::fabs(a(p, k)) > threshold)) {
      std::ostringstream msg;
      msg << "Gauss-Jordan pivot " << std::fabs(a(p, k)) << " at step " << k << " below " << threshold;
      throw Error(Errc::rank_deficient, msg.str());
    }
    if (p != k) {
      a.row(k).swap(a.row(p));
      swaps.emplace_back(k, p);
    }
    const double r = 1.0 / a(k, k);
    executed += FlopCounter::kDivisionCost;
    a(k, k) = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) a(k, j) *= r;
    executed += n;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == k) continue;
      const double f = a(i, k);
      a(i, k) = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) -= f * a(k, j);
      executed += 2 * n;
    }
  }
  for (auto it = swaps.rbegin(); it != swaps.rend(); ++it) a.col(it->first).swap(a.col(it->second));

  if (counter) {
    for (std::int64_t r = 1; r <= n; ++r) {
      counter->add_divisions(r);
      counter->add_flops((r - 1) * (r + 1) * 2);
    }
    counter->add_executed_inversion(executed);
  }
  return a;
}

}  // namespace etmpc::counted
