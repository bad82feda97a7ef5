#include "etmpc/lu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>

#include "etmpc/error.hpp"
#include "etmpc/kernels.hpp"

namespace etmpc {

PivotedLu::PivotedLu(const Matrix& m, double rel_pivot_tol) : lu_(m), perm_(m.rows()) {
  if (m.rows() != m.cols()) throw Error(Errc::dimension_mismatch, "LU of a non-square matrix");
  const Eigen::Index n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i) perm_[i] = i;
  const double scale = inf_norm(m);
  const double threshold = rel_pivot_tol * scale;
  min_rel_pivot_ = n == 0 ? 0.0 : std::numeric_limits<double>::infinity();

  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    double best = std::fabs(lu_(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::fabs(lu_(i, k)) > best) {
        best = std::fabs(lu_(i, k));
        p = i;
      }
    }
    if (!(best > threshold) || scale == 0.0) {
      std::ostringstream msg;
      msg << "pivot " << best << " at step " << k << " below " << threshold;
      throw Error(Errc::rank_deficient, msg.str());
    }
    min_rel_pivot_ = std::min(min_rel_pivot_, best / scale);
    if (p != k) {
      lu_.row(k).swap(lu_.row(p));
      std::swap(perm_[k], perm_[p]);
    }
    const double inv_pivot = 1.0 / lu_(k, k);
    const std::size_t tail = static_cast<std::size_t>(n - k - 1);
    std::span<const double> pivot_row(lu_.row(k).data() + k + 1, tail);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double l = lu_(i, k) * inv_pivot;
      lu_(i, k) = l;
      if (l != 0.0) kernels::axpy(-l, pivot_row, std::span<double>(lu_.row(i).data() + k + 1, tail));
    }
  }
}

Vector PivotedLu::solve(const Vector& rhs) const {
  return solve(Matrix(rhs)).col(0);
}

Matrix PivotedLu::solve(const Matrix& rhs) const {
  const Eigen::Index n = size();
  if (rhs.rows() != n) throw Error(Errc::dimension_mismatch, "LU solve: rhs row count");
  // Row-major work array so substitution updates are contiguous.
  RowMatrix x(n, rhs.cols());
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = rhs.row(perm_[i]);
  const std::size_t w = static_cast<std::size_t>(rhs.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    std::span<double> xi(x.row(i).data(), w);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double l = lu_(i, j);
      if (l != 0.0) kernels::axpy(-l, std::span<const double>(x.row(j).data(), w), xi);
    }
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    std::span<double> xi(x.row(i).data(), w);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double u = lu_(i, j);
      if (u != 0.0) kernels::axpy(-u, std::span<const double>(x.row(j).data(), w), xi);
    }
    x.row(i) /= lu_(i, i);
  }
  return Matrix(x);
}

Matrix PivotedLu::inverse() const {
  return solve(Matrix(Matrix::Identity(size(), size())));
}

}  // namespace etmpc
