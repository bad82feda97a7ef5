#pragma once

#include <Eigen/Dense>

namespace etmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Row-major storage; used where rows are scanned one at a time (polytope rows, gains).
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rows of `m` listed in `rows`, in that order.
template <typename Derived, typename Index>
Matrix select_rows(const Eigen::MatrixBase<Derived>& m, const Index& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  Eigen::Index r = 0;
  for (auto i : rows) out.row(r++) = m.row(static_cast<Eigen::Index>(i));
  return out;
}

template <typename Derived, typename Index>
Vector select_entries(const Eigen::MatrixBase<Derived>& v, const Index& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  Eigen::Index r = 0;
  for (auto i : rows) out(r++) = v(static_cast<Eigen::Index>(i));
  return out;
}

inline double inf_norm(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace etmpc
