#include "etmpc/kernels.hpp"

#include <cmath>

namespace etmpc::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void affine(RowsView a, const double* x, const double* b, double* y) noexcept {
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double v = dot(a.data + i * a.stride, x, a.cols);
    y[i] = b ? v + b[i] : v;
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

std::size_t first_violated_row(RowsView t, const double* x, const double* d, double rel_tol) noexcept {
  for (std::size_t i = 0; i < t.rows; ++i) {
    const double lhs = dot(t.data + i * t.stride, x, t.cols);
    if (lhs > d[i] + rel_tol * (1.0 + std::fabs(d[i]))) return i;
  }
  return t.rows;
}

}  // namespace etmpc::kernels::scalar
