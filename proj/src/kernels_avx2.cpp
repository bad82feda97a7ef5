// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "etmpc/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace etmpc::kernels::avx2 {

namespace {

inline double hsum(__m256d v) noexcept {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

void affine(RowsView a, const double* x, const double* b, double* y) noexcept {
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double v = dot(a.data + i * a.stride, x, a.cols);
    y[i] = b ? v + b[i] : v;
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

std::size_t first_violated_row(RowsView t, const double* x, const double* d, double rel_tol) noexcept {
  for (std::size_t i = 0; i < t.rows; ++i) {
    const double lhs = dot(t.data + i * t.stride, x, t.cols);
    if (lhs > d[i] + rel_tol * (1.0 + std::fabs(d[i]))) return i;
  }
  return t.rows;
}

}  // namespace etmpc::kernels::avx2
