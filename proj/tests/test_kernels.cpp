#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "etmpc/kernels.hpp"

using namespace etmpc::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool have_avx2() { return detected_isa() == Isa::avx2; }

}  // namespace

TEST_CASE("scalar reference on hand examples") {
  const double a[] = {1, 2, 3}, b[] = {4, 5, 6};
  CHECK(scalar::dot(a, b, 3) == 32.0);
  double y[] = {1, 1, 1};
  scalar::axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
  const double t[] = {1, 0, 0, 1, 1, 1};
  const double x[] = {0.5, 0.5}, d[] = {1, 1, 1};
  CHECK(scalar::first_violated_row({t, 3, 2, 2}, x, d, 0.0) == 3);
  const double d2[] = {1, 1, 0.9};
  CHECK(scalar::first_violated_row({t, 3, 2, 2}, x, d2, 0.0) == 2);
  double out[3];
  scalar::affine({t, 3, 2, 2}, x, nullptr, out);
  CHECK(out[2] == 1.0);
}

TEST_CASE("dispatch can be pinned to scalar") {
  const Isa saved = active_isa();
  set_active_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  set_active_isa(Isa::avx2);
  CHECK(active_isa() == (have_avx2() ? Isa::avx2 : Isa::scalar));
  set_active_isa(saved);
  CHECK(isa_name(Isa::scalar) == "scalar");
}

#if defined(ETMPC_HAVE_AVX2)
TEST_CASE("AVX2 kernels agree with the scalar reference on odd sizes and strides") {
  if (!have_avx2()) return;
  std::mt19937_64 rng(31);
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 236u}) {
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    const double ds = scalar::dot(a.data(), b.data(), n), dv = avx2::dot(a.data(), b.data(), n);
    CHECK(dv == doctest::Approx(ds).epsilon(1e-13).scale(1.0));

    const auto y0 = random_vec(rng, n);
    auto ys = y0, yv = y0;
    scalar::axpy(-0.7, a.data(), ys.data(), n);
    avx2::axpy(-0.7, a.data(), yv.data(), n);
    // The vector path fuses multiply and add, so results may differ by one rounding.
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(ys[i] - yv[i]) <= 0x1p-52 * (0.7 * std::abs(a[i]) + std::abs(y0[i])));

    for (std::size_t rows : {1u, 3u, 10u}) {
      const std::size_t stride = n + 3;
      const auto mat = random_vec(rng, rows * stride + 1);
      const auto off = random_vec(rng, rows);
      std::vector<double> os(rows), ov(rows);
      const RowsView view{mat.data() + 1, rows, n, stride};
      scalar::affine(view, a.data(), off.data(), os.data());
      avx2::affine(view, a.data(), off.data(), ov.data());
      for (std::size_t i = 0; i < rows; ++i) CHECK(ov[i] == doctest::Approx(os[i]).epsilon(1e-13).scale(1.0));

      // Place d exactly at t x for one row so the tolerance decides.
      std::vector<double> d(rows);
      scalar::affine(view, a.data(), nullptr, d.data());
      for (auto& v : d) v += 0.1;
      CHECK(scalar::first_violated_row(view, a.data(), d.data(), 1e-9) == rows);
      CHECK(avx2::first_violated_row(view, a.data(), d.data(), 1e-9) == rows);
      d[rows / 2] -= 0.2;
      CHECK(scalar::first_violated_row(view, a.data(), d.data(), 1e-9) == rows / 2);
      CHECK(avx2::first_violated_row(view, a.data(), d.data(), 1e-9) == rows / 2);
    }
  }
}
#endif

TEST_CASE("dispatching entry points agree across ISAs") {
  std::mt19937_64 rng(8);
  const std::size_t n = 13, rows = 7;
  const auto a = random_vec(rng, rows * n), x = random_vec(rng, n), d = random_vec(rng, rows);
  const RowsView view{a.data(), rows, n, n};
  const Isa saved = active_isa();
  set_active_isa(Isa::scalar);
  const double ds = dot(x, x);
  const bool cs = halfspace_contains(view, x, d, 1e-9);
  const std::size_t fs = first_violated_row(view, x, d, 1e-9);
  set_active_isa(Isa::avx2);
  CHECK(dot(x, x) == doctest::Approx(ds).epsilon(1e-14));
  CHECK(halfspace_contains(view, x, d, 1e-9) == cs);
  CHECK(first_violated_row(view, x, d, 1e-9) == fs);
  set_active_isa(saved);
}
