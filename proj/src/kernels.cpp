#include "etmpc/kernels.hpp"

#include <atomic>
#include <cassert>
#include <cstdlib>
#include <cstring>

namespace etmpc::kernels {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(ETMPC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() noexcept {
  const char* force = std::getenv("ETMPC_FORCE_SCALAR");
  if (force && std::strcmp(force, "0") != 0 && *force != '\0') return Isa::scalar;
  return detected_isa();
}

std::atomic<Isa>& active() noexcept {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

Isa detected_isa() noexcept {
  static const Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
  return isa;
}

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) noexcept {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2) isa = Isa::scalar;
  active().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
#if defined(ETMPC_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::dot(a.data(), b.data(), a.size());
#endif
  return scalar::dot(a.data(), b.data(), a.size());
}

void affine(RowsView a, std::span<const double> x, std::span<const double> b,
            std::span<double> y) noexcept {
  assert(x.size() == a.cols && y.size() == a.rows && (b.empty() || b.size() == a.rows));
  const double* bp = b.empty() ? nullptr : b.data();
#if defined(ETMPC_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::affine(a, x.data(), bp, y.data());
#endif
  scalar::affine(a, x.data(), bp, y.data());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  assert(x.size() == y.size());
#if defined(ETMPC_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::axpy(alpha, x.data(), y.data(), x.size());
#endif
  scalar::axpy(alpha, x.data(), y.data(), x.size());
}

std::size_t first_violated_row(RowsView t, std::span<const double> x, std::span<const double> d,
                               double rel_tol) noexcept {
  assert(x.size() == t.cols && d.size() == t.rows);
#if defined(ETMPC_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::first_violated_row(t, x.data(), d.data(), rel_tol);
#endif
  return scalar::first_violated_row(t, x.data(), d.data(), rel_tol);
}

bool halfspace_contains(RowsView t, std::span<const double> x, std::span<const double> d,
                        double rel_tol) noexcept {
  return first_violated_row(t, x, d, rel_tol) == t.rows;
}

}  // namespace etmpc::kernels
