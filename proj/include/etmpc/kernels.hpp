#pragma once

// Data-parallel inner loops of the local node. Every kernel has a scalar
// reference implementation; vector variants are picked at runtime from the
// CPU feature set and must agree with the reference (see tests/test_kernels.cpp).

#include <cstddef>
#include <span>
#include <string_view>

namespace etmpc::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;

/// Best ISA supported by both the build and the running CPU.
Isa detected_isa() noexcept;

/// ISA used by the dispatching entry points. Defaults to detected_isa();
/// the environment variable ETMPC_FORCE_SCALAR=1 pins it to scalar.
Isa active_isa() noexcept;

/// Overrides the dispatch target (tests, benchmarks). Requests for an ISA the
/// CPU lacks fall back to scalar.
void set_active_isa(Isa isa) noexcept;

/// Strided row-major view: row i starts at data + i * stride.
struct RowsView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t stride;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// y = A x + b (b may be empty, meaning zero).
void affine(RowsView a, std::span<const double> x, std::span<const double> b,
            std::span<double> y) noexcept;

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

/// True iff every row satisfies t_i x <= d_i + rel_tol * (1 + |d_i|). Rows are
/// checked in order and the scan stops at the first violated row.
bool halfspace_contains(RowsView t, std::span<const double> x, std::span<const double> d,
                        double rel_tol) noexcept;

/// Index of the first violated row, or t.rows if none.
std::size_t first_violated_row(RowsView t, std::span<const double> x, std::span<const double> d,
                               double rel_tol) noexcept;

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void affine(RowsView a, const double* x, const double* b, double* y) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
std::size_t first_violated_row(RowsView t, const double* x, const double* d, double rel_tol) noexcept;
}  // namespace scalar

#if defined(ETMPC_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void affine(RowsView a, const double* x, const double* b, double* y) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
std::size_t first_violated_row(RowsView t, const double* x, const double* d, double rel_tol) noexcept;
}  // namespace avx2
#endif

}  // namespace etmpc::kernels
