#include "etmpc/half.hpp"

#include <bit>
#include <cmath>

namespace etmpc {

Half to_half(double value) noexcept {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000u);
  const int exp = static_cast<int>((bits >> 52) & 0x7FF);
  const std::uint64_t frac = bits & ((std::uint64_t{1} << 52) - 1);

  if (exp == 0x7FF) return Half{static_cast<std::uint16_t>(sign | (frac ? 0x7E00u : 0x7C00u))};
  if (exp == 0) return Half{sign};  // zero or binary64 subnormal, far below 2^-25

  const int e = exp - 1023;
  if (e > 15) return Half{static_cast<std::uint16_t>(sign | 0x7C00u)};
  const std::uint64_t mant = frac | (std::uint64_t{1} << 52);

  // Normal results keep 10 fraction bits; subnormals are counted in units of 2^-24.
  const int shift = e >= -14 ? 42 : 42 + (-14 - e);
  if (shift >= 64) return Half{sign};
  std::uint64_t q = mant >> shift;
  const std::uint64_t rem = mant & ((std::uint64_t{1} << shift) - 1);
  const std::uint64_t halfway = std::uint64_t{1} << (shift - 1);
  if (rem > halfway || (rem == halfway && (q & 1u))) ++q;

  std::uint32_t out;
  if (e >= -14) {
    // q in [1024, 2048]; a carry into 2048 bumps the exponent, up to infinity.
    out = (static_cast<std::uint32_t>(e + 15) << 10) + static_cast<std::uint32_t>(q - 1024);
    if (out >= 0x7C00u) out = 0x7C00u;
  } else {
    out = static_cast<std::uint32_t>(q);  // q == 1024 is the smallest normal
  }
  return Half{static_cast<std::uint16_t>(sign | out)};
}

double from_half(Half h) noexcept {
  const bool neg = h.bits & 0x8000u;
  const int exp = (h.bits >> 10) & 0x1F;
  const int frac = h.bits & 0x3FF;
  double v;
  if (exp == 0)
    v = std::ldexp(static_cast<double>(frac), -24);
  else if (exp == 31)
    v = frac ? std::nan("") : INFINITY;
  else
    v = std::ldexp(static_cast<double>(frac | 0x400), exp - 25);
  return neg ? -v : v;
}

bool is_finite(Half h) noexcept { return ((h.bits >> 10) & 0x1F) != 31; }

}  // namespace etmpc
