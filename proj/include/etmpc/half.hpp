#pragma once

#include <cstdint>

namespace etmpc {

/// IEEE 754 binary16 bit pattern.
struct Half {
  std::uint16_t bits = 0;

  friend bool operator==(Half, Half) = default;
};

/// Round-to-nearest-even conversion straight from binary64 (no intermediate
/// binary32, so no double rounding). Overflow yields +-infinity, NaN a quiet NaN.
Half to_half(double value) noexcept;

/// Exact widening.
double from_half(Half h) noexcept;

bool is_finite(Half h) noexcept;

/// Largest finite binary16 value, 65504.
inline constexpr double kHalfMax = 65504.0;

}  // namespace etmpc
