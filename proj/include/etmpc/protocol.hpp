#pragma once

// Downlink encodings of a new law/polytope (central -> local node).
//
//   A1  gamma: q bits, bit i set iff row i is active, MSB-first, zero-padded to
//       ceil(q/8) bytes.
//   A2  gamma as in A1, then the lower triangle of Phi = (G_A H^-1 G_A')^-1,
//       row-major with the diagonal: q_A(q_A+1)/2 reals.
//   A3  U*: mN reals.
//   A4  K (m*n), b (m), T (q*n), d (q): reals, row-major, in that order.
//
// Reals are big-endian IEEE 754 binary16 (two bytes each), byte-aligned after
// gamma. The binary64 codec (eight bytes each) exists for full-precision
// simulation only. bit_length is the semantic bit count at 16 bits per real
// for either codec and never includes padding or framing.

#include <cstdint>
#include <string_view>
#include <vector>

#include "etmpc/active_set.hpp"
#include "etmpc/region.hpp"

namespace etmpc {

enum class Variant : std::uint8_t { A1 = 1, A2 = 2, A3 = 3, A4 = 4 };

std::string_view variant_name(Variant v) noexcept;
Variant parse_variant(std::string_view text);

enum class RealCodec : std::uint8_t { binary16, binary64 };

std::string_view codec_name(RealCodec c) noexcept;
RealCodec parse_codec(std::string_view text);

/// Bits per transmitted real in the bandwidth accounting.
inline constexpr std::int64_t kBitsPerReal = 16;

struct WireMessage {
  Variant variant = Variant::A1;
  RealCodec codec = RealCodec::binary16;
  std::vector<std::uint8_t> payload;
  std::int64_t bit_length = 0;
};

WireMessage encode_a1(const ActiveSet& aset);
/// Throws Error(framing_error) if the payload is shorter or longer than ceil(q/8) bytes.
ActiveSet decode_a1(const WireMessage& msg, std::size_t q);

/// (G_A H^-1 G_A')^-1 via pivoted LU, symmetrized. Throws Error(rank_deficient).
Matrix compute_phi(const CondensedQp& qp, const ActiveSet& aset);

/// Throws Error(range_error) naming the first entry that overflows binary16.
WireMessage encode_a2(const ActiveSet& aset, const Matrix& phi, RealCodec codec = RealCodec::binary16);
WireMessage encode_a3(const Vector& u_star, RealCodec codec = RealCodec::binary16);
WireMessage encode_a4(const Region& region, RealCodec codec = RealCodec::binary16);

struct ActiveSetWithPhi {
  ActiveSet active;
  Matrix phi;  ///< full symmetric q_A x q_A
};

ActiveSetWithPhi decode_a2(const WireMessage& msg, std::size_t q);
Vector decode_a3(const WireMessage& msg, std::size_t mN);
/// The returned region carries an empty active set (A4 does not transmit it).
Region decode_a4(const WireMessage& msg, std::size_t m, std::size_t n, std::size_t q);

/// Optional receiver-side check for A2: ||phi - compute_phi(qp, aset)||_max
/// relative to ||phi||_max must stay below rel_tol.
bool verify_phi(const CondensedQp& qp, const ActiveSet& aset, const Matrix& phi, double rel_tol);

/// Semantic bits carried by a received payload, measured from its size (and
/// for A2 its gamma) at 16 bits per real. Throws Error(framing_error) on sizes
/// no encoder produces.
std::int64_t received_bits(const WireMessage& msg, std::size_t q);

/// Rounds through the codec: identity for binary64, binary16 rounding otherwise.
double quantize(double value, RealCodec codec) noexcept;

}  // namespace etmpc
