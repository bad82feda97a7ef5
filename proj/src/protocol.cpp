#include "etmpc/protocol.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "etmpc/error.hpp"
#include "etmpc/half.hpp"
#include "etmpc/lu.hpp"

namespace etmpc {

namespace {

std::size_t gamma_bytes(std::size_t q) { return (q + 7) / 8; }

std::size_t real_bytes(RealCodec codec) { return codec == RealCodec::binary16 ? 2 : 8; }

void put_gamma(std::vector<std::uint8_t>& out, const ActiveSet& aset) {
  const std::size_t base = out.size();
  out.resize(base + gamma_bytes(aset.q()), 0);
  for (std::size_t i : aset.indices()) out[base + i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
}

ActiveSet get_gamma(const std::uint8_t* data, std::size_t q) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < q; ++i)
    if (data[i / 8] & (0x80u >> (i % 8))) rows.push_back(i);
  return ActiveSet(q, std::move(rows));
}

/// Appends one real; `label` names it in range errors.
template <typename Label>
void put_real(std::vector<std::uint8_t>& out, double value, RealCodec codec, Label&& label) {
  if (codec == RealCodec::binary64) {
    if (!std::isfinite(value)) throw Error(Errc::range_error, label() + " is not finite");
    const auto bits = std::bit_cast<std::uint64_t>(value);
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
    return;
  }
  const Half h = to_half(value);
  if (!is_finite(h)) {
    std::ostringstream os;
    os << label() << " = " << value << " is outside the binary16 range";
    throw Error(Errc::range_error, os.str());
  }
  out.push_back(static_cast<std::uint8_t>(h.bits >> 8));
  out.push_back(static_cast<std::uint8_t>(h.bits & 0xFF));
}

double get_real(const std::uint8_t* p, RealCodec codec) {
  if (codec == RealCodec::binary64) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits = (bits << 8) | p[i];
    return std::bit_cast<double>(bits);
  }
  return from_half(Half{static_cast<std::uint16_t>((p[0] << 8) | p[1])});
}

void expect_size(const WireMessage& msg, std::size_t expected, const char* what) {
  if (msg.payload.size() != expected) {
    std::ostringstream os;
    os << what << " payload has " << msg.payload.size() << " bytes, expected " << expected;
    throw Error(Errc::framing_error, os.str());
  }
}

void expect_variant(const WireMessage& msg, Variant v) {
  if (msg.variant != v)
    throw Error(Errc::framing_error, std::string("expected ") + std::string(variant_name(v)) + " message, got " +
                                         std::string(variant_name(msg.variant)));
}

std::string entry_label(const char* name, Eigen::Index i, Eigen::Index j) {
  std::ostringstream os;
  os << name << "[" << i << "," << j << "]";
  return os.str();
}

}  // namespace

std::string_view variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::A1: return "A1";
    case Variant::A2: return "A2";
    case Variant::A3: return "A3";
    case Variant::A4: return "A4";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "A1" || text == "a1") return Variant::A1;
  if (text == "A2" || text == "a2") return Variant::A2;
  if (text == "A3" || text == "a3") return Variant::A3;
  if (text == "A4" || text == "a4") return Variant::A4;
  throw Error(Errc::invalid_argument, "unknown variant '" + std::string(text) + "' (expected A1..A4)");
}

std::string_view codec_name(RealCodec c) noexcept { return c == RealCodec::binary16 ? "half" : "full"; }

RealCodec parse_codec(std::string_view text) {
  if (text == "half" || text == "binary16" || text == "binary16-downlink") return RealCodec::binary16;
  if (text == "full" || text == "binary64") return RealCodec::binary64;
  throw Error(Errc::invalid_argument, "unknown precision '" + std::string(text) + "' (expected full or half)");
}

double quantize(double value, RealCodec codec) noexcept {
  return codec == RealCodec::binary64 ? value : from_half(to_half(value));
}

WireMessage encode_a1(const ActiveSet& aset) {
  WireMessage msg;
  msg.variant = Variant::A1;
  put_gamma(msg.payload, aset);
  msg.bit_length = static_cast<std::int64_t>(aset.q());
  return msg;
}

ActiveSet decode_a1(const WireMessage& msg, std::size_t q) {
  expect_variant(msg, Variant::A1);
  expect_size(msg, gamma_bytes(q), "A1");
  return get_gamma(msg.payload.data(), q);
}

Matrix compute_phi(const CondensedQp& qp, const ActiveSet& aset) {
  const auto rows = aset.indices();
  if (rows.empty()) return Matrix(0, 0);
  const Matrix ga = select_rows(qp.G, rows);
  const Matrix gram = ga * qp.Hinv * ga.transpose();
  const Matrix phi = PivotedLu(gram).inverse();
  return 0.5 * (phi + phi.transpose());
}

WireMessage encode_a2(const ActiveSet& aset, const Matrix& phi, RealCodec codec) {
  const auto qa = static_cast<Eigen::Index>(aset.size());
  if (phi.rows() != qa || phi.cols() != qa) throw Error(Errc::dimension_mismatch, "Phi does not match the active set");
  WireMessage msg;
  msg.variant = Variant::A2;
  msg.codec = codec;
  put_gamma(msg.payload, aset);
  for (Eigen::Index i = 0; i < qa; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) put_real(msg.payload, phi(i, j), codec, [&] { return entry_label("Phi", i, j); });
  msg.bit_length = kBitsPerReal * qa * (qa + 1) / 2 + static_cast<std::int64_t>(aset.q());
  return msg;
}

ActiveSetWithPhi decode_a2(const WireMessage& msg, std::size_t q) {
  expect_variant(msg, Variant::A2);
  if (msg.payload.size() < gamma_bytes(q)) throw Error(Errc::framing_error, "A2 payload shorter than gamma");
  ActiveSetWithPhi out{get_gamma(msg.payload.data(), q), {}};
  const auto qa = static_cast<Eigen::Index>(out.active.size());
  const std::size_t w = real_bytes(msg.codec);
  expect_size(msg, gamma_bytes(q) + w * static_cast<std::size_t>(qa * (qa + 1) / 2), "A2");
  out.phi.resize(qa, qa);
  const std::uint8_t* p = msg.payload.data() + gamma_bytes(q);
  for (Eigen::Index i = 0; i < qa; ++i)
    for (Eigen::Index j = 0; j <= i; ++j, p += w) out.phi(i, j) = out.phi(j, i) = get_real(p, msg.codec);
  return out;
}

WireMessage encode_a3(const Vector& u_star, RealCodec codec) {
  WireMessage msg;
  msg.variant = Variant::A3;
  msg.codec = codec;
  for (Eigen::Index i = 0; i < u_star.size(); ++i)
    put_real(msg.payload, u_star(i), codec, [&] { return "U*[" + std::to_string(i) + "]"; });
  msg.bit_length = kBitsPerReal * u_star.size();
  return msg;
}

Vector decode_a3(const WireMessage& msg, std::size_t mN) {
  expect_variant(msg, Variant::A3);
  const std::size_t w = real_bytes(msg.codec);
  expect_size(msg, w * mN, "A3");
  Vector u(static_cast<Eigen::Index>(mN));
  for (std::size_t i = 0; i < mN; ++i) u(static_cast<Eigen::Index>(i)) = get_real(msg.payload.data() + w * i, msg.codec);
  return u;
}

WireMessage encode_a4(const Region& region, RealCodec codec) {
  WireMessage msg;
  msg.variant = Variant::A4;
  msg.codec = codec;
  const Eigen::Index m = region.K.rows(), n = region.K.cols(), q = region.T.rows();
  if (region.b.size() != m || region.T.cols() != n || region.d.size() != q)
    throw Error(Errc::dimension_mismatch, "region matrices have inconsistent shapes");
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) put_real(msg.payload, region.K(i, j), codec, [&] { return entry_label("K", i, j); });
  for (Eigen::Index i = 0; i < m; ++i) put_real(msg.payload, region.b(i), codec, [&] { return entry_label("b", i, 0); });
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < n; ++j) put_real(msg.payload, region.T(i, j), codec, [&] { return entry_label("T", i, j); });
  for (Eigen::Index i = 0; i < q; ++i) put_real(msg.payload, region.d(i), codec, [&] { return entry_label("d", i, 0); });
  msg.bit_length = kBitsPerReal * (m * n + m + q * n + q);
  return msg;
}

Region decode_a4(const WireMessage& msg, std::size_t m, std::size_t n, std::size_t q) {
  expect_variant(msg, Variant::A4);
  const std::size_t w = real_bytes(msg.codec);
  expect_size(msg, w * (m * n + m + q * n + q), "A4");
  Region r;
  r.K.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  r.b.resize(static_cast<Eigen::Index>(m));
  r.T.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(n));
  r.d.resize(static_cast<Eigen::Index>(q));
  const std::uint8_t* p = msg.payload.data();
  for (Eigen::Index i = 0; i < r.K.rows(); ++i)
    for (Eigen::Index j = 0; j < r.K.cols(); ++j, p += w) r.K(i, j) = get_real(p, msg.codec);
  for (Eigen::Index i = 0; i < r.b.size(); ++i, p += w) r.b(i) = get_real(p, msg.codec);
  for (Eigen::Index i = 0; i < r.T.rows(); ++i)
    for (Eigen::Index j = 0; j < r.T.cols(); ++j, p += w) r.T(i, j) = get_real(p, msg.codec);
  for (Eigen::Index i = 0; i < r.d.size(); ++i, p += w) r.d(i) = get_real(p, msg.codec);
  r.active = ActiveSet::empty(q);
  return r;
}

std::int64_t received_bits(const WireMessage& msg, std::size_t q) {
  const std::size_t w = real_bytes(msg.codec);
  const std::size_t gb = gamma_bytes(q);
  switch (msg.variant) {
    case Variant::A1:
      expect_size(msg, gb, "A1");
      return static_cast<std::int64_t>(q);
    case Variant::A2: {
      if (msg.payload.size() < gb || (msg.payload.size() - gb) % w != 0)
        throw Error(Errc::framing_error, "A2 payload size does not fit gamma plus whole reals");
      return static_cast<std::int64_t>(q) + kBitsPerReal * static_cast<std::int64_t>((msg.payload.size() - gb) / w);
    }
    case Variant::A3:
    case Variant::A4:
      if (msg.payload.size() % w != 0) throw Error(Errc::framing_error, "payload is not a whole number of reals");
      return kBitsPerReal * static_cast<std::int64_t>(msg.payload.size() / w);
  }
  return 0;
}

bool verify_phi(const CondensedQp& qp, const ActiveSet& aset, const Matrix& phi, double rel_tol) {
  const Matrix ref = compute_phi(qp, aset);
  if (ref.rows() != phi.rows() || ref.cols() != phi.cols()) return false;
  if (ref.size() == 0) return true;
  const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
  return (ref - phi).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace etmpc
