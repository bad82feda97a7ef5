#pragma once

// Exact bit and flop accounting for the four downlink encodings. All counts are
// 64-bit integers and all ratios exact rationals.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "etmpc/protocol.hpp"

namespace etmpc {

using Ratio = boost::rational<std::int64_t>;

struct Dims {
  std::int64_t n = 0, m = 0, N = 0, q = 0, q_a = 0;

  std::int64_t mN() const noexcept { return m * N; }

  /// Box-constrained dims: q = 2mN + 2nN + 2n.
  static Dims box(std::int64_t n, std::int64_t m, std::int64_t N, std::int64_t q_a = 0) {
    return {n, m, N, 2 * m * N + 2 * n * N + 2 * n, q_a};
  }
  Dims with_active(std::int64_t q_a) const {
    Dims d = *this;
    d.q_a = q_a;
    return d;
  }
  /// Throws Error(invalid_argument) unless all fields are nonnegative and q_a <= min(q, mN).
  void check() const;

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

/// Operation costs under the multiply/add = 1, divide = 10 convention.
namespace opcost {
inline std::int64_t add(std::int64_t rows, std::int64_t cols) { return rows * cols; }
inline std::int64_t scale(std::int64_t rows, std::int64_t cols) { return rows * cols; }
/// (rows x inner) * (inner x cols)
inline std::int64_t multiply(std::int64_t rows, std::int64_t inner, std::int64_t cols) {
  return rows * cols * (2 * inner - 1);
}
/// n x n inverse: (2n^3 + 18n^2 + 10n) / 3, always an integer.
inline std::int64_t inverse(std::int64_t n) { return (2 * n * n * n + 18 * n * n + 10 * n) / 3; }
}  // namespace opcost

std::int64_t predicted_bits(Variant v, const Dims& d);
std::int64_t predicted_flops(Variant v, const Dims& d);

struct EtaSplit {
  std::int64_t inv = 0;  ///< inversion of G_A H^-1 G_A'
  std::int64_t mat = 0;  ///< every other matrix operation, alpha * q_A + beta
  std::int64_t alpha = 0;
  std::int64_t beta = 0;
};

EtaSplit eta_split(const Dims& d);
/// eta_inv / eta_mat; zero when eta_mat is zero.
Ratio eta_ratio(const Dims& d);

inline const Ratio kRatioBound{18, 79};

struct CostReport {
  Variant variant = Variant::A1;
  Dims dims;
  std::int64_t bits = 0;
  std::int64_t flops = 0;
  std::int64_t flops_inv = 0;
  std::int64_t flops_mat = 0;
  Ratio ratio{0};
};

/// flops_inv/flops_mat split the local-node work: A1 and A3 carry the inversion,
/// A2 does not, A4 does nothing.
CostReport cost_report(Variant v, const Dims& d);

struct RatioBoundReport {
  std::int64_t points = 0;
  std::vector<Dims> bound_violations;
  std::vector<Dims> monotonicity_violations;  ///< first q_A where the ratio dropped
  Ratio max_ratio{0};
  Dims argmax;
  /// Box dims whose maximum ratio over q_A was not attained at q_A = mN.
  std::vector<Dims> argmax_not_at_top;

  bool bound_holds() const noexcept { return bound_violations.empty(); }
  bool monotone() const noexcept { return monotonicity_violations.empty(); }
};

/// Sweeps box dims n in [n_lo, n_hi], m in [m_lo, m_hi], N in [N_lo, N_hi] and
/// q_A in 0..mN.
RatioBoundReport check_ratio_bound(std::int64_t n_lo, std::int64_t n_hi, std::int64_t m_lo, std::int64_t m_hi,
                                   std::int64_t N_lo, std::int64_t N_hi);

/// 1328 m^2 - 1368 m + 40: the N = 2, n = 1 condition at q_A = mN.
std::int64_t case_one_polynomial(std::int64_t m);

/// Outcome of a sufficient condition "lhs > rhs" evaluated exactly.
enum class Threshold { strict, boundary, not_met };

std::string_view threshold_name(Threshold t) noexcept;

struct EncodingRow {
  std::int64_t q_a = 0;
  std::array<std::int64_t, 4> bits{};  ///< A1..A4
  /// (lambda - 2)/3 > n/m + lambda q_A (q_A + 1) / (6 mN): predicts bits(A3) > bits(A2).
  Threshold a2_threshold = Threshold::not_met;
};

struct EncodingReport {
  Dims dims;  ///< q_a unused
  /// (lambda - 2)/3 versus n/m: predicts bits(A3) > bits(A1) when strict.
  Ratio lambda_side{0};
  Ratio ratio_nm{0};
  Threshold a1_threshold = Threshold::not_met;
  std::vector<EncodingRow> rows;  ///< q_A = 0..mN

  /// bits(A1) <= bits(A2) at every q_A.
  bool a1_le_a2() const;
  /// bits(A1), bits(A2), bits(A3) <= bits(A4) at every q_A; offenders in `out`.
  bool all_le_a4(std::vector<std::int64_t>* offending_q_a = nullptr) const;
  /// Every strict threshold agrees with the direct bit comparison it predicts.
  bool predictions_agree() const;
  /// Whether the converse reading (threshold not met => A3 no larger) also holds.
  bool converse_holds() const;

  std::string to_string() const;
};

EncodingReport compare_encodings(std::int64_t n, std::int64_t m, std::int64_t N);

/// CSV with columns variant,n,m,N,q,q_A,bits,flops,flops_inv,flops_mat,ratio,
/// one row per variant per q_A in 0..mN. The ratio is printed as "num/den".
void write_analysis_csv(std::ostream& out, std::int64_t n, std::int64_t m, std::int64_t N, bool header = true);

}  // namespace etmpc
