#include "etmpc/costmodel.hpp"

#include <ostream>
#include <sstream>

#include "etmpc/error.hpp"

namespace etmpc {

namespace {

/// 3 * (2/3 q^3 + 6 q^2 + 7/3 q), the cubic shared by A1 and A3.
std::int64_t cubic_times_three(std::int64_t qa) { return 2 * qa * qa * qa + 18 * qa * qa + 7 * qa; }

Threshold compare(const Ratio& lhs, const Ratio& rhs) {
  if (lhs > rhs) return Threshold::strict;
  if (lhs == rhs) return Threshold::boundary;
  return Threshold::not_met;
}

std::string ratio_text(const Ratio& r) {
  std::ostringstream os;
  os << r.numerator() << "/" << r.denominator();
  return os.str();
}

}  // namespace

void Dims::check() const {
  if (n < 0 || m < 0 || N < 0 || q < 0 || q_a < 0) throw Error(Errc::invalid_argument, "negative dimension in " + to_string(*this));
  if (q_a > q || q_a > mN())
    throw Error(Errc::invalid_argument, "q_A exceeds min(q, mN) in " + to_string(*this));
}

std::string to_string(const Dims& d) {
  std::ostringstream os;
  os << "(n=" << d.n << ", m=" << d.m << ", N=" << d.N << ", q=" << d.q << ", q_A=" << d.q_a << ")";
  return os.str();
}

std::int64_t predicted_bits(Variant v, const Dims& d) {
  const std::int64_t lambda = kBitsPerReal;
  switch (v) {
    case Variant::A1: return d.q;
    case Variant::A2: return lambda * (d.q_a * d.q_a + d.q_a) / 2 + d.q;
    case Variant::A3: return lambda * d.mN();
    case Variant::A4: return lambda * (d.m * d.n + d.m + d.q * d.n + d.q);
  }
  return 0;
}

std::int64_t predicted_flops(Variant v, const Dims& d) {
  const std::int64_t n = d.n, m = d.m, q = d.q, qa = d.q_a, mN = d.mN();
  const std::int64_t shared = (q * n + q + m + m * n) * (2 * qa - 1);
  switch (v) {
    case Variant::A1: {
      const std::int64_t cubic = cubic_times_three(qa);
      return (mN * qa + m * n + q * qa) * (2 * mN - 1) + shared + cubic / 3 + q * n + q - qa * n + m * n;
    }
    case Variant::A2:
      return (mN * qa + m * n + q * qa - qa * qa) * (2 * mN - 1) + shared + q * n + q - qa * n - qa + m * n;
    case Variant::A3: {
      const std::int64_t cubic = cubic_times_three(qa);
      return (mN * qa + m * n + q * qa + q) * (2 * mN - 1) + shared + cubic / 3 + 3 * q * n + 2 * q - qa * n + m * n;
    }
    case Variant::A4: return 0;
  }
  return 0;
}

EtaSplit eta_split(const Dims& d) {
  const std::int64_t n = d.n, m = d.m, q = d.q, qa = d.q_a, mN = d.mN();
  EtaSplit s;
  s.inv = opcost::inverse(qa);
  s.alpha = (mN + q) * (2 * mN - 1) - n - 1 + 2 * m + 2 * m * n + 2 * q * n + 2 * q;
  s.beta = -m + m * n * (2 * mN - 1);
  s.mat = s.alpha * qa + s.beta;
  return s;
}

Ratio eta_ratio(const Dims& d) {
  const EtaSplit s = eta_split(d);
  if (s.mat == 0) return Ratio(0);
  return Ratio(s.inv, s.mat);
}

CostReport cost_report(Variant v, const Dims& d) {
  CostReport r;
  r.variant = v;
  r.dims = d;
  r.bits = predicted_bits(v, d);
  r.flops = predicted_flops(v, d);
  switch (v) {
    case Variant::A1:
    case Variant::A3:
      r.flops_inv = opcost::inverse(d.q_a);
      break;
    case Variant::A2:
    case Variant::A4:
      r.flops_inv = 0;
      break;
  }
  r.flops_mat = r.flops - r.flops_inv;
  r.ratio = r.flops_mat == 0 ? Ratio(0) : Ratio(r.flops_inv, r.flops_mat);
  return r;
}

RatioBoundReport check_ratio_bound(std::int64_t n_lo, std::int64_t n_hi, std::int64_t m_lo, std::int64_t m_hi,
                                   std::int64_t N_lo, std::int64_t N_hi) {
  RatioBoundReport report;
  bool first = true;
  for (std::int64_t n = n_lo; n <= n_hi; ++n)
    for (std::int64_t m = m_lo; m <= m_hi; ++m)
      for (std::int64_t N = N_lo; N <= N_hi; ++N) {
        const Dims base = Dims::box(n, m, N);
        Ratio prev(-1), line_max(-1);
        std::int64_t line_argmax = 0;
        bool line_monotone = true;
        for (std::int64_t qa = 0; qa <= base.mN(); ++qa) {
          const Dims d = base.with_active(qa);
          const Ratio r = eta_ratio(d);
          ++report.points;
          if (r > kRatioBound) report.bound_violations.push_back(d);
          if (r < prev && line_monotone) {
            report.monotonicity_violations.push_back(d);
            line_monotone = false;
          }
          prev = r;
          if (r > line_max) {
            line_max = r;
            line_argmax = qa;
          }
          if (first || r > report.max_ratio) {
            report.max_ratio = r;
            report.argmax = d;
            first = false;
          }
        }
        if (line_argmax != base.mN()) report.argmax_not_at_top.push_back(base.with_active(line_argmax));
      }
  return report;
}

std::int64_t case_one_polynomial(std::int64_t m) { return 1328 * m * m - 1368 * m + 40; }

std::string_view threshold_name(Threshold t) noexcept {
  switch (t) {
    case Threshold::strict: return "strict";
    case Threshold::boundary: return "boundary";
    case Threshold::not_met: return "not met";
  }
  return "?";
}

bool EncodingReport::a1_le_a2() const {
  for (const auto& r : rows)
    if (r.bits[0] > r.bits[1]) return false;
  return true;
}

bool EncodingReport::all_le_a4(std::vector<std::int64_t>* offending_q_a) const {
  bool ok = true;
  for (const auto& r : rows)
    if (r.bits[0] > r.bits[3] || r.bits[1] > r.bits[3] || r.bits[2] > r.bits[3]) {
      ok = false;
      if (offending_q_a) offending_q_a->push_back(r.q_a);
    }
  return ok;
}

bool EncodingReport::predictions_agree() const {
  for (const auto& r : rows) {
    if (a1_threshold == Threshold::strict && !(r.bits[2] > r.bits[0])) return false;
    if (r.a2_threshold == Threshold::strict && !(r.bits[2] > r.bits[1])) return false;
  }
  return true;
}

bool EncodingReport::converse_holds() const {
  for (const auto& r : rows) {
    if (a1_threshold != Threshold::strict && r.bits[2] > r.bits[0]) return false;
    if (r.a2_threshold != Threshold::strict && r.bits[2] > r.bits[1]) return false;
  }
  return true;
}

std::string EncodingReport::to_string() const {
  std::ostringstream os;
  os << "dims n=" << dims.n << " m=" << dims.m << " N=" << dims.N << " q=" << dims.q << " lambda=" << kBitsPerReal << "\n";
  os << "(lambda-2)/3 = " << ratio_text(lambda_side) << " vs n/m = " << ratio_text(ratio_nm) << ": "
     << threshold_name(a1_threshold);
  if (a1_threshold == Threshold::strict) os << " => predicts bits(A3) > bits(A1)";
  os << "\n";
  os << "bits(A1) = " << rows.front().bits[0] << ", bits(A3) = " << rows.front().bits[2]
     << ", bits(A4) = " << rows.front().bits[3] << " (independent of q_A)\n";
  os << "bits(A2) = " << rows.front().bits[1] << " at q_A=0 .. " << rows.back().bits[1] << " at q_A=" << rows.back().q_a
     << "\n";
  std::int64_t last_strict = -1;
  for (const auto& r : rows)
    if (r.a2_threshold == Threshold::strict) last_strict = r.q_a;
  if (last_strict >= 0)
    os << "A3-vs-A2 threshold strict for q_A <= " << last_strict << " => predicts bits(A3) > bits(A2) there\n";
  else
    os << "A3-vs-A2 threshold never strict\n";
  std::vector<std::int64_t> offenders;
  const bool le4 = all_le_a4(&offenders);
  os << "A1 <= A2: " << (a1_le_a2() ? "yes" : "NO") << "\n";
  os << "A1, A2, A3 <= A4: " << (le4 ? "yes" : "NO");
  if (!le4) {
    os << " (fails at q_A =";
    for (auto qa : offenders) os << " " << qa;
    os << ")";
  }
  os << "\n";
  os << "threshold predictions agree with direct counts: " << (predictions_agree() ? "yes" : "NO") << "\n";
  os << "converse reading also holds: " << (converse_holds() ? "yes" : "no") << "\n";
  return os.str();
}

EncodingReport compare_encodings(std::int64_t n, std::int64_t m, std::int64_t N) {
  if (n < 1 || m < 1 || N < 2) throw Error(Errc::invalid_argument, "compare_encodings needs n, m >= 1 and N >= 2");
  EncodingReport rep;
  rep.dims = Dims::box(n, m, N);
  const std::int64_t lambda = kBitsPerReal;
  rep.lambda_side = Ratio(lambda - 2, 3);
  rep.ratio_nm = Ratio(n, m);
  rep.a1_threshold = compare(rep.lambda_side, rep.ratio_nm);
  for (std::int64_t qa = 0; qa <= rep.dims.mN(); ++qa) {
    const Dims d = rep.dims.with_active(qa);
    EncodingRow row;
    row.q_a = qa;
    row.bits = {predicted_bits(Variant::A1, d), predicted_bits(Variant::A2, d), predicted_bits(Variant::A3, d),
                predicted_bits(Variant::A4, d)};
    row.a2_threshold = compare(rep.lambda_side, rep.ratio_nm + Ratio(lambda * qa * (qa + 1), 6 * m * N));
    rep.rows.push_back(row);
  }
  return rep;
}

void write_analysis_csv(std::ostream& out, std::int64_t n, std::int64_t m, std::int64_t N, bool header) {
  if (header) out << "variant,n,m,N,q,q_A,bits,flops,flops_inv,flops_mat,ratio\n";
  const Dims base = Dims::box(n, m, N);
  for (Variant v : {Variant::A1, Variant::A2, Variant::A3, Variant::A4})
    for (std::int64_t qa = 0; qa <= base.mN(); ++qa) {
      const CostReport r = cost_report(v, base.with_active(qa));
      out << variant_name(v) << "," << n << "," << m << "," << N << "," << base.q << "," << qa << "," << r.bits << ","
          << r.flops << "," << r.flops_inv << "," << r.flops_mat << "," << ratio_text(r.ratio) << "\n";
    }
}

}  // namespace etmpc
