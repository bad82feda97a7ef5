#include <sstream>

#include "etmpc/costmodel.hpp"
#include "etmpc/error.hpp"
#include "etmpc/sim.hpp"
#include "helpers.hpp"

using namespace etmpc;
using namespace etmpc::testing;

TEST_CASE("operation costs") {
  CHECK(opcost::multiply(2, 3, 4) == 40);
  CHECK(opcost::inverse(1) == 10);
  CHECK(opcost::add(1, 1) == 1);
  CHECK(opcost::scale(3, 5) == 15);
  CHECK(opcost::inverse(0) == 0);
  for (std::int64_t n = 0; n < 200; ++n) CHECK((2 * n * n * n + 18 * n * n + 10 * n) % 3 == 0);
}

TEST_CASE("bit counts on the bundled dimensions") {
  const Dims fm = Dims::box(8, 3, 10);
  CHECK(fm.q == 236);
  CHECK(predicted_bits(Variant::A1, fm) == 236);
  CHECK(predicted_bits(Variant::A2, fm) == 236);
  CHECK(predicted_bits(Variant::A2, fm.with_active(30)) == 7676);
  CHECK(predicted_bits(Variant::A3, fm) == 480);
  CHECK(predicted_bits(Variant::A4, fm) == 34416);
  CHECK(predicted_flops(Variant::A4, fm.with_active(7)) == 0);
}

TEST_CASE("A1 flops split as inversion plus an affine function of q_A") {
  for (std::int64_t n = 1; n <= 6; ++n)
    for (std::int64_t m = 1; m <= 4; ++m)
      for (std::int64_t N = 1; N <= 6; ++N) {
        const Dims base = Dims::box(n, m, N);
        for (std::int64_t qa = 0; qa <= base.mN(); ++qa) {
          const Dims d = base.with_active(qa);
          const EtaSplit s = eta_split(d);
          CHECK(predicted_flops(Variant::A1, d) == s.inv + s.mat);
          // A3 adds the received-residual pass q(2mN - 1) + 2qn + q.
          CHECK(predicted_flops(Variant::A3, d) - predicted_flops(Variant::A1, d) ==
                d.q * (2 * d.mN() - 1) + 2 * d.q * n + d.q);
          const CostReport r = cost_report(Variant::A1, d);
          CHECK(r.flops_inv + r.flops_mat == r.flops);
          CHECK(r.flops_inv == opcost::inverse(qa));
          CHECK(cost_report(Variant::A2, d).flops_inv == 0);
        }
      }
}

TEST_CASE("the instrumented naive backend books exactly the predicted A1 and A2 counts") {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 2 + trial % 2, m = 1 + trial / 2, N = 3;
    const MpcProblem p = random_problem(rng, n, m, N);
    const CondensedQp qp = condense(p);
    std::uniform_real_distribution<double> xs(-2.9, 2.9);
    for (int i = 0; i < 60; ++i) {
      Vector x(n);
      for (int j = 0; j < n; ++j) x(j) = xs(rng);
      QpSolution sol;
      try {
        sol = solve_qp(qp, x);
      } catch (const Error&) {
        continue;
      }
      const Dims d{n, m, N, qp.q(), static_cast<std::int64_t>(sol.active.size())};
      FlopCounter c1;
      build_region(qp, sol.active, BackendKind::naive_inverse, &c1);
      CHECK(c1.inversion() == opcost::inverse(d.q_a));
      CHECK(c1.total() == predicted_flops(Variant::A1, d));
      FlopCounter c2;
      build_region_with_phi(qp, sol.active, compute_phi(qp, sol.active), &c2);
      CHECK(c2.inversion() == 0);
      CHECK(c2.total() == predicted_flops(Variant::A2, d));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("ratio bound: maximum 18/79 at the smallest box") {
  const RatioBoundReport r = check_ratio_bound(1, 6, 1, 4, 2, 8);
  CHECK(r.bound_holds());
  CHECK(r.monotone());
  CHECK(r.argmax_not_at_top.empty());
  CHECK(r.max_ratio == Ratio(18, 79));
  CHECK(r.argmax == Dims::box(1, 1, 2, 2));
  // Independent evaluation at the argmax: inv = (16 + 72 + 20)/3 = 36, q = 10.
  const EtaSplit s = eta_split(Dims::box(1, 1, 2, 2));
  CHECK(s.inv == 36);
  CHECK(s.alpha == 12 * 3 - 1 - 1 + 2 + 2 + 20 + 20);
  CHECK(s.beta == -1 + 3);
  CHECK(Ratio(s.inv, s.mat) == Ratio(18, 79));
}

TEST_CASE("ratio is zero without active rows and never exceeds the bound on random dims") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> nd(1, 40), md(1, 10), Nd(2, 30);
  for (int i = 0; i < 300; ++i) {
    const Dims base = Dims::box(nd(rng), md(rng), Nd(rng));
    CHECK(eta_ratio(base) == Ratio(0));
    CHECK(eta_ratio(base.with_active(base.mN())) <= kRatioBound);
  }
}

TEST_CASE("case-one polynomial matches the exact ratio comparison") {
  for (std::int64_t m = 1; m <= 30; ++m) {
    const Dims d = Dims::box(1, m, 2, 2 * m);
    const EtaSplit s = eta_split(d);
    const std::int64_t slack = 18 * s.mat - 79 * s.inv;  // >= 0 iff the bound holds
    CHECK((slack >= 0) == (case_one_polynomial(m) >= 0));
    CHECK((slack == 0) == (case_one_polynomial(m) == 0));
  }
  CHECK(case_one_polynomial(1) == 0);
  CHECK(case_one_polynomial(2) > 0);
}

TEST_CASE("encoding comparison: boundary at n/m = 14/3") {
  const EncodingReport b = compare_encodings(14, 3, 5);
  CHECK(b.a1_threshold == Threshold::boundary);
  CHECK(b.lambda_side == Ratio(14, 3));
  CHECK(b.predictions_agree());

  const EncodingReport s = compare_encodings(1, 2, 6);
  CHECK(s.a1_threshold == Threshold::strict);
  CHECK(s.predictions_agree());
  CHECK(s.a1_le_a2());
  std::vector<std::int64_t> offenders;
  CHECK_FALSE(s.all_le_a4(&offenders));
  CHECK(offenders.front() == 12);
  CHECK(s.rows[12].bits[1] == 1286);
  CHECK(s.rows[12].bits[3] == 1280);

  const EncodingReport fm = compare_encodings(8, 3, 10);
  CHECK(fm.a1_threshold == Threshold::strict);
  CHECK(fm.predictions_agree());
  CHECK(fm.all_le_a4());
  CHECK(fm.rows.size() == 31);
  CHECK(fm.to_string().find("predicts bits(A3) > bits(A1)") != std::string::npos);
  CHECK(compare_encodings(20, 3, 10).a1_threshold == Threshold::not_met);
  CHECK_THROWS_AS(compare_encodings(0, 1, 2), Error);
}

TEST_CASE("direct bit comparisons agree with every strict threshold on a grid") {
  for (std::int64_t n = 1; n <= 12; ++n)
    for (std::int64_t m = 1; m <= 5; ++m)
      for (std::int64_t N = 2; N <= 12; ++N) {
        const EncodingReport r = compare_encodings(n, m, N);
        CHECK(r.predictions_agree());
        CHECK(r.a1_le_a2());
        for (const auto& row : r.rows) {
          const Dims d = r.dims.with_active(row.q_a);
          CHECK(row.bits[1] - row.bits[0] == 8 * row.q_a * (row.q_a + 1));
          CHECK(row.bits[3] == predicted_bits(Variant::A4, d));
        }
      }
}

TEST_CASE("analysis CSV") {
  std::ostringstream os;
  write_analysis_csv(os, 1, 1, 2);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "variant,n,m,N,q,q_A,bits,flops,flops_inv,flops_mat,ratio");
  int rows = 0;
  std::string a1_top;
  while (std::getline(in, line)) {
    ++rows;
    if (line.rfind("A1,1,1,2,10,2,", 0) == 0) a1_top = line;
  }
  CHECK(rows == 4 * 3);
  CHECK(a1_top.find(",36,") != std::string::npos);
}

TEST_CASE("dims validation") {
  CHECK_NOTHROW(Dims::box(8, 3, 10, 30).check());
  CHECK_THROWS_AS(Dims::box(8, 3, 10, 31).check(), Error);
  CHECK_THROWS_AS((Dims{-1, 1, 1, 1, 0}).check(), Error);
  CHECK(to_string(Dims::box(1, 1, 2)) == "(n=1, m=1, N=2, q=10, q_A=0)");
}
