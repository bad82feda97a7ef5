#include <cstring>

#include "etmpc/error.hpp"
#include "etmpc/sim.hpp"
#include "helpers.hpp"

using namespace etmpc;
using namespace etmpc::testing;

namespace {

void check_kkt(const CondensedQp& qp, const Vector& x, const QpSolution& sol) {
  CHECK(stationarity_residual(qp, x, sol) <= 1e-8);
  CHECK(constraint_residual(qp, sol.u_star, x).maxCoeff() <= 1e-8);
  const Vector res = constraint_residual(qp, sol.u_star, x);
  for (std::size_t i : sol.active.indices()) CHECK(std::abs(res(static_cast<Eigen::Index>(i))) <= 1e-7);
  if (sol.multipliers.size()) CHECK(sol.multipliers.minCoeff() >= -1e-10);
  CHECK(has_full_row_rank(qp, sol.active.indices()));
}

}  // namespace

TEST_CASE("origin: zero optimizer, empty active set") {
  for (const char* name : {"four_mass_oscillator", "double_integrator"}) {
    const CondensedQp qp = condense(bundled(name));
    const QpSolution sol = solve_qp(qp, Vector::Zero(qp.n()));
    CHECK(sol.u_star.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(sol.active.empty());
  }
}

TEST_CASE("scalar chain: saturation clamps the first input at its lower bound") {
  const CondensedQp qp = condense(scalar_chain());
  // Unconstrained u0 = -(H^-1 F')_0 x = -(4*4 - 2*2)/20 x = -0.6 x, so x = 2 saturates.
  const Vector x = Vector::Constant(1, 2.0);
  const QpSolution sol = solve_qp(qp, x);
  CHECK(sol.u_star(0) == doctest::Approx(-1.0).epsilon(1e-12));
  // Row 2 is the stage-0 input lower bound.
  CHECK(sol.active.contains(2));
  const BruteForce ref = brute_force_qp(qp, x);
  REQUIRE(ref.feasible);
  CHECK((sol.u_star - ref.u).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(ref.positive == std::vector<std::size_t>{2});
  CHECK(sol.active.indices().size() == 1);
}

TEST_CASE("solver matches the all-subsets enumeration on q <= 12 instances") {
  std::mt19937_64 rng(21);
  std::vector<CondensedQp> qps{condense(scalar_chain())};
  {
    MpcProblem p = scalar_chain();
    p.A(0, 0) = 1.3;
    p.u_lo(0) = -0.5;
    qps.push_back(condense(p));
  }
  std::uniform_real_distribution<double> xs(-4.5, 4.5);
  int compared = 0, infeasible = 0;
  for (const auto& qp : qps)
    for (int i = 0; i < 300; ++i) {
      const Vector x = Vector::Constant(1, xs(rng));
      const BruteForce ref = brute_force_qp(qp, x);
      if (!ref.feasible) {
        CHECK_THROWS_AS(solve_qp(qp, x), Error);
        ++infeasible;
        continue;
      }
      const QpSolution sol = solve_qp(qp, x);
      CHECK((sol.u_star - ref.u).lpNorm<Eigen::Infinity>() <= 1e-8);
      // Tie normalization: strictly positive multipliers must be reported, and
      // every reported row must hold with equality.
      for (std::size_t r : ref.positive) CHECK(sol.active.contains(r));
      const ActiveSet eq = identify_active_set(qp, ref.u, x, 1e-7);
      for (std::size_t r : sol.active.indices()) CHECK(eq.contains(r));
      ++compared;
    }
  CHECK(compared > 400);
  CHECK(infeasible > 0);
}

TEST_CASE("random small problems: solver agrees with enumeration when q <= 12") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0, 1.5);
  int compared = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const MpcProblem p = random_problem(rng, 1, 1, 2);
    const CondensedQp qp = condense(p);
    REQUIRE(qp.q() <= 12);
    for (int i = 0; i < 50; ++i) {
      const Vector x = Vector::Constant(1, g(rng));
      const BruteForce ref = brute_force_qp(qp, x);
      if (!ref.feasible) continue;
      const QpSolution sol = solve_qp(qp, x);
      CHECK((sol.u_star - ref.u).lpNorm<Eigen::Infinity>() <= 1e-8);
      ++compared;
    }
  }
  CHECK(compared > 100);
}

TEST_CASE("four-mass oscillator: KKT conditions at 100 random feasible states") {
  const MpcProblem p = bundled("four_mass_oscillator");
  const CondensedQp qp = condense(p);
  const auto states = sample_feasible_states(p, qp, 100, 4);
  int nonempty = 0;
  for (const auto& x : states) {
    const QpSolution sol = solve_qp(qp, x);
    check_kkt(qp, x, sol);
    CHECK(static_cast<Eigen::Index>(sol.active.size()) <= qp.dims.mN());
    nonempty += !sol.active.empty();
  }
  CHECK(nonempty > 50);
}

TEST_CASE("identify_active_set: interior, single facet, closed threshold") {
  const CondensedQp qp = condense(scalar_chain());
  const Vector x = Vector::Constant(1, 0.5);
  CHECK(identify_active_set(qp, Vector::Zero(2), x, 1e-7).empty());

  // Put U on the facet u0 = 1 (row 0) by projection, keeping everything else slack.
  Vector u(2);
  u << 0.3, -0.2;
  u(0) = 1.0;
  const ActiveSet one = identify_active_set(qp, u, x, 1e-7);
  CHECK(one.indices().size() == 1);
  CHECK(one.contains(0));

  // Slack exactly eps on row 0: u0 = 1 - eps is included, slightly less is not.
  const double eps = 0.25;
  u(0) = 1.0 - eps;
  CHECK(identify_active_set(qp, u, x, eps).contains(0));
  u(0) = 1.0 - 2 * eps;
  CHECK_FALSE(identify_active_set(qp, u, x, eps).contains(0));
}

TEST_CASE("re-solving is deterministic and bit-identical") {
  const MpcProblem p = bundled("four_mass_oscillator");
  const CondensedQp qp = condense(p);
  for (const auto& x : sample_feasible_states(p, qp, 10, 17)) {
    const QpSolution a = solve_qp(qp, x), b = solve_qp(qp, x);
    CHECK(a.active == b.active);
    CHECK(std::memcmp(a.u_star.data(), b.u_star.data(), sizeof(double) * static_cast<std::size_t>(a.u_star.size())) == 0);
  }
}

TEST_CASE("the objective never decreases across iterations of the dual method") {
  const MpcProblem p = bundled("four_mass_oscillator");
  const CondensedQp qp = condense(p);
  QpOptions opt;
  opt.record_trace = true;
  for (const auto& x : sample_feasible_states(p, qp, 30, 3)) {
    const QpSolution sol = solve_qp(qp, x, opt);
    REQUIRE(!sol.objective_trace.empty());
    for (std::size_t i = 1; i < sol.objective_trace.size(); ++i)
      CHECK(sol.objective_trace[i] >= sol.objective_trace[i - 1] - 1e-9 * (1 + std::abs(sol.objective_trace[i - 1])));
    CHECK(sol.objective_trace.back() == doctest::Approx(sol.objective).epsilon(1e-12));
  }
}

TEST_CASE("infeasible states are reported as such") {
  const CondensedQp qp = condense(scalar_chain());
  CHECK_THROWS_AS(solve_qp(qp, Vector::Constant(1, 4.5)), Error);
  try {
    solve_qp(qp, Vector::Constant(1, 4.5));
  } catch (const Error& e) {
    CHECK(e.code() == Errc::infeasible);
  }
  // |x| <= 4 but the terminal bound cannot be reached with |u| <= 1 is still
  // feasible at 4 (x2 = 4 - 2 = 2); beyond the state box it is not.
  CHECK_NOTHROW(solve_qp(qp, Vector::Constant(1, 4.0)));
}

TEST_CASE("warm start reaches the same solution") {
  const MpcProblem p = bundled("four_mass_oscillator");
  const CondensedQp qp = condense(p);
  for (const auto& x : sample_feasible_states(p, qp, 20, 8)) {
    const QpSolution cold = solve_qp(qp, x);
    QpOptions opt;
    opt.warm_start = cold.active;
    const QpSolution warm = solve_qp(qp, x, opt);
    CHECK((warm.u_star - cold.u_star).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK(warm.iterations <= cold.iterations);
  }
}

TEST_CASE("dimension mismatch") {
  const CondensedQp qp = condense(scalar_chain());
  CHECK_THROWS_AS(solve_qp(qp, Vector::Zero(2)), Error);
}

TEST_CASE("near-dependent working rows on infeasible data are reported as infeasible") {
  // No input sequence satisfies every row here: the smallest achievable
  // worst-row violation is about 0.15.
  const CondensedQp qp = condense(bundled("four_mass_oscillator"));
  Vector x(8);
  x << 0.617292, -1.71177, 2.64428, 2.58456, -1.9706, 2.65922, -2.39775, 1.85233;
  try {
    solve_qp(qp, x);
    FAIL("expected infeasible");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::infeasible);
  }
}
