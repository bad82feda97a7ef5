#include "etmpc/error.hpp"
#include "etmpc/protocol.hpp"
#include "etmpc/region.hpp"
#include "etmpc/sim.hpp"
#include "helpers.hpp"

using namespace etmpc;
using namespace etmpc::testing;

TEST_CASE("empty active set: unconstrained law and one row per constraint") {
  const CondensedQp qp = condense(scalar_chain());
  for (BackendKind b : {BackendKind::naive_inverse, BackendKind::lu_pivoted}) {
    const Region r = build_region(qp, ActiveSet::empty(10), b);
    REQUIRE(r.K.rows() == 1);
    CHECK(r.K(0, 0) == doctest::Approx(-0.6).epsilon(1e-14));
    CHECK(r.b(0) == doctest::Approx(0.0));
    CHECK(r.T.rows() == 10);
    CHECK(contains(r, Vector::Constant(1, 1.0)));
    CHECK_FALSE(contains(r, Vector::Constant(1, 1.7)));
  }
}

TEST_CASE("scalar chain: region of the saturated input u0 = -1") {
  const CondensedQp qp = condense(scalar_chain());
  const ActiveSet a(10, {2});
  for (BackendKind b : {BackendKind::naive_inverse, BackendKind::lu_pivoted}) {
    const Region r = build_region(qp, a, b);
    CHECK(r.K(0, 0) == doctest::Approx(0.0));
    CHECK(r.b(0) == doctest::Approx(-1.0));
    // The multiplier of row 2 vanishes where the unconstrained input -0.6 x reaches -1.
    CHECK(contains(r, Vector::Constant(1, 1.7)));
    CHECK(contains(r, Vector::Constant(1, 3.0)));
    CHECK_FALSE(contains(r, Vector::Constant(1, 1.6)));
    CHECK(contains(r, Vector::Constant(1, 5.0 / 3.0)));  // facet point
    CHECK(evaluate_law(r, Vector::Constant(1, 2.5))(0) == doctest::Approx(-1.0));
  }
}

TEST_CASE("region law reproduces the QP optimizer and contains the state") {
  const MpcProblem p = bundled("four_mass_oscillator");
  const CondensedQp qp = condense(p);
  for (const auto& x : sample_feasible_states(p, qp, 60, 5)) {
    const QpSolution sol = solve_qp(qp, x);
    const Region r = build_region(qp, sol.active, BackendKind::lu_pivoted);
    CHECK(contains(r, x));
    CHECK((evaluate_law(r, x) - sol.u_star.head(qp.dims.m)).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(r.active == sol.active);
  }
}

TEST_CASE("backends agree within 1e-10 on 1000 state/active-set pairs") {
  int pairs = 0;
  for (const char* name : {"four_mass_oscillator", "double_integrator"}) {
    const MpcProblem p = bundled(name);
    const CondensedQp qp = condense(p);
    for (const auto& x : sample_feasible_states(p, qp, 500, 11)) {
      const QpSolution sol = solve_qp(qp, x);
      const Region a = build_region(qp, sol.active, BackendKind::naive_inverse);
      const Region b = build_region(qp, sol.active, BackendKind::lu_pivoted);
      const double scale = 1.0 + std::max(b.T.cwiseAbs().maxCoeff(), b.d.cwiseAbs().maxCoeff());
      CHECK(region_distance(a, b) <= 1e-10 * scale);
      ++pairs;
    }
  }
  CHECK(pairs == 1000);
}

TEST_CASE("supplied Phi reproduces the computed region, a perturbed one does not") {
  const MpcProblem p = bundled("four_mass_oscillator");
  const CondensedQp qp = condense(p);
  int checked = 0;
  for (const auto& x : sample_feasible_states(p, qp, 40, 6)) {
    const QpSolution sol = solve_qp(qp, x);
    if (sol.active.empty()) continue;
    const Matrix phi = compute_phi(qp, sol.active);
    const Region ref = build_region(qp, sol.active, BackendKind::lu_pivoted);
    const Region r = build_region_with_phi(qp, sol.active, phi);
    CHECK(region_distance(ref, r) <= 1e-9 * (1 + ref.T.cwiseAbs().maxCoeff()));
    Matrix bad = phi;
    bad(0, 0) *= 1.001;
    const Region rb = build_region_with_phi(qp, sol.active, bad);
    CHECK(region_distance(ref, rb) > 1e-9);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("phi of the wrong size is rejected") {
  const CondensedQp qp = condense(scalar_chain());
  CHECK_THROWS_AS(build_region_with_phi(qp, ActiveSet(10, {2}), Matrix::Identity(2, 2)), Error);
}

TEST_CASE("the law is continuous across neighbouring regions") {
  const CondensedQp qp = condense(scalar_chain());
  const Region inner = build_region(qp, ActiveSet::empty(10), BackendKind::lu_pivoted);
  const Region sat = build_region(qp, ActiveSet(10, {2}), BackendKind::lu_pivoted);
  const Vector facet = Vector::Constant(1, 5.0 / 3.0);
  CHECK(contains(inner, facet));
  CHECK(contains(sat, facet));
  CHECK((evaluate_law(inner, facet) - evaluate_law(sat, facet)).norm() <= 1e-12);
}

TEST_CASE("multiplier-sign rows come last in T") {
  const CondensedQp qp = condense(scalar_chain());
  const Region r = build_region(qp, ActiveSet(10, {2}), BackendKind::lu_pivoted);
  // Inactive rows: T_i = G_i K_U - E_i, d_i = w_i - G_i b_U; the last row is -lambda(x) <= 0.
  // lambda(x) vanishes at x = 5/3 and grows with x.
  const double t_last = r.T(9, 0), d_last = r.d(9);
  CHECK(t_last < 0);
  CHECK(d_last / t_last == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("dependent active rows are rank deficient") {
  const CondensedQp qp = condense(scalar_chain());
  // Rows 0 (u0 <= 1) and 2 (-u0 <= 1) are parallel.
  for (BackendKind b : {BackendKind::naive_inverse, BackendKind::lu_pivoted}) {
    try {
      build_region(qp, ActiveSet(10, {0, 2}), b);
      FAIL("expected rank_deficient");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::rank_deficient);
    }
  }
  // Row 4 is a zero row (stage-0 state bound).
  CHECK_THROWS_AS(build_region(qp, ActiveSet(10, {4}), BackendKind::lu_pivoted), Error);
}

TEST_CASE("too many active rows or mismatched q") {
  const CondensedQp qp = condense(scalar_chain());
  CHECK_THROWS_AS(build_region(qp, ActiveSet(10, {0, 1, 8}), BackendKind::lu_pivoted), Error);
  CHECK_THROWS_AS(build_region(qp, ActiveSet(9, {0}), BackendKind::lu_pivoted), Error);
}

TEST_CASE("backend names round-trip") {
  for (BackendKind b : {BackendKind::naive_inverse, BackendKind::lu_pivoted})
    CHECK(parse_backend(backend_name(b)) == b);
  CHECK_THROWS_AS(parse_backend("cholesky"), Error);
}
