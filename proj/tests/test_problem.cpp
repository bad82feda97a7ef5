#include <sstream>

#include "etmpc/error.hpp"
#include "helpers.hpp"

using namespace etmpc;
using namespace etmpc::testing;

namespace {

bool has_violation(const ValidationReport& r, const std::string& needle) {
  for (const auto& v : r.violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

Matrix four_mass_continuous_a() {
  Matrix fc(4, 4);
  fc << 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2;
  Matrix a = Matrix::Zero(8, 8);
  a.topRightCorner(4, 4).setIdentity();
  a.bottomLeftCorner(4, 4) = -fc;
  return a;
}

Matrix four_mass_continuous_b() {
  Matrix fu(4, 3);
  fu << 1, 0, 1, 0, 1, 0, -1, 0, 0, 0, -1, -1;
  Matrix b = Matrix::Zero(8, 3);
  b.bottomRows(4) = fu;
  return b;
}

/// Classical RK4 on xdot = A x + B u with u held constant.
Vector rk4(const Matrix& a, const Matrix& b, const Vector& x0, const Vector& u, double t, int steps) {
  Vector x = x0;
  const double h = t / steps;
  auto f = [&](const Vector& s) -> Vector { return a * s + b * u; };
  for (int i = 0; i < steps; ++i) {
    const Vector k1 = f(x), k2 = f(x + 0.5 * h * k1), k3 = f(x + 0.5 * h * k2), k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

}  // namespace

TEST_CASE("validate accepts the bundled problems") {
  CHECK(validate(bundled("four_mass_oscillator")).ok());
  CHECK(validate(bundled("double_integrator")).ok());
}

TEST_CASE("validate reports a zero input matrix as not stabilizable") {
  MpcProblem p = scalar_chain();
  p.A = Matrix::Identity(2, 2);
  p.B = Matrix::Zero(2, 1);
  p.Q = Matrix::Identity(2, 2);
  p.P.reset();
  p.x_lo = Vector::Constant(2, -1);
  p.x_hi = Vector::Constant(2, 1);
  const auto r = validate(p);
  CHECK_FALSE(r.ok());
  CHECK(has_violation(r, "stabilizable"));
}

TEST_CASE("stabilizability: a double integrator missing one input channel") {
  Matrix a = Matrix::Identity(2, 2);
  Matrix b(2, 1);
  b << 0, 1;
  // Eigenvalue 1 has eigenvector e1 that B cannot reach.
  CHECK_FALSE(is_stabilizable(a, b));
  Matrix a2(2, 2);
  a2 << 1, 1, 0, 1;
  CHECK(is_stabilizable(a2, b));
}

TEST_CASE("validate rejects a horizon of one") {
  MpcProblem p = scalar_chain();
  p.horizon = 1;
  CHECK(has_violation(validate(p), "horizon"));
}

TEST_CASE("validate rejects boxes that do not contain the origin in their interior") {
  MpcProblem p = scalar_chain();
  p.u_lo(0) = 0.0;
  CHECK_FALSE(validate(p).ok());
  p = scalar_chain();
  p.x_hi(0) = -1.0;
  CHECK_FALSE(validate(p).ok());
}

TEST_CASE("validate rejects indefinite weights") {
  MpcProblem p = scalar_chain();
  p.R(0, 0) = 0.0;
  CHECK_FALSE(validate(p).ok());
  p = scalar_chain();
  p.Q(0, 0) = -1.0;
  CHECK_FALSE(validate(p).ok());
  p = scalar_chain();
  p.P = Matrix::Constant(1, 1, -2.0);
  CHECK_FALSE(validate(p).ok());
}

TEST_CASE("DARE: A = 0 gives P = Q") {
  const Matrix P = solve_dare(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  CHECK(P(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("DARE: scalar A = B = Q = R = 1 gives the golden ratio") {
  // P = P - P^2/(1+P) + 1  <=>  P^2 - P - 1 = 0.
  const Matrix P = solve_dare(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  CHECK(std::abs(P(0, 0) - golden) < 1e-9);
  CHECK(std::abs(golden * golden - golden - 1.0) < 1e-14);
}

TEST_CASE("DARE: four-mass oscillator residual and definiteness") {
  const MpcProblem p = bundled("four_mass_oscillator");
  const Matrix P = solve_dare(p.A, p.B, p.Q, p.R);
  CHECK(dare_residual(P, p.A, p.B, p.Q, p.R) <= 1e-10);
  CHECK(max_abs(P - P.transpose()) <= 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("DARE: iteration cap surfaces as divergence") {
  DareOptions opt;
  opt.max_iterations = 2;
  CHECK_THROWS_AS(solve_dare(Matrix::Constant(1, 1, 2.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), opt),
                  Error);
}

TEST_CASE("ZOH of a pure integrator") {
  const auto [A, B] = discretize_zoh(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 0.5);
  CHECK(max_abs(A - Matrix::Identity(2, 2)) < 1e-15);
  CHECK(max_abs(B - 0.5 * Matrix::Identity(2, 2)) < 1e-15);
}

TEST_CASE("ZOH of a scalar system matches the closed form") {
  for (double a : {-2.0, -0.3, 0.7, 1.5}) {
    const double ts = 0.5;
    const auto [A, B] = discretize_zoh(Matrix::Constant(1, 1, a), Matrix::Ones(1, 1), ts);
    CHECK(std::abs(A(0, 0) - std::exp(a * ts)) < 1e-13);
    CHECK(std::abs(B(0, 0) - (std::exp(a * ts) - 1.0) / a) < 1e-13);
  }
}

TEST_CASE("ZOH of the four-mass oscillator matches a fine-step RK4 step response") {
  const Matrix ac = four_mass_continuous_a(), bc = four_mass_continuous_b();
  const auto [A, B] = discretize_zoh(ac, bc, 0.5);
  const MpcProblem p = bundled("four_mass_oscillator");
  CHECK(max_abs(p.A - A) < 1e-14);
  CHECK(max_abs(p.B - B) < 1e-14);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x0 = Vector::NullaryExpr(8, [&] { return d(rng); });
    const Vector u = Vector::NullaryExpr(3, [&] { return d(rng); });
    const Vector fine = rk4(ac, bc, x0, u, 0.5, 2000);
    CHECK((A * x0 + B * u - fine).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("condense: two-step scalar chain against the hand-expanded cost") {
  // J = x0^2 + u0^2 + (x0+u0)^2 + u1^2 + (x0+u0+u1)^2
  //   = 1/2 U'[6 2; 2 4]U + x0 [4 2] U + 3 x0^2
  const CondensedQp qp = condense(scalar_chain());
  Matrix H(2, 2);
  H << 6, 2, 2, 4;
  Matrix F(1, 2);
  F << 4, 2;
  CHECK(max_abs(qp.H - H) < 1e-14);
  CHECK(max_abs(qp.F - F) < 1e-14);
  CHECK(std::abs(qp.state_cost(0, 0) - 3.0) < 1e-14);
  CHECK(qp.q() == 10);

  // Rows: u upper (2), u lower (2), x upper k=0,1, x lower k=0,1, terminal upper, terminal lower.
  Matrix G(10, 2);
  G << 1, 0, 0, 1, -1, 0, 0, -1, 0, 0, 1, 0, 0, 0, -1, 0, 1, 1, -1, -1;
  Matrix E(10, 1);
  E << 0, 0, 0, 0, -1, -1, 1, 1, -1, 1;
  Vector w(10);
  w << 1, 1, 1, 1, 4, 4, 4, 4, 4, 4;
  CHECK(max_abs(qp.G - G) < 1e-14);
  CHECK(max_abs(qp.E - E) < 1e-14);
  CHECK(max_abs(qp.w - w) < 1e-14);
  CHECK(max_abs(qp.S - (qp.E + qp.G * qp.Hinv * qp.F.transpose())) < 1e-13);
}

TEST_CASE("condense: zero dynamics leave the state rows free of U") {
  MpcProblem p = scalar_chain();
  p.A = Matrix::Zero(1, 1);
  p.B = Matrix::Zero(1, 1);
  const CondensedQp qp = condense(p);
  const auto mN = qp.dims.mN();
  CHECK(max_abs(qp.G.bottomRows(qp.q() - 2 * mN)) == 0.0);
}

TEST_CASE("condense: four-mass oscillator has q = 236") {
  const CondensedQp qp = condense(bundled("four_mass_oscillator"));
  CHECK(qp.q() == 2 * 3 * 10 + 2 * 8 * 10 + 2 * 8);
  CHECK(qp.q() == 236);
  CHECK(box_constraint_count(8, 3, 10) == 236);
  CHECK(max_abs(qp.H - qp.H.transpose()) == 0.0);
}

TEST_CASE("condensation soundness on random small instances") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1);
  int checked = 0;
  for (int n = 1; n <= 3; ++n)
    for (int m = 1; m <= 3; ++m)
      for (int N = 2; N <= 3; ++N) {
        const MpcProblem p = random_problem(rng, n, m, N);
        const CondensedQp qp = condense(p);
        CHECK(qp.q() == 2 * m * N + 2 * n * N + 2 * n);
        CHECK(max_abs(qp.H - qp.H.transpose()) == 0.0);
        const Matrix P = terminal_weight(p);
        for (int trial = 0; trial < 5; ++trial) {
          const Vector x = Vector::NullaryExpr(n, [&] { return g(rng); });
          const Vector U = Vector::NullaryExpr(m * N, [&] { return g(rng); });
          const auto xs = rollout(p, x, U);
          double J = xs.back().dot(P * xs.back());
          for (int k = 0; k < N; ++k) {
            const Vector uk = U.segment(k * m, m);
            J += xs[static_cast<std::size_t>(k)].dot(p.Q * xs[static_cast<std::size_t>(k)]) + uk.dot(p.R * uk);
          }
          const double condensed = 0.5 * U.dot(qp.H * U) + x.dot(qp.F * U) + x.dot(qp.state_cost * x);
          CHECK(std::abs(J - condensed) <= 1e-10 * std::max(1.0, std::abs(J)));
          ++checked;
        }
      }
  CHECK(checked == 90);
}

TEST_CASE("constraint soundness: GU - Ex <= w iff the simulated trajectory respects every box") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ux(-1.4, 1.4), xx(-3.5, 3.5);
  int agree = 0, feasible = 0;
  for (int n = 1; n <= 3; ++n)
    for (int m = 1; m <= 2; ++m) {
      const MpcProblem p = random_problem(rng, n, m, 3);
      const CondensedQp qp = condense(p);
      for (int trial = 0; trial < 300; ++trial) {
        const Vector x = Vector::NullaryExpr(n, [&] { return xx(rng); });
        const Vector U = Vector::NullaryExpr(m * 3, [&] { return ux(rng); });
        const bool rows_ok = (qp.G * U - qp.E * x - qp.w).maxCoeff() <= 0.0;
        const auto xs = rollout(p, x, U);
        bool direct = true;
        for (int k = 0; k < 3; ++k) {
          const Vector uk = U.segment(k * m, m);
          direct = direct && (uk.array() <= p.u_hi.array()).all() && (uk.array() >= p.u_lo.array()).all();
          direct = direct && (xs[static_cast<std::size_t>(k)].array() <= p.x_hi.array()).all() &&
                   (xs[static_cast<std::size_t>(k)].array() >= p.x_lo.array()).all();
        }
        direct = direct && (xs.back().array() <= p.terminal_hi().array()).all() &&
                 (xs.back().array() >= p.terminal_lo().array()).all();
        agree += rows_ok == direct;
        feasible += direct;
      }
    }
  CHECK(agree == 6 * 300);
  CHECK(feasible > 0);
}

TEST_CASE("problem files: inline definition with continuous-time matrices") {
  std::istringstream in(R"(
    name tiny   # comment
    horizon 3
    ts 0.5
    A zeros 1 1
    B 1 1 1
    Q diag 1 2
    R identity 1
    x_lo 1 fill -2
    x_hi 1 2
    u_lo 1 -1
    u_hi 1 fill 1
  )");
  const MpcProblem p = parse_problem(in);
  CHECK(p.name == "tiny");
  CHECK(p.horizon == 3);
  CHECK(p.A(0, 0) == doctest::Approx(1.0));
  CHECK(p.B(0, 0) == doctest::Approx(0.5));
  CHECK(p.Q(0, 0) == 2.0);
  CHECK_FALSE(p.P.has_value());
  CHECK(p.x_hi(0) == 2.0);
}

TEST_CASE("problem files: errors name the problem") {
  std::istringstream bad("name x\nhorizon two\n");
  CHECK_THROWS_AS(parse_problem(bad), Error);
  std::istringstream unknown("name x\nbogus 1\n");
  CHECK_THROWS_AS(parse_problem(unknown), Error);
  std::istringstream truncated("A 2 2 1 0 0\n");
  CHECK_THROWS_AS(parse_problem(truncated), Error);
  CHECK_THROWS_AS(resolve_problem_path("no_such_problem"), Error);
}
