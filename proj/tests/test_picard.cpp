#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stifflab/certificates.hpp"
#include "stifflab/errors.hpp"
#include "stifflab/fixtures.hpp"
#include "stifflab/picard.hpp"

using namespace stifflab;
using CF = CoefficientFn;

namespace {

SystemSpec sys(CF b, CF k, double t0 = 0.0) { return SystemSpec{std::move(b), std::move(k), t0}; }

GridFunction constant_on(const std::vector<double>& g, double c) {
  return {g, std::vector<double>(g.size(), c)};
}

}  // namespace

TEST_SUITE("picard") {
  TEST_CASE("apply_F examples") {
    const auto s = sys(CF::power_law(2, 1, -1), CF::power_law(-1, 1, -4));
    const auto g = picard_grid(s);
    auto img = apply_F(s, constant_on(g, 0), {0, 0});
    for (double v : img.value.values) CHECK(v == 0.0);

    // F[0] with data (0, 1) is int (s+1)^{-2} = 1 - 1/(t+1).
    img = apply_F(s, constant_on(g, 0), {0, 1});
    for (std::size_t i = 0; i < g.size(); i += 97) {
      CHECK(img.value.values[i] == doctest::Approx(1 - 1 / (g[i] + 1)).epsilon(1e-8));
      CHECK(img.derivative.values[i] == doctest::Approx(std::pow(g[i] + 1, -2)).epsilon(1e-12));
    }

    const auto free = sys(CF::power_law(2, 1, -1), CF::constant(0));
    const auto gf = picard_grid(free);
    GridFunction wiggly{gf, {}};
    for (double t : gf) wiggly.values.push_back(std::sin(t));
    img = apply_F(free, wiggly, {1, 0});
    for (double v : img.value.values) CHECK(v == 1.0);
  }

  TEST_CASE("F of the exact solution returns it") {
    // u = e^{1/(t+1)} solves b = 2/(t+1), k = -1/(t+1)^4.
    const auto s = sys(CF::power_law(2, 1, -1), CF::power_law(-1, 1, -4));
    const auto g = picard_grid(s);
    GridFunction u{g, {}};
    for (double t : g) u.values.push_back(std::exp(1 / (t + 1)));
    const double e = std::exp(1.0);
    const auto img = apply_F(s, u, {e, -e});
    CHECK(img.value.sup_distance(u) < 1e-8);
  }

  TEST_CASE("picard matches the closed form and the ODE solver") {
    const auto s = sys(CF::power_law(2, 1, -1), CF::power_law(-1, 1, -4));
    std::vector<double> g = Grid{0, 50, 4001}.times();
    const double e = std::exp(1.0);
    const auto r = picard_solve(s, {e, -e}, g, 1e-12);
    const auto tr = solve_ivp(s, {e, -e}, 50);
    double worst = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      worst = std::max(worst, std::abs(r.solution.values[i] - tr.eval(g[i]).u));
      CHECK(r.solution.values[i] == doctest::Approx(std::exp(1 / (g[i] + 1))).epsilon(1e-8));
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("contraction on the special damping family") {
    for (double alpha : {1.0, 1.5, 2.0, 10.0}) {
      const auto s = sys(CF::power_law(4, alpha, -1), CF::power_law(-1, alpha, -3));
      const auto r = picard_solve(s, {0.01, 0.01}, picard_grid(s), 1e-12);
      CAPTURE(alpha);
      CHECK(!r.contraction_ratios.empty());
      for (double q : r.contraction_ratios) CHECK(q < 0.55);
    }
  }

  TEST_CASE("trivial kernel converges at once") {
    const auto s = sys(CF::power_law(2, 1, -1), CF::constant(0));
    const auto r = picard_solve(s, {1, 0}, picard_grid(s), 1e-10);
    CHECK(r.iterations == 1);
    for (double v : r.solution.values) CHECK(v == 1.0);
    CHECK(r.residual_history == std::vector<double>{0.0});
  }

  TEST_CASE("iterates keep the initial data and are fixed points") {
    const auto s = sys(CF::power_law(4, 2, -1), CF::power_law(-1, 2, -3));
    const State ic{0.02, -0.03};
    const auto g = picard_grid(s);
    const double tol = 1e-10;
    const auto r = picard_solve(s, ic, g, tol);
    CHECK(r.solution.values.front() == ic.u);
    CHECK(r.derivative.values.front() == ic.v);
    const auto img = apply_F(s, r.solution, ic);
    CHECK(img.value.sup_distance(r.solution) < 2 * tol);
    CHECK(img.derivative.sup_distance(r.derivative) < 2 * tol);
  }

  TEST_CASE("agreement with the solver on fixtures certified by the fixed-point check") {
    for (const auto& fx : builtin_fixtures()) {
      if (fx.system.t0 != 0.0) continue;
      const Verdict v = check_fixed_point_stability(fx.system, Grid{fx.system.t0, fx.window_end});
      if (v.status != CertStatus::holds) continue;
      const auto g = picard_grid(fx.system);
      const double tol = 1e-10;
      const auto r = picard_solve(fx.system, fx.ic, g, tol);
      SolveOptions opt;
      opt.tol = {1e-12, 1e-15};
      const auto tr = solve_ivp(fx.system, fx.ic, g.back(), opt);
      double worst = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        worst = std::max(worst, std::abs(r.solution.values[i] - tr.eval(g[i]).u));
      }
      CAPTURE(fx.name);
      CHECK(worst < std::max(10 * tol, 1e-5));
      for (double q : r.contraction_ratios) CHECK(q < 0.55);
    }
  }

  TEST_CASE("non-convergence reports the last ratio") {
    const auto s = sys(CF::constant(0.1), CF::constant(-4));
    try {
      picard_solve(s, {1, 0}, Grid{0, 20, 400}.times(), 1e-12, 5);
      FAIL("expected SolverError");
    } catch (const SolverError& e) {
      CHECK(std::string(e.what()).find("contraction ratio") != std::string::npos);
    }
  }

  TEST_CASE("grid function interpolation and export") {
    GridFunction f{{0, 1, 2, 3, 4}, {0, 1, 8, 27, 64}};
    CHECK(f.eval(1.5) == doctest::Approx(3.375));
    CHECK(f.eval(3.5) == doctest::Approx(42.875));
    CHECK_THROWS_AS(f.eval(5), DomainError);

    const auto s = sys(CF::power_law(2, 1, -1), CF::constant(0));
    const auto r = picard_solve(s, {1, 0}, Grid{0, 1, 5}.times(), 1e-10);
    std::ostringstream os;
    r.write_csv(os);
    CHECK(os.str().rfind("t,u,v\n0,1,0\n", 0) == 0);
    CHECK(r.to_json()["iterations"] == 1);
  }

  TEST_CASE("picard grid horizon") {
    // e^{-B} = (t+1)^{-4} drops below 1e-8 at t = 99.
    auto g = picard_grid(sys(CF::power_law(4, 1, -1), CF::constant(0)));
    CHECK(g.back() == doctest::Approx(99.0).epsilon(1e-9));
    g = picard_grid(sys(CF::power_law(1, 1, -1), CF::constant(0)));
    CHECK(g.back() == 100.0);
    g = picard_grid(sys(CF::constant(1), CF::constant(0)));
    CHECK(g.back() == doctest::Approx(8 * std::log(10.0)).epsilon(1e-9));
    CHECK(g.front() == 0.0);
  }

  TEST_CASE("B_eps membership gates") {
    const auto s = sys(CF::power_law(2, 1, -1), CF::power_law(-1, 1, -4));
    const double eps = 0.4;
    auto m = b_epsilon_membership(s, {eps / 8, eps / 8}, eps);
    CHECK(m.defined);
    CHECK(m.integral == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(m.u1_bound == doctest::Approx(eps / 4).epsilon(1e-3));
    CHECK(m.member);
    m = b_epsilon_membership(s, {eps, 0}, eps);
    CHECK(!m.member);
    CHECK(!m.u0_gate);
    m = b_epsilon_membership(sys(CF::power_law(1, 1, -1), CF::power_law(-1, 1, -2)), {0.01, 0.01}, eps);
    CHECK(!m.defined);
    CHECK(!m.member);
    CHECK(m.to_json()["integral"].is_null());

    const auto r = picard_solve(s, {eps / 8, eps / 8}, picard_grid(s), 1e-10);
    m = b_epsilon_membership(s, {eps / 8, eps / 8}, eps, &r);
    REQUIRE(m.sup_u.has_value());
    CHECK(*m.sup_u <= eps);
    CHECK(m.member);
    CHECK(m.horizon == r.solution.times.back());
  }
}
