#include <doctest.h>

#include <cmath>

#include "stifflab/errors.hpp"
#include "stifflab/fixtures.hpp"
#include "stifflab/functionals.hpp"

using namespace stifflab;
using CF = CoefficientFn;

namespace {

SystemSpec sys(CF b, CF k, double t0 = 0.0) { return SystemSpec{std::move(b), std::move(k), t0}; }

Trajectory audit_run(const SystemSpec& s, State ic, double t_end) {
  SolveOptions opt;
  opt.tol = kAuditTolerances;
  return solve_ivp(s, ic, t_end, opt);
}

bool applicable(const SystemSpec& s, FunctionalKind kind, double t_end) {
  for (int i = 0; i <= 200; ++i) {
    const double t = s.t0 + (t_end - s.t0) * i / 200;
    const double b = s.b.eval(t), k = s.k.eval(t);
    if (kind == FunctionalKind::E_lyapunov && !(b > 0)) return false;
    if (kind == FunctionalKind::E_const_damping && b == 0) return false;
    if (kind == FunctionalKind::V_chetaev && k == 0) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("functionals") {
  TEST_CASE("analytic derivative identities at a point") {
    // Along the exact solution u = t + 1 of b = 1/(t+1), k = -1/(t+1)^2:
    // V = (t+1)^2 - (t+1)^2 = 0, so V' = 0; E_const = 1 + 1 = 2 constant... only for that pair.
    const auto s = sys(CF::power_law(1, 1, -1), CF::power_law(-1, 1, -2));
    for (double t : {0.0, 1.0, 5.0}) {
      const State st{t + 1, 1};
      CHECK(functional_value(s, FunctionalKind::V_chetaev, t, st) == doctest::Approx(0.0).scale(1));
      // V' = -(k' + 2kb)/k^2 v^2 with k' = 2/(t+1)^3, 2kb = -2/(t+1)^3.
      CHECK(functional_derivative(s, FunctionalKind::V_chetaev, t, st) == doctest::Approx(0.0).scale(1));
      // E_const = u^2/(t+1)^2 + 1 = 2.
      CHECK(functional_value(s, FunctionalKind::E_const_damping, t, st) == doctest::Approx(2.0));
      CHECK(functional_derivative(s, FunctionalKind::E_const_damping, t, st) == doctest::Approx(0.0).scale(1));
    }
    CHECK(to_string(functional_from_string("V_chetaev")) == "V_chetaev");
    CHECK_THROWS_AS(functional_from_string("W"), InvalidArgument);
  }

  TEST_CASE("audit on exponential damping") {
    const auto s = sys(CF::exponential(1, 2), CF::constant(-1));
    const auto tr = audit_run(s, {0.1, 0}, 10);
    const auto rep = audit_functional(s, tr, FunctionalKind::E_lyapunov, 1e-3);
    CHECK(rep.derivative_identity_residual < 1e-6);
    CHECK(rep.values.size() == 10001);
    // E' = (e^q)' u^2 + 2 (e^q - k) u v - 2 b v^2; at t = 0 with v = 0 this is
    // -2 e^0 u^2 < 0, so E starts decreasing; the certificate's H2 failure
    // means monotonicity is not guaranteed and is not asserted.
    CHECK(rep.values[1] < rep.values[0]);
  }

  TEST_CASE("zero trajectory") {
    const auto s = sys(CF::constant(1), CF::constant(-1));
    const auto tr = audit_run(s, {0, 0}, 5);
    for (auto kind : {FunctionalKind::E_lyapunov, FunctionalKind::E_const_damping, FunctionalKind::V_chetaev}) {
      const auto rep = audit_functional(s, tr, kind);
      CHECK(rep.derivative_identity_residual == 0.0);
      for (double v : rep.values) CHECK(v == 0.0);
      CHECK(rep.non_increasing);
      CHECK(rep.non_decreasing);
    }
  }

  TEST_CASE("chetaev functional on the damped saddle") {
    const auto s = sys(CF::constant(1), CF::constant(-1));
    const auto tr = audit_run(s, {0.1, 0.2}, 10);
    CHECK(functional_value(s, FunctionalKind::V_chetaev, 0, {0.1, 0.2}) < 0);
    const auto rep = audit_functional(s, tr, FunctionalKind::V_chetaev);
    CHECK(rep.derivative_identity_residual < 1e-6);
  }

  TEST_CASE("division by zero is reported") {
    const auto s = sys(CF::constant(0), CF::constant(0));
    const auto tr = audit_run(s, {1, 0}, 1);
    CHECK_THROWS_AS(audit_functional(s, tr, FunctionalKind::V_chetaev), DomainError);
    CHECK_THROWS_AS(audit_functional(s, tr, FunctionalKind::E_lyapunov), DomainError);
  }

  TEST_CASE("residuals on fixtures are small and shrink at second order") {
    for (const auto& fx : builtin_fixtures()) {
      const auto tr = audit_run(fx.system, fx.ic, fx.audit_end);
      for (auto kind : {FunctionalKind::E_lyapunov, FunctionalKind::E_const_damping, FunctionalKind::V_chetaev}) {
        if (!applicable(fx.system, kind, tr.t_end())) continue;
        const auto rep = audit_functional(fx.system, tr, kind);
        CAPTURE(fx.name);
        CAPTURE(to_string(kind));
        CHECK(rep.derivative_identity_residual < 1e-6);
        // Second-order decay, on steps coarse enough for truncation to
        // dominate solver and rounding noise.
        const double span = tr.t_end() - tr.t_start();
        const auto coarse = audit_functional(fx.system, tr, kind, span / 4000);
        const auto fine = audit_functional(fx.system, tr, kind, span / 8000);
        CAPTURE(coarse.derivative_identity_residual);
        CAPTURE(fine.derivative_identity_residual);
        if (fine.derivative_identity_residual > 1e-7) {
          const double ratio = coarse.derivative_identity_residual / fine.derivative_identity_residual;
          CHECK(ratio > 3.0);
          CHECK(ratio < 5.0);
        }
      }
    }
  }

  TEST_CASE("probe examples") {
    auto rep = probe_stability(sys(CF::power_law(1, 1, -1), CF::power_law(-1, 1, -2)), 1.0, 1e-3, 1e4, 8);
    CHECK(rep.verdict == ProbeVerdict::unstable_evidence);
    CHECK(rep.worst_sup_norm > 1.0);
    CHECK(rep.directions_tested == 8);

    rep = probe_stability(sys(CF::power_law(2, 1, -1), CF::power_law(-1, 1, -4)), 0.1, 0.01, 1e4, 8);
    CHECK(rep.verdict == ProbeVerdict::stable_evidence);
    CHECK(rep.worst_sup_norm >= 0.01);
    CHECK(rep.worst_sup_norm < 0.1);

    rep = probe_points(sys(CF::constant(0), CF::constant(-1)), {{0, 0}}, 1.0, 100);
    CHECK(rep.worst_sup_norm == 0.0);
    CHECK(rep.verdict == ProbeVerdict::stable_evidence);

    rep = probe_stability(sys(CF::constant(0), CF::constant(-1)), 1.0, 1e-3, 100, 4);
    CHECK(rep.verdict == ProbeVerdict::unstable_evidence);
    CHECK(rep.blowup_time.has_value());

    CHECK_THROWS_AS(probe_stability(sys(CF::constant(1), CF::constant(1)), 0.1, 0.2, 10, 4), InvalidArgument);
    CHECK_THROWS_AS(probe_stability(sys(CF::constant(1), CF::constant(1)), 1, 0.2, 10, 3), InvalidArgument);
  }

  TEST_CASE("sphere directions lie on the max-norm sphere") {
    const auto dirs = sphere_directions(0.5, 12);
    CHECK(dirs.size() == 12);
    for (const auto& d : dirs) CHECK(std::max(std::abs(d.u), std::abs(d.v)) == doctest::Approx(0.5));
    CHECK(dirs[0].u == 0.5);
    CHECK(dirs[2].v == -0.5);
  }
}
