#include "stifflab/synth.hpp"

#include <algorithm>
#include <cmath>

#include "stifflab/damped.hpp"
#include "stifflab/errors.hpp"
#include "stifflab/ode.hpp"
#include "stifflab/spectrum.hpp"

namespace stifflab {

double StiffnessSynthesis::r(double t) const { return decay.integral(system.t0, t); }
double StiffnessSynthesis::dr(double t) const { return decay.eval(t); }
double StiffnessSynthesis::ddr(double t) const { return -system.b.eval(t) * decay.eval(t); }

StiffnessSynthesis synth_stiffness_from_damping(const CoefficientFn& b, double t0) {
  if (!b.domain().contains(t0)) throw DomainError("damping is not defined at t0=" + format_double(t0));
  return {SystemSpec{b, CoefficientFn::neg_exp2int(b, t0), t0}, decay_factor(b, t0)};
}

double verify_closed_form(const StiffnessSynthesis& s, int sign, std::vector<double> times) {
  if (sign != 1 && sign != -1) throw InvalidArgument("sign must be +1 or -1");
  if (times.empty()) times = Grid{s.system.t0, s.system.t0 + 100.0}.times();
  double worst = 0.0;
  for (double t : times) {
    const double phi = std::exp(sign * s.r(t));
    const double dr = s.dr(t);
    const double d1 = sign * dr * phi;
    const double d2 = (dr * dr + sign * s.ddr(t)) * phi;
    const double res = d2 + s.system.b.eval(t) * d1 + s.system.k.eval(t) * phi;
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

CoefficientFn synth_damping_from_stiffness(const CoefficientFn& k, double alpha) {
  if (!(alpha > 1)) throw InvalidArgument("alpha must exceed 1, got " + format_double(alpha));
  if (!k.domain().contains(0.0)) throw DomainError("stiffness is not defined at t0=0");
  const CoefficientFn quad = CoefficientFn::power_law(1, alpha, 2);
  const CoefficientFn b = 2.0 * (CoefficientFn::abs(k) * quad) + CoefficientFn::power_law(2, alpha, -1);
  return b.simplified();
}

json CounterexampleReport::to_json() const {
  return {{"epsilon", epsilon},
          {"alpha", alpha},
          {"system", system.to_json()},
          {"supEigRate", sup_eig_rate},
          {"supRateTime", sup_rate_time},
          {"rateBound", rate_bound},
          {"boundBelowEpsilon", rate_bound < epsilon},
          {"rateWithinBound", sup_eig_rate <= rate_bound + kDecisionTol},
          {"stabilityVerdict", stability_verdict.to_json()},
          {"frozenSaddleEverywhere", frozen_saddle_everywhere},
          {"auditPoints", audit_points}};
}

CounterexampleReport synth_counterexample(double epsilon) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be positive");
  CounterexampleReport rep;
  rep.epsilon = epsilon;
  const double alpha_sq = std::max(1.0, 5.0 / epsilon);
  rep.alpha = std::sqrt(alpha_sq);
  rep.rate_bound = 19.0 / (4.0 * alpha_sq);
  rep.system = SystemSpec{CoefficientFn::power_law(4, rep.alpha, -1),
                          CoefficientFn::power_law(-1, rep.alpha, -3), 0.0};
  constexpr int n = 4096;
  constexpr double t_max = 1e4;
  rep.audit_points = n;
  rep.frozen_saddle_everywhere = true;
  for (int i = 0; i < n; ++i) {
    const double t = i == n - 1 ? t_max : std::pow(1.0 + t_max, static_cast<double>(i) / (n - 1)) - 1.0;
    const auto [dm, dp] = eigenvalue_rates(rep.system, t);
    const double rate = std::max(std::abs(dm), std::abs(dp));
    if (rate > rep.sup_eig_rate) {
      rep.sup_eig_rate = rate;
      rep.sup_rate_time = t;
    }
    if (!(eigenvalues(rep.system, t).lambda_plus.real() > 0)) rep.frozen_saddle_everywhere = false;
  }
  rep.stability_verdict = check_fixed_point_stability(rep.system, Grid{0.0, t_max});
  return rep;
}

Linearization linearize(const NonlinearRHS& f, const std::vector<double>& times) {
  if (times.size() < 4) throw InvalidArgument("linearize needs at least 4 grid times");
  constexpr double h = 1e-6;
  Linearization out;
  std::vector<double> bs, ks;
  for (double t : times) {
    const double f0 = f(t, 0.0, 0.0);
    if (!(std::abs(f0) <= 1e-12)) {
      throw InvalidArgument("not an equilibrium: f(" + format_double(t) + ", 0, 0) = " + format_double(f0));
    }
    const auto richardson = [&](auto&& g) {
      const double coarse = (g(h) - g(-h)) / (2 * h);
      const double fine = (g(h / 2) - g(-h / 2)) / h;
      const double value = (4 * fine - coarse) / 3;
      out.derivative_error = std::max(out.derivative_error, std::abs(value - fine));
      return value;
    };
    const double f2 = richardson([&](double d) { return f(t, d, 0.0); });
    const double f3 = richardson([&](double d) { return f(t, 0.0, d); });
    bs.push_back(f2 == 0.0 ? 0.0 : -f2);
    ks.push_back(f3 == 0.0 ? 0.0 : -f3);
  }
  out.system = SystemSpec{CoefficientFn::tabulated(times, bs), CoefficientFn::tabulated(times, ks), times.front()};
  return out;
}

}  // namespace stifflab
