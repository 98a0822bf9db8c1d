#include "stifflab/fixtures.hpp"

#include <cmath>

#include "stifflab/errors.hpp"

namespace stifflab {

namespace {

using CF = CoefficientFn;

Fixture special_b(const std::string& name, double alpha) {
  return {name,
          "b = 4/(t+a), k = -1/(t+a)^3 with a = " + format_double(alpha),
          {CF::power_law(4, alpha, -1), CF::power_law(-1, alpha, -3), 0.0},
          100.0,
          {0.01, 0.0},
          100.0};
}

Fixture exp_damping(const std::string& name, double n) {
  return {name,
          "b = e^{" + format_double(n) + " t}, k = -1",
          {CF::exponential(1, n), CF::constant(-1), 0.0},
          20.0,
          {1.0, 0.1},
          20.0};
}

Fixture constant(const std::string& name, double b, double k, double audit_end) {
  return {name,
          "constant b = " + format_double(b) + ", k = " + format_double(k),
          {CF::constant(b), CF::constant(k), 0.0},
          50.0,
          {1.0, 0.5},
          audit_end};
}

std::vector<Fixture> build() {
  std::vector<Fixture> f;
  const double e = std::exp(1.0);
  f.push_back({"stable_inverse_exp", "b = 2/(t+1), k = -1/(t+1)^4; u = e^{1/(t+1)}",
               {CF::power_law(2, 1, -1), CF::power_law(-1, 1, -4), 0.0}, 100.0, {e, -e}, 100.0});
  f.push_back({"unstable_linear", "b = 1/(t+1), k = -1/(t+1)^2; u = t + 1",
               {CF::power_law(1, 1, -1), CF::power_law(-1, 1, -2), 0.0}, 100.0, {1, 1}, 100.0});
  f.push_back(special_b("special_b_1.5", 1.5));
  f.push_back(special_b("special_b_2", 2.0));
  f.push_back(special_b("special_b_10", 10.0));
  f.push_back(special_b("special_b_sqrt50", std::sqrt(50.0)));
  f.push_back(exp_damping("exp_damping_0.25", 0.25));
  f.push_back(exp_damping("exp_damping_0.5", 0.5));
  f.push_back(exp_damping("exp_damping_1", 1.0));
  f.push_back(exp_damping("exp_damping_2", 2.0));
  f.push_back({"neg_bk", "b = -1/t, k = -1/t from t0 = 1",
               {CF::power_law(-1, 0, -1), CF::power_law(-1, 0, -1), 1.0}, 200.0, {1, 1}, 50.0});
  f.push_back({"chetaev_decay", "b = e^{-t}/4, k = -(1 + e^{-t})",
               {CF::exponential(0.25, -1), CF::sum({CF::constant(-1), CF::exponential(-1, -1)}), 0.0},
               50.0, {0.1, 0.0}, 3.0});
  f.push_back(constant("saddle_damped", 1, -1, 10));
  f.push_back(constant("saddle_antidamped", -1, -1, 10));
  f.push_back(constant("zero_system", 0, 0, 10));
  f.push_back(constant("damped_oscillator", 0.5, 1, 40));
  f.push_back(constant("critical_damping", 2, 1, 20));
  f.push_back(constant("pure_saddle", 0, -1, 10));
  f.push_back(constant("overdamped_saddle", 2, -0.5, 10));
  f.push_back({"const_b_decaying_k", "b = 4, k = -2/(t+1)",
               {CF::constant(4), CF::power_law(-2, 1, -1), 0.0}, 50.0, {1, 0}, 20.0});
  f.push_back({"const_b_slow_k", "b = 10, k = -1/(t+1)",
               {CF::constant(10), CF::power_law(-1, 1, -1), 0.0}, 100.0, {1, 0}, 20.0});
  f.push_back({"sublinear_damping", "b = (t+1)^{-1/2}, k = -e^{-t}",
               {CF::power_law(1, 1, -0.5), CF::exponential(-1, -1), 0.0}, 100.0, {1, 0}, 30.0});
  f.push_back({"stiffening_oscillator", "b = 1, k = 1 + t/10",
               {CF::constant(1), CF::sum({CF::constant(0.9), CF::power_law(0.1, 1, 1)}), 0.0}, 50.0,
               {1, 0}, 30.0});
  {
    std::vector<double> knots, values;
    for (int i = 0; i <= 400; ++i) {
      const double t = 100.0 * i / 400;
      knots.push_back(t);
      values.push_back(2.0 / (t + 1));
    }
    f.push_back({"tabulated_inverse_exp", "tabulated b = 2/(t+1) on 401 knots, k = -1/(t+1)^4",
                 {CF::tabulated(knots, values), CF::power_law(-1, 1, -4), 0.0}, 100.0, {e, -e}, 100.0});
  }
  return f;
}

}  // namespace

const std::vector<Fixture>& builtin_fixtures() {
  static const std::vector<Fixture> fixtures = build();
  return fixtures;
}

const Fixture& find_fixture(const std::string& name) {
  for (const auto& f : builtin_fixtures()) {
    if (f.name == name) return f;
  }
  throw InvalidArgument("unknown fixture " + name);
}

}  // namespace stifflab
