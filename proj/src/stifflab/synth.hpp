#pragma once

// Constructive recipes: stiffness from damping, damping from stiffness, the
// frozen-coefficient counterexample and linearisation of u'' = f(t, u', u).

#include <functional>
#include <vector>

#include "stifflab/certificates.hpp"

namespace stifflab {

/// k = -exp(-2 int b) together with r(t) = int_{t0}^{t} exp(-int b), so that
/// e^{r} and e^{-r} solve u'' + b u' + k u = 0.
struct StiffnessSynthesis {
  SystemSpec system;
  CoefficientFn decay;  // r' = exp(-int_{t0} b)

  double r(double t) const;
  double dr(double t) const;
  double ddr(double t) const;  // -b r'
};

StiffnessSynthesis synth_stiffness_from_damping(const CoefficientFn& b, double t0);

/// max |phi'' + b phi' + k phi| for phi = exp(sign * r) over `times`
/// (default: 2048-point grid on [t0, t0 + 100]).
double verify_closed_form(const StiffnessSynthesis& s, int sign,
                          std::vector<double> times = {});

/// b = 2|k|(t+alpha)^2 + 2/(t+alpha), simplified; requires alpha > 1.
CoefficientFn synth_damping_from_stiffness(const CoefficientFn& k, double alpha);

struct CounterexampleReport {
  double epsilon = 0.0;
  double alpha = 0.0;
  SystemSpec system;
  double sup_eig_rate = 0.0;
  double sup_rate_time = 0.0;
  double rate_bound = 0.0;  // 19/(4 alpha^2)
  Verdict stability_verdict;
  bool frozen_saddle_everywhere = false;
  int audit_points = 0;

  json to_json() const;
};

/// b = 4/(t+alpha), k = -1/(t+alpha)^3 with alpha = max(1, sqrt(5/eps)),
/// audited on 4096 log-spaced points of [0, 1e4].
CounterexampleReport synth_counterexample(double epsilon);

/// Acceleration f(t, v, u) with v = u'.
using NonlinearRHS = std::function<double(double t, double v, double u)>;

struct Linearization {
  SystemSpec system;  // tabulated b = -df/dv, k = -df/du on the grid
  /// Largest Richardson error estimate of the two partial derivatives.
  double derivative_error = 0.0;
};

/// Central differences with step 1e-6 and one Richardson refinement at
/// (t, 0, 0). Throws InvalidArgument if f(t, 0, 0) != 0 (tolerance 1e-12).
Linearization linearize(const NonlinearRHS& f, const std::vector<double>& times);

}  // namespace stifflab
