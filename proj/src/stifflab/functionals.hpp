#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stifflab/ode.hpp"

namespace stifflab {

enum class FunctionalKind { E_lyapunov, E_const_damping, V_chetaev };

std::string to_string(FunctionalKind k);
FunctionalKind functional_from_string(const std::string& name);

/// E = e^{1/b+k} u^2 + u'^2, E = -k u^2 + u'^2 or V = u^2 + u'^2 / k.
double functional_value(const SystemSpec& system, FunctionalKind kind, double t, State s);
/// The analytic derivative along solutions of the ODE.
double functional_derivative(const SystemSpec& system, FunctionalKind kind, double t, State s);

struct MonotonicityReport {
  FunctionalKind kind;
  std::vector<double> times;
  std::vector<double> values;
  /// max over samples of |analytic - centered difference| / max(1, |terms of F|, |F'|).
  double derivative_identity_residual = 0.0;
  bool non_increasing = true;
  bool non_decreasing = true;
  double step = 0.0;

  json to_json(bool include_samples = false) const;
};

/// Samples the functional at spacing `step` on the trajectory and compares the
/// analytic derivative with centered differences of the dense output.
/// `step` <= 0 selects max((t_end - t0) / 5e5, 1e-5).
MonotonicityReport audit_functional(const SystemSpec& system, const Trajectory& trajectory,
                                    FunctionalKind kind, double step = 0.0);

/// Solve tolerances used for functional audits.
inline constexpr Tolerances kAuditTolerances{1e-12, 1e-14};

enum class ProbeVerdict { stable_evidence, unstable_evidence };
std::string to_string(ProbeVerdict v);

struct ProbeReport {
  double delta = 0.0;
  double epsilon = 0.0;
  double horizon = 0.0;
  int directions_tested = 0;
  double worst_sup_norm = 0.0;
  State worst_initial;
  ProbeVerdict verdict = ProbeVerdict::stable_evidence;
  std::optional<double> blowup_time;

  json to_json() const;
};

/// Corners of the max-norm delta-sphere followed by uniformly spaced angles
/// projected onto it; n >= 4.
std::vector<State> sphere_directions(double delta, int n);

/// Worst sup over [t0, horizon] of max(|u|, |u'|) from each initial point.
ProbeReport probe_points(const SystemSpec& system, const std::vector<State>& points, double epsilon,
                         double horizon);

ProbeReport probe_stability(const SystemSpec& system, double epsilon, double delta, double horizon,
                            int n_directions = 16);

}  // namespace stifflab
