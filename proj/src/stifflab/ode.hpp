#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stifflab/coeffs.hpp"

namespace stifflab {

struct Tolerances {
  double rel = 1e-9;
  double abs = 1e-12;
};

/// Displacement u and velocity v = u'.
struct State {
  double u = 0.0;
  double v = 0.0;
};

struct SolveOptions {
  Tolerances tol;
  /// Integration stops (without error) once |u| or |u'| exceeds this.
  double blowup_threshold = 1e12;
  /// Hand over to the implicit stage once explicit steps are stability-bound.
  bool stiff_switch = true;
  long max_steps = 20'000'000;
};

/// One accepted step together with its continuous extension.
struct Step {
  enum class Kind { explicit_rk, implicit_collocation };
  Kind kind;
  double t0, h;
  // explicit_rk: Dormand-Prince dense coefficients (5 per component).
  // implicit_collocation: values at theta = 0, c1, c2, 1 (first 4 entries).
  std::array<double, 5> cu{}, cv{};
};

/// A numerically integrated solution with dense output over [t0, t_end].
class Trajectory {
 public:
  Trajectory(double t0, State initial, Tolerances tol);

  const std::vector<double>& times() const { return times_; }
  const std::vector<State>& states() const { return states_; }
  std::size_t size() const { return times_.size(); }
  double t_start() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  const Tolerances& tolerances() const { return tol_; }

  /// Dense evaluation; t must lie in [t_start(), t_end()].
  State eval(double t) const;

  /// Set when integration stopped early because the state left the
  /// blow-up threshold; the trajectory ends at this time.
  std::optional<double> blowup_time() const { return blowup_time_; }
  /// Time at which the solver switched to implicit steps, if it did.
  std::optional<double> stiff_switch_time() const { return stiff_switch_time_; }

  /// CSV with header `t,u,v`, one row per recorded step, 17 significant digits.
  void write_csv(std::ostream& out) const;

  // Used by the integrator.
  void append(const Step& step, double t, State s);
  void mark_blowup(double t) { blowup_time_ = t; }
  void mark_stiff_switch(double t) { stiff_switch_time_ = t; }

 private:
  std::vector<double> times_;
  std::vector<State> states_;
  std::vector<Step> steps_;
  Tolerances tol_;
  std::optional<double> blowup_time_;
  std::optional<double> stiff_switch_time_;
};

/// Adaptive solution of u'' + b u' + k u = 0 from (u0, u1) at system.t0 up to
/// t_end: Dormand-Prince 5(4) with PI step control and its fourth-order
/// continuous extension. If explicit steps stay stability-limited for a run
/// of steps, the remainder is integrated with three-stage Radau IIA
/// (step-doubling error control, collocation dense output).
Trajectory solve_ivp(const SystemSpec& system, State ic, double t_end,
                     const SolveOptions& options = {});

std::string format_double(double x);

}  // namespace stifflab
