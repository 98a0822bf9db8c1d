#include "stifflab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

#include "stifflab/errors.hpp"

namespace stifflab {

std::string to_string(FunctionalKind k) {
  switch (k) {
    case FunctionalKind::E_lyapunov:
      return "E_lyapunov";
    case FunctionalKind::E_const_damping:
      return "E_const_damping";
    case FunctionalKind::V_chetaev:
      return "V_chetaev";
  }
  return "E_lyapunov";
}

FunctionalKind functional_from_string(const std::string& name) {
  for (auto k : {FunctionalKind::E_lyapunov, FunctionalKind::E_const_damping,
                 FunctionalKind::V_chetaev}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown functional " + name +
                        " (expected E_lyapunov, E_const_damping or V_chetaev)");
}

namespace {

double require_nonzero(double x, const char* what, double t) {
  if (x == 0.0) {
    throw DomainError(std::string("division by zero: ") + what + " vanishes at t=" + format_double(t));
  }
  return x;
}

}  // namespace

double functional_value(const SystemSpec& sys, FunctionalKind kind, double t, State s) {
  const double k = sys.k.eval(t);
  switch (kind) {
    case FunctionalKind::E_lyapunov: {
      const double b = sys.b.eval(t);
      if (!(b > 0)) throw DomainError("E_lyapunov needs b > 0; b(" + format_double(t) + ")=" + format_double(b));
      return std::exp(1.0 / b + k) * s.u * s.u + s.v * s.v;
    }
    case FunctionalKind::E_const_damping:
      return -k * s.u * s.u + s.v * s.v;
    case FunctionalKind::V_chetaev:
      return s.u * s.u + s.v * s.v / require_nonzero(k, "k", t);
  }
  return 0.0;
}

double functional_derivative(const SystemSpec& sys, FunctionalKind kind, double t, State s) {
  const double b = sys.b.eval(t);
  const double k = sys.k.eval(t);
  const double dk = sys.k.derivative(t);
  switch (kind) {
    case FunctionalKind::E_lyapunov: {
      if (!(b > 0)) throw DomainError("E_lyapunov needs b > 0; b(" + format_double(t) + ")=" + format_double(b));
      const double e = std::exp(1.0 / b + k);
      const double de = e * (-sys.b.derivative(t) / (b * b) + dk);
      // Expanded form of (de + g^2/(2b)) u^2 - 2b (u' - g u/(2b))^2, g = e - k;
      // the completed square cancels catastrophically once e^{1/b} is large.
      return de * s.u * s.u + 2.0 * (e - k) * s.u * s.v - 2.0 * b * s.v * s.v;
    }
    case FunctionalKind::E_const_damping: {
      require_nonzero(b, "b", t);
      // Expanded form of (-k' + 2k^2/b) u^2 - 2b (k u/b + u')^2.
      return -dk * s.u * s.u - 4.0 * k * s.u * s.v - 2.0 * b * s.v * s.v;
    }
    case FunctionalKind::V_chetaev: {
      require_nonzero(k, "k", t);
      return -(dk + 2.0 * k * b) / (k * k) * s.v * s.v;
    }
  }
  return 0.0;
}

namespace {

// Sum of the absolute values of the functional's terms: the size that
// rounding in the sampled values (and their differences) is relative to.
double functional_magnitude(const SystemSpec& sys, FunctionalKind kind, double t, State s) {
  const double k = sys.k.eval(t);
  switch (kind) {
    case FunctionalKind::E_lyapunov:
      return std::exp(1.0 / sys.b.eval(t) + k) * s.u * s.u + s.v * s.v;
    case FunctionalKind::E_const_damping:
      return std::abs(k) * s.u * s.u + s.v * s.v;
    case FunctionalKind::V_chetaev:
      return s.u * s.u + s.v * s.v / std::abs(k);
  }
  return 0.0;
}

}  // namespace

json MonotonicityReport::to_json(bool include_samples) const {
  json out = {{"functional", to_string(kind)},
              {"residual", derivative_identity_residual},
              {"nonIncreasing", non_increasing},
              {"nonDecreasing", non_decreasing},
              {"step", step},
              {"samples", times.size()}};
  if (include_samples) {
    out["times"] = times;
    out["values"] = values;
  }
  return out;
}

MonotonicityReport audit_functional(const SystemSpec& sys, const Trajectory& tr,
                                    FunctionalKind kind, double step) {
  const double t0 = tr.t_start(), t1 = tr.t_end();
  if (!(t1 > t0)) throw InvalidArgument("audit_functional: empty trajectory");
  const double h = step > 0 ? step : std::max((t1 - t0) / 5e5, 1e-5);
  const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / h * (1 + 1e-12)));
  if (n < 2) throw InvalidArgument("audit_functional: step too large for the trajectory");

  MonotonicityReport rep;
  rep.kind = kind;
  rep.step = h;
  std::vector<State> states;
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = std::min(t0 + h * static_cast<double>(i), t1);
    const State s = tr.eval(t);
    rep.times.push_back(t);
    states.push_back(s);
    rep.values.push_back(functional_value(sys, kind, t, s));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double f = rep.values[i], g = rep.values[i + 1];
    const double slack = 1e-9 * std::max(1.0, std::abs(f));
    if (g > f + slack) rep.non_increasing = false;
    if (g < f - slack) rep.non_decreasing = false;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double fd = (rep.values[i + 1] - rep.values[i - 1]) / (2.0 * h);
    const double exact = functional_derivative(sys, kind, rep.times[i], states[i]);
    const double scale = std::max({1.0, functional_magnitude(sys, kind, rep.times[i], states[i]),
                                   std::abs(exact)});
    rep.derivative_identity_residual =
        std::max(rep.derivative_identity_residual, std::abs(exact - fd) / scale);
  }
  return rep;
}

std::string to_string(ProbeVerdict v) {
  return v == ProbeVerdict::stable_evidence ? "stable_evidence" : "unstable_evidence";
}

json ProbeReport::to_json() const {
  json out = {{"delta", delta},
              {"epsilon", epsilon},
              {"horizon", horizon},
              {"directionsTested", directions_tested},
              {"worstSupNorm", worst_sup_norm},
              {"worstInitial", {worst_initial.u, worst_initial.v}},
              {"verdict", to_string(verdict)}};
  out["blowupTime"] = blowup_time ? json(*blowup_time) : json(nullptr);
  return out;
}

std::vector<State> sphere_directions(double delta, int n) {
  if (!(delta > 0)) throw InvalidArgument("probe: delta must be positive");
  if (n < 4) throw InvalidArgument("probe: need at least 4 directions");
  std::vector<State> out = {{delta, delta}, {-delta, delta}, {-delta, -delta}, {delta, -delta}};
  const int extra = n - 4;
  for (int j = 0; j < extra; ++j) {
    const double th = 2.0 * std::numbers::pi * (j + 0.5) / extra;
    const double c = std::cos(th), s = std::sin(th);
    const double m = std::max(std::abs(c), std::abs(s));
    out.push_back({delta * c / m, delta * s / m});
  }
  return out;
}

namespace {

struct ProbeRun {
  double sup = 0.0;
  std::optional<double> blowup;
};

ProbeRun probe_one(const SystemSpec& sys, State ic, double horizon) {
  ProbeRun out;
  const auto norm = [](State s) { return std::max(std::abs(s.u), std::abs(s.v)); };
  out.sup = norm(ic);
  if (ic.u == 0.0 && ic.v == 0.0) return out;
  const Trajectory tr = solve_ivp(sys, ic, horizon);
  const auto& ts = tr.times();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out.sup = std::max(out.sup, norm(tr.states()[i]));
    if (i + 1 < ts.size()) out.sup = std::max(out.sup, norm(tr.eval(0.5 * (ts[i] + ts[i + 1]))));
  }
  out.blowup = tr.blowup_time();
  return out;
}

}  // namespace

ProbeReport probe_points(const SystemSpec& sys, const std::vector<State>& points, double epsilon,
                         double horizon) {
  if (points.empty()) throw InvalidArgument("probe: no initial points");
  if (!(epsilon > 0)) throw InvalidArgument("probe: epsilon must be positive");
  if (!(horizon > sys.t0)) throw InvalidArgument("probe: horizon must exceed t0");
  std::vector<std::future<ProbeRun>> runs;
  for (const State& p : points) {
    runs.push_back(std::async(std::launch::async, [&sys, p, horizon] { return probe_one(sys, p, horizon); }));
  }
  ProbeReport rep;
  rep.epsilon = epsilon;
  rep.horizon = horizon;
  rep.directions_tested = static_cast<int>(points.size());
  rep.worst_sup_norm = -1.0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const ProbeRun r = runs[i].get();
    rep.delta = std::max({rep.delta, std::abs(points[i].u), std::abs(points[i].v)});
    if (r.sup > rep.worst_sup_norm) {
      rep.worst_sup_norm = r.sup;
      rep.worst_initial = points[i];
    }
    if (r.blowup && (!rep.blowup_time || *r.blowup < *rep.blowup_time)) rep.blowup_time = r.blowup;
  }
  rep.verdict = (rep.blowup_time || rep.worst_sup_norm >= epsilon) ? ProbeVerdict::unstable_evidence
                                                                   : ProbeVerdict::stable_evidence;
  return rep;
}

ProbeReport probe_stability(const SystemSpec& sys, double epsilon, double delta, double horizon,
                            int n_directions) {
  if (!(epsilon > delta && delta > 0)) throw InvalidArgument("probe: need epsilon > delta > 0");
  return probe_points(sys, sphere_directions(delta, n_directions), epsilon, horizon);
}

}  // namespace stifflab
