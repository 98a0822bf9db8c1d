#include "stifflab/picard.hpp"

#include <algorithm>
#include <cmath>

#include "stifflab/certificates.hpp"
#include "stifflab/damped.hpp"
#include "stifflab/errors.hpp"
#include "stifflab/improper.hpp"
#include "stifflab/quadrature.hpp"

namespace stifflab {

double GridFunction::eval(double t) const {
  const std::size_t n = times.size();
  if (n < 4 || values.size() != n) throw InvalidArgument("grid function needs >= 4 samples");
  if (!(t >= times.front() && t <= times.back())) {
    throw DomainError("grid function evaluated outside its grid at t=" + format_double(t));
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - times.begin());
  i = i == 0 ? 0 : i - 1;
  const std::size_t start = std::min(i == 0 ? 0 : i - 1, n - 4);
  double out = 0.0;
  for (std::size_t j = start; j < start + 4; ++j) {
    double l = 1.0;
    for (std::size_t m = start; m < start + 4; ++m) {
      if (m != j) l *= (t - times[m]) / (times[j] - times[m]);
    }
    out += l * values[j];
  }
  return out;
}

double GridFunction::sup_distance(const GridFunction& other) const {
  if (other.values.size() != values.size()) throw InvalidArgument("grid functions differ in size");
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) d = std::max(d, std::abs(values[i] - other.values[i]));
  return d;
}

std::vector<double> picard_grid(const SystemSpec& system, int points) {
  if (points < 8) throw InvalidArgument("picard grid needs at least 8 points");
  const double t0 = system.t0;
  double end = t0 + 100.0;
  const double dom_end = system.domain_end();
  if (dom_end < end) end = dom_end;
  // First time where e^{-B} < 1e-8, scanning in unit steps then bisecting.
  const double threshold = -std::log(1e-8);
  double prev = t0;
  for (double t = t0 + 1.0; t <= end; t += 1.0) {
    if (system.b.cumulative_integral(t0, t) > threshold) {
      double lo = prev, hi = t;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (system.b.cumulative_integral(t0, mid) > threshold ? hi : lo) = mid;
      }
      end = hi;
      break;
    }
    prev = t;
  }
  const Grid layout{t0, end, points};
  return layout.times();
}

namespace {

// Precomputed B and k on a grid; F is applied in O(N).
class Operator {
 public:
  Operator(const SystemSpec& sys, std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 4) throw InvalidArgument("picard grid needs at least 4 points");
    if (times_.front() != sys.t0) throw InvalidArgument("picard grid must start at t0");
    sys.require_defined_on(times_.back());
    for (double t : times_) {
      const double B = sys.b.cumulative_integral(sys.t0, t);
      if (!std::isfinite(B)) {
        throw QuadratureError("integral of b overflows at t=" + format_double(t));
      }
      B_.push_back(B);
      decay_.push_back(std::exp(-B));
      k_.push_back(sys.k.eval(t));
    }
  }

  FImage apply(const std::vector<double>& u, State ic) const {
    const std::size_t n = times_.size();
    std::vector<double> H(n, 0.0), dF(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double ref = B_[i + 1];
      const double panel = panel_integral(times_, i, [&](std::size_t j) {
        if (k_[j] == 0.0 || u[j] == 0.0) return 0.0;
        return k_[j] * u[j] * std::exp(B_[j] - ref);
      });
      H[i + 1] = std::exp(B_[i] - ref) * H[i] + panel;
    }
    for (std::size_t i = 0; i < n; ++i) dF[i] = ic.v * decay_[i] - H[i];
    const std::vector<double> cum = cumulative_integral_sampled(times_, dF);
    FImage out;
    out.value.times = times_;
    out.derivative.times = times_;
    out.derivative.values = dF;
    out.value.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.value.values[i] = ic.u + cum[i];
    return out;
  }

 private:
  std::vector<double> times_, B_, decay_, k_;
};

}  // namespace

FImage apply_F(const SystemSpec& system, const GridFunction& u, State ic) {
  if (u.times.size() != u.values.size()) throw InvalidArgument("grid function size mismatch");
  return Operator(system, u.times).apply(u.values, ic);
}

FixedPointResult picard_solve(const SystemSpec& system, State ic, const std::vector<double>& grid,
                              double tol, int max_iter) {
  if (!(tol > 0)) throw InvalidArgument("picard: tol must be positive");
  if (max_iter < 1) throw InvalidArgument("picard: max_iter must be at least 1");
  const Operator op(system, grid);
  FixedPointResult res;
  res.solution = {grid, std::vector<double>(grid.size(), ic.u)};
  res.derivative = {grid, std::vector<double>(grid.size(), 0.0)};
  for (int it = 1; it <= max_iter; ++it) {
    FImage next = op.apply(res.solution.values, ic);
    const double diff = std::max(next.value.sup_distance(res.solution),
                                 next.derivative.sup_distance(res.derivative));
    if (!std::isfinite(diff)) throw SolverError("picard iterate became non-finite at iteration " + std::to_string(it));
    if (!res.residual_history.empty() && res.residual_history.back() > 0) {
      res.contraction_ratios.push_back(diff / res.residual_history.back());
    }
    res.residual_history.push_back(diff);
    res.solution = std::move(next.value);
    res.derivative = std::move(next.derivative);
    res.iterations = it;
    if (diff < tol) return res;
  }
  const std::string ratio = res.contraction_ratios.empty() ? "n/a" : format_double(res.contraction_ratios.back());
  throw SolverError("picard iteration did not reach tol " + format_double(tol) + " in " +
                    std::to_string(max_iter) + " iterations; last contraction ratio " + ratio);
}

void FixedPointResult::write_csv(std::ostream& out) const {
  out << "t,u,v\n";
  for (std::size_t i = 0; i < solution.times.size(); ++i) {
    out << format_double(solution.times[i]) << ',' << format_double(solution.values[i]) << ','
        << format_double(derivative.values[i]) << '\n';
  }
}

json FixedPointResult::to_json() const {
  return {{"iterations", iterations},
          {"residualHistory", residual_history},
          {"contractionRatios", contraction_ratios},
          {"gridPoints", solution.times.size()},
          {"window", {solution.times.front(), solution.times.back()}}};
}

json MembershipReport::to_json() const {
  json out = {{"defined", defined}, {"member", member},   {"epsilon", epsilon},
              {"u0Gate", u0_gate},  {"u1Gate", u1_gate},  {"u1Bound", u1_bound},
              {"horizon", horizon}};
  out["integral"] = defined ? json(integral) : json(nullptr);
  out["supU"] = sup_u ? json(*sup_u) : json(nullptr);
  out["supV"] = sup_v ? json(*sup_v) : json(nullptr);
  return out;
}

MembershipReport b_epsilon_membership(const SystemSpec& system, State ic, double epsilon,
                                      const FixedPointResult* solution, std::optional<double> horizon) {
  if (!(epsilon > 0)) throw InvalidArgument("b_epsilon_membership: epsilon must be positive");
  MembershipReport rep;
  rep.epsilon = epsilon;
  const double h = horizon.value_or(std::min(default_horizon(system.b, system.t0), system.domain_end()));
  const ConvergenceResult r = integrate_improper(decay_factor(system.b, system.t0), system.t0, kImproperDefaultTol, h);
  rep.u0_gate = std::abs(ic.u) <= epsilon / 4;
  rep.horizon = system.t0;
  if (r.status != ConvergenceStatus::convergent) return rep;
  rep.defined = true;
  rep.integral = *r.value;
  rep.u1_bound = std::min(epsilon / 4, epsilon / (4 * rep.integral));
  rep.u1_gate = std::abs(ic.v) <= rep.u1_bound;
  rep.member = rep.u0_gate && rep.u1_gate;
  if (solution) {
    double su = 0, sv = 0;
    for (double x : solution->solution.values) su = std::max(su, std::abs(x));
    for (double x : solution->derivative.values) sv = std::max(sv, std::abs(x));
    rep.sup_u = su;
    rep.sup_v = sv;
    rep.horizon = solution->solution.times.back();
    rep.member = rep.member && su <= epsilon && sv <= epsilon;
  }
  return rep;
}

}  // namespace stifflab
