#include "stifflab/certificates.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <functional>
#include <limits>

#include "stifflab/damped.hpp"
#include "stifflab/errors.hpp"
#include "stifflab/improper.hpp"
#include "stifflab/ode.hpp"

namespace stifflab {

std::string to_string(CertStatus s) {
  switch (s) {
    case CertStatus::holds:
      return "holds";
    case CertStatus::fails:
      return "fails";
    case CertStatus::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

std::vector<double> Grid::times() const {
  if (!(t_end > t_start)) throw InvalidArgument("grid: t_end must exceed t_start");
  if (points < 4) throw InvalidArgument("grid: need at least 4 points");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(points));
  const double span = t_end - t_start;
  if (span <= 10.0) {
    for (int i = 0; i < points; ++i) out.push_back(t_start + span * i / (points - 1));
    out.back() = t_end;
    return out;
  }
  const int n_lin = points / 2;
  const int n_log = points - n_lin;
  for (int i = 0; i < n_lin; ++i) out.push_back(t_start + 10.0 * i / n_lin);
  const double l0 = std::log(10.0), l1 = std::log(span);
  for (int i = 0; i < n_log; ++i) {
    out.push_back(t_start + std::exp(l0 + (l1 - l0) * i / (n_log - 1)));
  }
  out[static_cast<std::size_t>(n_lin)] = t_start + 10.0;
  out.back() = t_end;
  return out;
}

const ConditionResult& Verdict::condition(const std::string& id) const {
  for (const auto& c : conditions) {
    if (c.id == id) return c;
  }
  throw InvalidArgument("verdict " + certificate + " has no condition " + id);
}

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json Verdict::to_json() const {
  json conds = json::array();
  for (const auto& c : conditions) {
    conds.push_back({{"id", c.id},
                     {"status", to_string(c.status)},
                     {"margin", number_or_null(c.margin)},
                     {"firstViolation", c.first_violation ? json(*c.first_violation) : json(nullptr)}});
  }
  json params = json::object();
  for (const auto& [k, v] : parameters) params[k] = number_or_null(v);
  return {{"certificate", certificate},
          {"status", to_string(status)},
          {"window", {grid.t_start, grid.t_end}},
          {"gridPoints", grid.points},
          {"conditions", conds},
          {"parameters", params},
          {"notes", notes}};
}

const std::vector<std::string>& certificate_names() {
  static const std::vector<std::string> names = {
      "lyapunov", "const_damping", "fix1",     "fixed_point",
      "nonpositive", "chetaev",    "chetaev2", "exponential_damping"};
  return names;
}

bool is_stability_certificate(const std::string& name) {
  return name == "lyapunov" || name == "const_damping" || name == "fixed_point";
}

bool is_instability_certificate(const std::string& name) {
  return name == "nonpositive" || name == "chetaev" || name == "chetaev2";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using MarginFn = std::function<double(double)>;

struct Context {
  const SystemSpec& sys;
  Grid grid;
  std::vector<double> times;
};

Context make_context(const SystemSpec& sys, const Grid& grid) {
  if (grid.t_start < sys.t0) {
    throw InvalidArgument("grid starts at " + format_double(grid.t_start) + " before t0=" +
                          format_double(sys.t0));
  }
  const Domain dom = sys.b.domain().intersect(sys.k.domain());
  if (!dom.contains(grid.t_start, grid.t_end)) {
    throw DomainError("coefficients are not defined on the grid window [" +
                      format_double(grid.t_start) + ", " + format_double(grid.t_end) + "]");
  }
  return {sys, grid, grid.times()};
}

// Minimal slack over the grid points with t >= t_from, refined between the
// neighbours of the worst point.
ConditionResult evaluate(std::string id, const std::vector<double>& times, const MarginFn& margin,
                         double t_from = -kInf) {
  ConditionResult out;
  out.id = std::move(id);
  std::vector<double> ts, ms;
  if (t_from > times.front() && t_from <= times.back()) {
    ts.push_back(t_from);
    ms.push_back(margin(t_from));
  }
  for (double t : times) {
    if (t <= t_from && !(t == t_from && ts.empty())) continue;
    ts.push_back(t);
    ms.push_back(margin(t));
  }
  if (ts.empty()) {
    out.margin = kNaN;
    out.status = CertStatus::inconclusive;
    return out;
  }
  std::size_t worst = 0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (std::isnan(ms[i])) {
      out.margin = kNaN;
      out.status = CertStatus::inconclusive;
      return out;
    }
    if (ms[i] < ms[worst]) worst = i;
    if (!out.first_violation && ms[i] < -kDecisionTol) out.first_violation = ts[i];
  }
  double best = ms[worst];
  double best_t = ts[worst];
  if (std::isfinite(best) && worst > 0 && worst + 1 < ts.size()) {
    const auto [t_min, m_min] = boost::math::tools::brent_find_minima(
        [&](double t) {
          const double m = margin(t);
          return std::isnan(m) ? kInf : m;
        },
        ts[worst - 1], ts[worst + 1], std::numeric_limits<double>::digits / 2);
    if (m_min < best) {
      best = m_min;
      best_t = t_min;
    }
  }
  out.margin = best;
  if (!out.first_violation && best < -kDecisionTol) out.first_violation = best_t;
  out.status = best >= -kDecisionTol ? CertStatus::holds : CertStatus::fails;
  return out;
}

ConditionResult untrusted(std::string id) {
  return {std::move(id), CertStatus::inconclusive, kNaN, std::nullopt};
}

void finish(Verdict& v) {
  bool fail = false, unknown = false;
  for (const auto& c : v.conditions) {
    fail |= c.status == CertStatus::fails;
    unknown |= c.status == CertStatus::inconclusive;
  }
  v.status = fail ? CertStatus::fails : unknown ? CertStatus::inconclusive : CertStatus::holds;
  v.notes.push_back("hypotheses checked on the finite window [" + format_double(v.grid.t_start) +
                    ", " + format_double(v.grid.t_end) + "] only");
}

Verdict start(const std::string& name, const Context& ctx) {
  Verdict v;
  v.certificate = name;
  v.grid = ctx.grid;
  return v;
}

bool derivatives_trusted(const SystemSpec& s, Verdict& v) {
  if (s.b.derivative_trusted() && s.k.derivative_trusted()) return true;
  v.notes.push_back("coefficient derivative not trusted (tabulated data too coarse)");
  return false;
}

// Same refined minimum the conditions use, so auto-suggested constants sit
// exactly on the boundary instead of a grid sample away from it.
double grid_min(const std::vector<double>& ts, const MarginFn& f, double t_from = -kInf) {
  return evaluate("", ts, f, t_from).margin;
}

// Positive constant for the existential parameters; the smallest trial value
// stands in when the window admits none.
double positive_or_trial(double suggested, Verdict& v, const std::string& name) {
  if (suggested > 0.0 && std::isfinite(suggested)) return suggested;
  v.notes.push_back("no positive " + name + " fits this window; trial value " +
                    format_double(10 * kDecisionTol) + " used");
  return 10 * kDecisionTol;
}

// Auto-suggested lower bound alpha for -k. The theorems need it on all of
// [t0, inf), so -k is also sampled beyond the window; alpha is trusted only
// when -k has levelled off there (or, past the coefficient domain, when -k
// is not decreasing at the window end).
struct AutoAlpha {
  double value;
  bool uniform;
};

AutoAlpha auto_alpha(const SystemSpec& sys, const Context& ctx, Verdict& v) {
  double a = grid_min(ctx.times, [&](double t) { return -sys.k.eval(t); });
  const double t_end = ctx.times.back();
  const double span = t_end - ctx.times.front();
  std::vector<double> tail;
  for (double scale : {10.0, 100.0, 1e3, 1e4}) {
    const double t = t_end + scale * span;
    if (!(t < sys.domain_end()) || !sys.k.domain().contains(t)) break;
    tail.push_back(-sys.k.eval(t));
  }
  bool uniform;
  if (tail.size() >= 2) {
    const double last = tail.back(), prev = tail[tail.size() - 2];
    uniform = last > 0.0 && std::abs(last - prev) <= 0.01 * std::abs(prev);
    for (double x : tail) a = std::min(a, x);
  } else {
    uniform = sys.k.derivative(t_end) <= 0.0;
  }
  v.notes.push_back("alpha auto-suggested as min of -k over the grid and beyond it");
  if (!uniform) v.notes.push_back("-k keeps decreasing beyond the window: no uniform alpha is established");
  return {positive_or_trial(a, v, "alpha"), uniform};
}

// A lower-bound condition evaluated with a non-uniform alpha cannot hold.
void demote_if_not_uniform(ConditionResult& c, bool uniform) {
  if (!uniform && c.status == CertStatus::holds) c.status = CertStatus::inconclusive;
}

}  // namespace

Verdict check_lyapunov_stability(const SystemSpec& sys, std::optional<double> M, const Grid& grid) {
  const Context ctx = make_context(sys, grid);
  Verdict v = start("lyapunov", ctx);
  const auto q = [&](double t) {
    const double b = sys.b.eval(t);
    return b > 0 ? 1.0 / b + sys.k.eval(t) : -kInf;
  };
  if (!M) {
    const double m = grid_min(ctx.times, [&](double t) {
      const double x = q(t);
      return std::isfinite(x) ? x : kInf;
    });
    M = std::isfinite(m) ? m : 0.0;
    v.notes.push_back("M auto-suggested as min of 1/b + k over the grid");
  }
  v.parameters["M"] = *M;
  const double m = *M;
  v.conditions.push_back(evaluate("H1", ctx.times, [&](double t) { return q(t) - m; }));
  if (derivatives_trusted(sys, v)) {
    v.conditions.push_back(evaluate("H2", ctx.times, [&](double t) {
      const double b = sys.b.eval(t);
      if (!(b > 0)) return -kInf;
      const double k = sys.k.eval(t);
      const double e = std::exp(1.0 / b + k);
      const double lhs = e * (-sys.b.derivative(t) / (b * b) + sys.k.derivative(t));
      const double gap = e - k;
      return -gap * gap / (2.0 * b) - lhs;
    }));
  } else {
    v.conditions.push_back(untrusted("H2"));
  }
  finish(v);
  return v;
}

Verdict check_const_damping_stability(const SystemSpec& sys, std::optional<double> alpha,
                                      const Grid& grid) {
  const auto* bc = get_if<fn::Constant>(sys.b.simplified());
  if (!bc) throw InapplicableError("const_damping requires constant damping b, got " + sys.b.kind());
  const double b = bc->c;
  if (!(b > 0)) throw InapplicableError("const_damping requires b > 0");
  const Context ctx = make_context(sys, grid);
  Verdict v = start("const_damping", ctx);
  if (alpha && !(*alpha > 0)) throw InvalidArgument("alpha must be positive");
  bool uniform = true;
  if (!alpha) {
    const AutoAlpha aa = auto_alpha(sys, ctx, v);
    alpha = aa.value;
    uniform = aa.uniform;
  }
  const double a = *alpha;
  v.parameters["alpha"] = a;
  v.parameters["b"] = b;
  v.conditions.push_back(evaluate("H1'", ctx.times, [&](double t) { return -sys.k.eval(t) - a; }));
  demote_if_not_uniform(v.conditions.back(), uniform);
  if (derivatives_trusted(sys, v)) {
    v.conditions.push_back(evaluate("H2'", ctx.times, [&](double t) {
      const double k = sys.k.eval(t);
      return sys.k.derivative(t) - 2.0 * k * k / b;
    }));
  } else {
    v.conditions.push_back(untrusted("H2'"));
  }
  finish(v);
  return v;
}

namespace {

// As a necessary condition fix1 needs k <= 0; as a hypothesis of the
// fixed-point theorem only the convergence of the integral matters.
ConditionResult fix1_condition(const SystemSpec& sys, const Context& ctx,
                               std::optional<double> horizon, bool as_necessary, Verdict& v) {
  double h = horizon.value_or(default_horizon(sys.b, sys.t0));
  if (!horizon) {
    const double dom_end = sys.domain_end();
    if (dom_end < h) {
      h = dom_end;
      v.notes.push_back("horizon clipped to the end of the coefficient domain");
    }
  }
  v.parameters["horizon"] = h;
  ConditionResult c{"fix1", CertStatus::inconclusive, kNaN, std::nullopt};
  bool k_ok = true;
  if (as_necessary) {
    const double k_max = -grid_min(ctx.times, [&](double t) { return -sys.k.eval(t); });
    k_ok = k_max <= kDecisionTol;
    if (!k_ok) v.notes.push_back("k > 0 somewhere on the grid: fix1 is not known to be necessary");
  }

  ConvergenceResult r;
  try {
    r = integrate_improper(decay_factor(sys.b, sys.t0), sys.t0, kImproperDefaultTol, h);
  } catch (const QuadratureError& e) {
    v.notes.push_back(std::string("fix1 quadrature failed: ") + e.what());
    return c;
  }
  v.parameters["tail_exponent"] = r.tail_exponent;
  v.notes.push_back("fix1 integral is " + to_string(r.status) + " (horizon " + format_double(h) + ")");
  if (r.value) v.parameters["fix1_integral"] = *r.value;
  if (r.status == ConvergenceStatus::convergent) {
    if (r.tail_exponent > 0.0) {
      c.margin = std::max(r.tail_exponent - 1.1, 0.0);
    } else {
      c.margin = 1.0;
      v.notes.push_back("fix1 integrand vanishes in floating point over the tail; nominal margin 1");
    }
    c.status = CertStatus::holds;
  } else if (r.status == ConvergenceStatus::divergent) {
    c.margin = std::min(r.tail_exponent - 1.1, -10 * kDecisionTol);
    c.status = CertStatus::fails;
    c.first_violation = h;
  }
  if (!k_ok) {
    c.status = CertStatus::inconclusive;
    c.margin = kNaN;
    c.first_violation.reset();
  }
  return c;
}

}  // namespace

Verdict check_necessary_fix1(const SystemSpec& sys, const Grid& grid,
                             std::optional<double> horizon) {
  const Context ctx = make_context(sys, grid);
  Verdict v = start("fix1", ctx);
  v.conditions.push_back(fix1_condition(sys, ctx, horizon, true, v));
  finish(v);
  return v;
}

Verdict check_fixed_point_stability(const SystemSpec& sys, const Grid& grid,
                                    std::optional<double> horizon) {
  const Context ctx = make_context(sys, grid);
  Verdict v = start("fixed_point", ctx);
  v.conditions.push_back(fix1_condition(sys, ctx, horizon, false, v));
  const double h = v.parameters.at("horizon");
  if (!sys.b.domain().intersect(sys.k.domain()).contains(sys.t0, h)) {
    throw DomainError("coefficients are not defined up to the horizon " + format_double(h));
  }

  const CoefficientFn decay = decay_factor(sys.b, sys.t0);
  v.conditions.push_back(evaluate("fix2", ctx.times, [&](double t) { return 2.0 - decay.eval(t); }));

  DampedConvolution S(sys.b, [&](double t) { return std::abs(sys.k.eval(t)); }, sys.t0);
  ConditionResult fix3{"fix3", CertStatus::inconclusive, kNaN, std::nullopt};
  try {
    const ConvergenceResult r =
        integrate_improper([&](double s) { return S(s); }, sys.t0, kImproperDefaultTol, h);
    if (r.status == ConvergenceStatus::convergent) {
      v.parameters["fix3_integral"] = *r.value;
      fix3.margin = 0.5 - *r.value;
      fix3.status = fix3.margin >= -kDecisionTol ? CertStatus::holds : CertStatus::fails;
    } else if (r.status == ConvergenceStatus::divergent) {
      fix3.margin = -kInf;
      fix3.status = CertStatus::fails;
      v.notes.push_back("fix3 outer integral diverges");
    } else {
      v.notes.push_back("fix3 outer integral inconclusive");
    }
  } catch (const QuadratureError& e) {
    v.notes.push_back(std::string("fix3 quadrature failed: ") + e.what());
  }
  if (fix3.status == CertStatus::fails) fix3.first_violation = h;
  v.conditions.push_back(fix3);

  try {
    v.conditions.push_back(evaluate("fix4", ctx.times, [&](double t) { return 0.5 - S(t); }));
  } catch (const QuadratureError& e) {
    v.notes.push_back(std::string("fix4 quadrature failed: ") + e.what());
    v.conditions.push_back(untrusted("fix4"));
  }
  finish(v);
  return v;
}

Verdict check_instability_nonpositive(const SystemSpec& sys, const Grid& grid) {
  const Context ctx = make_context(sys, grid);
  Verdict v = start("nonpositive", ctx);
  v.conditions.push_back(evaluate("b_nonpositive", ctx.times, [&](double t) { return -sys.b.eval(t); }));
  v.conditions.push_back(evaluate("k_nonpositive", ctx.times, [&](double t) { return -sys.k.eval(t); }));
  finish(v);
  return v;
}

namespace {

double chetaev_expr(const SystemSpec& sys, double t) {
  return sys.k.derivative(t) + 2.0 * sys.b.eval(t) * sys.k.eval(t);
}

AutoAlpha suggest_alpha(const SystemSpec& sys, const Context& ctx, std::optional<double> alpha,
                        Verdict& v) {
  if (alpha) {
    if (!(*alpha > 0)) throw InvalidArgument("alpha must be positive");
    return {*alpha, true};
  }
  return auto_alpha(sys, ctx, v);
}

}  // namespace

Verdict check_instability_chetaev(const SystemSpec& sys, std::optional<double> alpha,
                                  const Grid& grid) {
  const Context ctx = make_context(sys, grid);
  Verdict v = start("chetaev", ctx);
  const AutoAlpha aa = suggest_alpha(sys, ctx, alpha, v);
  const double a = aa.value;
  v.parameters["alpha"] = a;
  v.conditions.push_back(evaluate("H5", ctx.times, [&](double t) { return -sys.k.eval(t) - a; }));
  demote_if_not_uniform(v.conditions.back(), aa.uniform);
  if (derivatives_trusted(sys, v)) {
    v.conditions.push_back(evaluate("H6", ctx.times, [&](double t) { return chetaev_expr(sys, t); }));
  } else {
    v.conditions.push_back(untrusted("H6"));
  }
  finish(v);
  return v;
}

Verdict check_instability_chetaev2(const SystemSpec& sys, std::optional<double> alpha,
                                   std::optional<double> alpha3, std::optional<double> t3,
                                   const Grid& grid) {
  const Context ctx = make_context(sys, grid);
  Verdict v = start("chetaev2", ctx);
  const AutoAlpha aa = suggest_alpha(sys, ctx, alpha, v);
  const double a = aa.value;
  if (t3) {
    if (!(*t3 > 0)) throw InvalidArgument("t3 must be positive");
  } else {
    for (double t : ctx.times) {
      if (t > 0) {
        t3 = t;
        break;
      }
    }
    v.notes.push_back("t3 auto-suggested as the first positive grid time");
  }
  if (!(*t3 < grid.t_end)) throw InvalidArgument("grid must extend beyond t3");
  const bool trusted = derivatives_trusted(sys, v);
  if (alpha3) {
    if (!(*alpha3 > 0)) throw InvalidArgument("alpha3 must be positive");
  } else if (trusted) {
    double best = grid_min(
        ctx.times,
        [&](double t) {
          const double b = sys.b.eval(t), k = sys.k.eval(t);
          const double w = b * b * k * k;
          return w > 0 ? t * -chetaev_expr(sys, t) / w : kInf;
        },
        *t3);
    if (best == kInf) {
      best = 1.0;
      v.notes.push_back("b k vanishes on the grid; alpha3 set to 1");
    }
    alpha3 = positive_or_trial(best, v, "alpha3");
    v.notes.push_back("alpha3 auto-suggested as min of t(-k' - 2bk)/(b^2 k^2) for t >= t3");
  } else {
    alpha3 = 1.0;
  }
  v.parameters["alpha"] = a;
  v.parameters["alpha3"] = *alpha3;
  v.parameters["t3"] = *t3;
  const double a3 = *alpha3;
  v.conditions.push_back(evaluate("H7", ctx.times, [&](double t) { return -sys.k.eval(t) - a; }));
  demote_if_not_uniform(v.conditions.back(), aa.uniform);
  if (trusted) {
    v.conditions.push_back(evaluate("H8", ctx.times, [&](double t) { return -chetaev_expr(sys, t); }));
    v.conditions.push_back(evaluate(
        "H9", ctx.times,
        [&](double t) {
          const double b = sys.b.eval(t), k = sys.k.eval(t);
          return -chetaev_expr(sys, t) - a3 / t * b * b * k * k;
        },
        *t3));
  } else {
    v.conditions.push_back(untrusted("H8"));
    v.conditions.push_back(untrusted("H9"));
  }
  finish(v);
  return v;
}

Verdict check_exponential_damping_implication(const SystemSpec& sys, const Grid& grid) {
  const Context ctx = make_context(sys, grid);
  double prev = -kInf;
  for (double t : ctx.times) {
    const double k = sys.k.eval(t);
    if (k > kDecisionTol) {
      throw InapplicableError("exponential_damping requires k <= 0; k(" + format_double(t) +
                              ")=" + format_double(k));
    }
    if (k < prev - kDecisionTol) {
      throw InapplicableError("exponential_damping requires k non-decreasing; decreases at t=" +
                              format_double(t));
    }
    prev = k;
  }
  Verdict v = start("exponential_damping", ctx);
  const Verdict lyap = check_lyapunov_stability(sys, std::nullopt, grid);
  v.notes.push_back("H1-H2 on this window: " + to_string(lyap.status));
  const double ts = grid.t_start;
  const double b0 = sys.b.eval(ts);
  v.parameters["b_start"] = b0;
  v.conditions.push_back(evaluate("growth", ctx.times, [&](double t) {
    const double b = sys.b.eval(t);
    if (!(b > 0) || !(b0 > 0)) return -kInf;
    return std::log(b) - std::log(b0) - 0.5 * (t - ts);
  }));
  finish(v);
  return v;
}

namespace {

std::optional<double> opt_param(const json& p, const char* key) {
  if (!p.is_object() || !p.contains(key) || p[key].is_null()) return std::nullopt;
  if (!p[key].is_number()) throw ConfigError(std::string("parameters/") + key, "must be a number");
  return p[key].get<double>();
}

}  // namespace

Verdict run_certificate(const std::string& name, const SystemSpec& system, const json& params,
                        const Grid& grid) {
  if (!params.is_null() && !params.is_object()) {
    throw ConfigError("parameters", "must be an object");
  }
  if (params.is_object()) {
    static const std::vector<std::string> known = {"M", "alpha", "alpha3", "t3", "horizon"};
    for (const auto& [key, value] : params.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ConfigError("parameters/" + key, "unknown parameter");
      }
    }
  }
  if (name == "lyapunov") return check_lyapunov_stability(system, opt_param(params, "M"), grid);
  if (name == "const_damping") {
    return check_const_damping_stability(system, opt_param(params, "alpha"), grid);
  }
  if (name == "fix1") return check_necessary_fix1(system, grid, opt_param(params, "horizon"));
  if (name == "fixed_point") {
    return check_fixed_point_stability(system, grid, opt_param(params, "horizon"));
  }
  if (name == "nonpositive") return check_instability_nonpositive(system, grid);
  if (name == "chetaev") return check_instability_chetaev(system, opt_param(params, "alpha"), grid);
  if (name == "chetaev2") {
    return check_instability_chetaev2(system, opt_param(params, "alpha"), opt_param(params, "alpha3"),
                                      opt_param(params, "t3"), grid);
  }
  if (name == "exponential_damping") return check_exponential_damping_implication(system, grid);
  throw InvalidArgument("unknown certificate " + name);
}

}  // namespace stifflab
