#include "stifflab/improper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "stifflab/errors.hpp"

namespace stifflab {

std::string to_string(ConvergenceStatus s) {
  switch (s) {
    case ConvergenceStatus::convergent:
      return "convergent";
    case ConvergenceStatus::divergent:
      return "divergent";
    case ConvergenceStatus::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

double default_horizon(const CoefficientFn& damping, double t0) {
  return t0 + (damping.is_power_law_family() ? 1e6 : 1e3);
}

namespace {

constexpr double kMargin = 0.1;
constexpr int kTailSamples = 64;

// Least-squares slope of y against x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

ConvergenceResult classify(const std::function<double(double)>& eval,
                           const std::function<double(double, double)>& integral, double t0,
                           double tol, double horizon) {
  if (!(horizon > t0)) throw InvalidArgument("integrate_improper: horizon must exceed t0");
  if (!(tol > 0.0)) throw InvalidArgument("integrate_improper: tol must be positive");

  ConvergenceResult out;
  out.horizon_used = horizon;
  const double span = horizon - t0;
  const double s_decade = span / 10.0;
  const double s_century = span / 100.0;

  // Panel boundaries (offsets from t0): doubling from 1, plus the two decade marks.
  std::vector<double> marks = {0.0, s_century, s_decade, span};
  for (double s = 1.0; s < span; s *= 2.0) marks.push_back(s);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  double partial = 0.0, inc_last = 0.0, inc_prev = 0.0;
  try {
    for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
      const double piece = integral(t0 + marks[i], t0 + marks[i + 1]);
      if (!std::isfinite(piece)) throw QuadratureError("non-finite panel integral");
      partial += piece;
      if (marks[i] >= s_decade) {
        inc_last += piece;
      } else if (marks[i] >= s_century) {
        inc_prev += piece;
      }
    }
  } catch (const QuadratureError&) {
    // Overflowing partial integrals: the integral grows without bound.
    out.status = ConvergenceStatus::divergent;
    out.partial = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.partial = partial;
  if (!std::isfinite(partial)) {
    out.status = ConvergenceStatus::divergent;
    return out;
  }

  // Log-spaced samples over the last decade.
  std::vector<double> xs, ys;
  bool pos = false, neg = false;
  const double l0 = std::log(s_decade), l1 = std::log(span);
  for (int i = 0; i < kTailSamples; ++i) {
    const double ls = l0 + (l1 - l0) * i / (kTailSamples - 1);
    const double s = i == kTailSamples - 1 ? span : std::exp(ls);
    const double v = eval(t0 + s);
    if (!std::isfinite(v)) {
      out.status = ConvergenceStatus::divergent;
      return out;
    }
    if (v > 0) pos = true;
    if (v < 0) neg = true;
    if (v != 0.0) {
      xs.push_back(ls);
      ys.push_back(std::log(std::abs(v)));
    }
  }
  if (xs.empty()) {
    out.status = ConvergenceStatus::convergent;
    out.value = partial;
    out.tail_exponent = 0.0;
    return out;
  }
  const bool underflow = xs.size() < static_cast<std::size_t>(kTailSamples);
  const double p = xs.size() >= 2 ? -slope(xs, ys) : 0.0;
  out.tail_exponent = std::isfinite(p) ? p : 0.0;
  if (pos && neg) {
    out.status = ConvergenceStatus::inconclusive;
    return out;
  }
  if (underflow) {
    // The integrand reaches zero in floating point before the horizon.
    out.status = ConvergenceStatus::convergent;
    out.value = partial;
    return out;
  }

  const double p_hi = 1.0 + kMargin, p_lo = 1.0 - kMargin;
  if (p > 1.0) {
    const double tail = eval(horizon) * span / (p - 1.0);
    const double value = partial + tail;
    if (p > p_hi && std::abs(tail) <= tol * std::abs(value)) {
      out.status = ConvergenceStatus::convergent;
      out.value = value;
      return out;
    }
  }
  if (p < p_lo) {
    out.status = ConvergenceStatus::divergent;
    return out;
  }
  if (p <= p_hi && inc_prev != 0.0 && inc_last / inc_prev >= 0.95) {
    out.status = ConvergenceStatus::divergent;
    return out;
  }
  out.status = ConvergenceStatus::inconclusive;
  return out;
}

}  // namespace

ConvergenceResult integrate_improper(const CoefficientFn& g, double t0, double tol,
                                     double horizon) {
  if (!g.domain().contains(t0, horizon)) {
    throw DomainError("integrate_improper: integrand " + g.kind() +
                      " is not defined on [t0, horizon]");
  }
  return classify([&](double t) { return g.eval(t); },
                  [&](double a, double b) { return g.integral(a, b, 1e-10); }, t0, tol, horizon);
}

ConvergenceResult integrate_improper(const std::function<double(double)>& g, double t0,
                                     double tol, double horizon) {
  QuadOptions opt;
  opt.rel = 1e-10;
  opt.abs = 1e-15;
  return classify(
      g, [&](double a, double b) { return integrate_adaptive(g, a, b, opt).value; }, t0, tol,
      horizon);
}

}  // namespace stifflab
