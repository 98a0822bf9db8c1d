#include "stifflab/damped.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include "stifflab/errors.hpp"
#include "stifflab/quadrature.hpp"

namespace stifflab {

namespace {

// Exact exp(-int_{t0}^{t} b) for b in the span of constants and c/(t + shift).
std::optional<CoefficientFn> exact_decay(const CoefficientFn& b, double t0) {
  if (const auto* c = get_if<fn::Constant>(b)) {
    return CoefficientFn::exponential(std::exp(c->c * t0), -c->c);
  }
  if (const auto* p = get_if<fn::PowerLaw>(b); p && p->exponent == -1.0) {
    return CoefficientFn::power_law(std::pow(t0 + p->shift, p->c), p->shift, -p->c);
  }
  if (const auto* s = get_if<fn::Sum>(b)) {
    std::vector<CoefficientFn> factors;
    for (const auto& term : s->terms) {
      auto f = exact_decay(term, t0);
      if (!f) return std::nullopt;
      factors.push_back(*f);
    }
    return CoefficientFn::product(std::move(factors)).simplified();
  }
  return std::nullopt;
}

// Checkpoint offsets from t0: quarter steps to 10, then geometric by 1.05.
double lattice(std::size_t j) {
  if (j <= 40) return 0.25 * static_cast<double>(j);
  return 10.0 * std::pow(1.05, static_cast<double>(j - 40));
}

// Antiderivative of b on [lo, hi] from a degree-32 Chebyshev interpolant,
// so the inner exponent costs a Clenshaw sum instead of a quadrature.
class LocalAntiderivative {
 public:
  static constexpr int kN = 32;

  LocalAntiderivative(const CoefficientFn& b, double lo, double hi)
      : mid_(0.5 * (lo + hi)), half_(0.5 * (hi - lo)) {
    static const std::array<double, 2 * kN> cosines = [] {
      std::array<double, 2 * kN> c{};
      for (int i = 0; i < 2 * kN; ++i) c[i] = std::cos(std::numbers::pi * i / kN);
      return c;
    }();
    std::array<double, kN + 1> f{};
    for (int j = 0; j <= kN; ++j) f[j] = b.eval(mid_ + half_ * cosines[j]);
    std::array<double, kN + 1> c{};
    for (int k = 0; k <= kN; ++k) {
      double acc = 0.0;
      for (int j = 0; j <= kN; ++j) {
        const double w = (j == 0 || j == kN) ? 0.5 : 1.0;
        acc += w * f[j] * cosines[(j * k) % (2 * kN)];
      }
      c[k] = acc * 2.0 / kN;
    }
    c[0] *= 0.5;
    c[kN] *= 0.5;
    coef_[1] += c[0];
    coef_[0] += 0.25 * c[1];
    coef_[2] += 0.25 * c[1];
    for (int k = 2; k <= kN; ++k) {
      coef_[k + 1] += c[k] / (2.0 * (k + 1));
      coef_[k - 1] -= c[k] / (2.0 * (k - 1));
    }
    for (auto& x : coef_) x *= half_;
    at_lo_ = clenshaw(-1.0);
  }

  /// integral_{lo}^{t} b.
  double operator()(double t) const { return clenshaw((t - mid_) / half_) - at_lo_; }

 private:
  double clenshaw(double x) const {
    double b1 = 0.0, b2 = 0.0;
    for (int k = kN + 1; k >= 1; --k) {
      const double b0 = 2.0 * x * b1 - b2 + coef_[k];
      b2 = b1;
      b1 = b0;
    }
    return x * b1 - b2 + coef_[0];
  }

  double mid_, half_;
  std::array<double, kN + 2> coef_{};
  double at_lo_ = 0.0;
};

}  // namespace

CoefficientFn decay_factor(const CoefficientFn& b, double t0) {
  const CoefficientFn simple = b.simplified();
  if (auto f = exact_decay(simple, t0)) return *f;
  return -1.0 * CoefficientFn::neg_exp2int(0.5 * simple, t0);
}

DampedConvolution::DampedConvolution(CoefficientFn b, std::function<double(double)> f, double t0)
    : b_(std::move(b)), f_(std::move(f)), t0_(t0), values_{0.0} {}

double DampedConvolution::checkpoint(std::size_t j) const { return t0_ + lattice(j); }

double DampedConvolution::local(double from, double to) const {
  if (from == to) return 0.0;
  QuadOptions opt;
  opt.rel = 1e-11;
  opt.abs = 1e-16;
  if (!b_.has_exact_integral()) {
    const LocalAntiderivative anti(b_, from, to);
    const double total = anti(to);
    const double reference = b_.integral(from, to, 1e-13);
    if (std::abs(total - reference) <= 1e-12 * std::max(1.0, std::abs(reference))) {
      const auto integrand = [&](double tau) {
        const double f = f_(tau);
        if (f == 0.0) return 0.0;
        if (tau >= to) return f;
        return f * std::exp(anti(tau) - total);
      };
      return integrate_adaptive(integrand, from, to, opt).value;
    }
  }
  const auto integrand = [&](double tau) {
    const double f = f_(tau);
    if (f == 0.0) return 0.0;
    if (tau >= to) return f;
    return f * std::exp(-b_.integral(tau, to, 1e-12));
  };
  return integrate_adaptive(integrand, from, to, opt).value;
}

double DampedConvolution::operator()(double s) {
  if (s < t0_) throw DomainError("damped convolution evaluated before t0");
  if (s == t0_) return 0.0;
  while (checkpoint(values_.size()) <= s) {
    const std::size_t j = values_.size() - 1;
    const double a = checkpoint(j), c = checkpoint(j + 1);
    values_.push_back(std::exp(-b_.integral(a, c, 1e-12)) * values_[j] + local(a, c));
  }
  std::size_t j = values_.size() - 1;
  while (checkpoint(j) > s) --j;
  const double a = checkpoint(j);
  if (a == s) return values_[j];
  return std::exp(-b_.integral(a, s, 1e-12)) * values_[j] + local(a, s);
}

}  // namespace stifflab
