#include "stifflab/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stifflab/errors.hpp"

namespace stifflab {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

[[noreturn]] void domain_fail(const std::string& kind, double t, const std::string& why) {
  throw DomainError(kind + " evaluated outside its domain at t=" + fmt_double(t) + " (" + why +
                    ")");
}

// Offsets from t0 of the memo panel boundaries: quarter steps up to 10, then
// geometric with ratio 1.05.
double lattice_offset(std::size_t j) {
  if (j <= 40) return 0.25 * static_cast<double>(j);
  return 10.0 * std::pow(1.05, static_cast<double>(j - 40));
}

std::size_t lattice_index_below(double offset) {
  if (offset < 10.0) return static_cast<std::size_t>(std::floor(offset / 0.25));
  std::size_t j = 40 + static_cast<std::size_t>(std::floor(std::log(offset / 10.0) / std::log(1.05)));
  while (lattice_offset(j + 1) <= offset) ++j;
  while (j > 0 && lattice_offset(j) > offset) --j;
  return j;
}

fn::Tabulated build_spline(std::vector<double> knots, std::vector<double> values,
                           const std::string& path) {
  const std::size_t n = knots.size();
  if (n < 2 || values.size() != n) {
    throw ConfigError(path, "needs at least 2 knots and one value per knot");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(knots[i]) || !std::isfinite(values[i])) {
      throw ConfigError(path, "non-finite knot or value");
    }
    if (i > 0 && !(knots[i] > knots[i - 1])) {
      throw ConfigError(path + "/knots", "must be strictly increasing");
    }
  }
  // Natural spline: M_0 = M_{n-1} = 0, tridiagonal system for the interior.
  std::vector<double> second(n, 0.0);
  if (n > 2) {
    std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = knots[i] - knots[i - 1];
      const double h1 = knots[i + 1] - knots[i];
      diag[i] = (h0 + h1) / 3.0;
      upper[i] = h1 / 6.0;
      rhs[i] = (values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0;
    }
    // Thomas algorithm; sub-diagonal entry of row i is h0/6.
    for (std::size_t i = 2; i + 1 < n; ++i) {
      const double lower = (knots[i] - knots[i - 1]) / 6.0;
      const double m = lower / diag[i - 1];
      diag[i] -= m * upper[i - 1];
      rhs[i] -= m * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      const double next = (i + 2 < n) ? second[i + 1] : 0.0;
      second[i] = (rhs[i] - upper[i] * next) / diag[i];
      if (i == 1) break;
    }
  }
  fn::Tabulated tab{std::move(knots), std::move(values), std::move(second), {}};
  tab.prefix.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = tab.knots[i + 1] - tab.knots[i];
    tab.prefix[i + 1] = tab.prefix[i] + h * (tab.values[i] + tab.values[i + 1]) / 2.0 -
                        h * h * h * (tab.second[i] + tab.second[i + 1]) / 24.0;
  }
  return tab;
}

std::size_t spline_interval(const fn::Tabulated& tab, double t) {
  if (!(t >= tab.knots.front() && t <= tab.knots.back())) {
    domain_fail("tabulated", t,
                "outside [" + fmt_double(tab.knots.front()) + ", " + fmt_double(tab.knots.back()) +
                    "]");
  }
  auto it = std::upper_bound(tab.knots.begin(), tab.knots.end(), t);
  std::size_t i = static_cast<std::size_t>(it - tab.knots.begin());
  if (i == 0) i = 1;
  if (i >= tab.knots.size()) i = tab.knots.size() - 1;
  return i - 1;
}

double spline_eval(const fn::Tabulated& tab, double t) {
  const std::size_t i = spline_interval(tab, t);
  const double h = tab.knots[i + 1] - tab.knots[i];
  const double a = (tab.knots[i + 1] - t) / h;
  const double b = (t - tab.knots[i]) / h;
  return a * tab.values[i] + b * tab.values[i + 1] +
         ((a * a * a - a) * tab.second[i] + (b * b * b - b) * tab.second[i + 1]) * h * h / 6.0;
}

double spline_derivative(const fn::Tabulated& tab, double t) {
  const std::size_t i = spline_interval(tab, t);
  const double h = tab.knots[i + 1] - tab.knots[i];
  const double a = (tab.knots[i + 1] - t) / h;
  const double b = (t - tab.knots[i]) / h;
  return (tab.values[i + 1] - tab.values[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * tab.second[i] +
         (3.0 * b * b - 1.0) / 6.0 * h * tab.second[i + 1];
}

// integral from knots[0] to t.
double spline_antiderivative(const fn::Tabulated& tab, double t) {
  const std::size_t i = spline_interval(tab, t);
  const double h = tab.knots[i + 1] - tab.knots[i];
  const double b = (t - tab.knots[i]) / h;
  const double a = 1.0 - b;
  const double partial =
      h * (tab.values[i] * (b - b * b / 2.0) + tab.values[i + 1] * b * b / 2.0 +
           h * h / 6.0 *
               (tab.second[i] * (-a * a * a * a / 4.0 + a * a / 2.0 - 0.25) +
                tab.second[i + 1] * (b * b * b * b / 4.0 - b * b / 2.0)));
  return tab.prefix[i] + partial;
}

double require_number(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(path + "/" + key, "missing required number");
  if (!it->is_number()) throw ConfigError(path + "/" + key, "expected a number");
  const double x = it->get<double>();
  if (!std::isfinite(x)) throw ConfigError(path + "/" + key, "must be finite");
  return x;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(path + "/" + it.key(), "unknown field");
  }
}

std::vector<double> number_array(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_array()) {
    throw ConfigError(path + "/" + key, "expected an array of numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& x = (*it)[i];
    if (!x.is_number() || !std::isfinite(x.get<double>())) {
      throw ConfigError(path + "/" + key + "/" + std::to_string(i), "expected a finite number");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

Domain Domain::intersect(const Domain& o) const {
  Domain d;
  if (lo > o.lo) {
    d.lo = lo;
    d.lo_open = lo_open;
  } else if (o.lo > lo) {
    d.lo = o.lo;
    d.lo_open = o.lo_open;
  } else {
    d.lo = lo;
    d.lo_open = lo_open || o.lo_open;
  }
  if (hi < o.hi) {
    d.hi = hi;
    d.hi_open = hi_open;
  } else if (o.hi < hi) {
    d.hi = o.hi;
    d.hi_open = o.hi_open;
  } else {
    d.hi = hi;
    d.hi_open = hi_open || o.hi_open;
  }
  return d;
}

CoefficientFn::CoefficientFn() : CoefficientFn(constant(0.0)) {}

CoefficientFn CoefficientFn::constant(double c) {
  if (!std::isfinite(c)) throw ConfigError("constant/c", "must be finite");
  return CoefficientFn(std::make_shared<CoefficientNode>(fn::Constant{c}));
}

CoefficientFn CoefficientFn::power_law(double c, double shift, double exponent) {
  if (!std::isfinite(c) || !std::isfinite(shift) || !std::isfinite(exponent)) {
    throw ConfigError("power_law", "parameters must be finite");
  }
  return CoefficientFn(std::make_shared<CoefficientNode>(fn::PowerLaw{c, shift, exponent}));
}

CoefficientFn CoefficientFn::exponential(double c, double rate) {
  if (!std::isfinite(c) || !std::isfinite(rate)) {
    throw ConfigError("exponential", "parameters must be finite");
  }
  return CoefficientFn(std::make_shared<CoefficientNode>(fn::Exponential{c, rate}));
}

CoefficientFn CoefficientFn::sum(std::vector<CoefficientFn> terms) {
  if (terms.empty()) throw ConfigError("sum", "needs at least one term");
  return CoefficientFn(std::make_shared<CoefficientNode>(fn::Sum{std::move(terms)}));
}

CoefficientFn CoefficientFn::product(std::vector<CoefficientFn> factors) {
  if (factors.empty()) throw ConfigError("product", "needs at least one factor");
  return CoefficientFn(std::make_shared<CoefficientNode>(fn::Product{std::move(factors)}));
}

CoefficientFn CoefficientFn::neg_exp2int(CoefficientFn base, double t0) {
  if (!std::isfinite(t0)) throw ConfigError("neg_exp2int/t0", "must be finite");
  return CoefficientFn(std::make_shared<CoefficientNode>(fn::NegExp2Int{std::move(base), t0}));
}

CoefficientFn CoefficientFn::tabulated(std::vector<double> knots, std::vector<double> values) {
  return CoefficientFn(
      std::make_shared<CoefficientNode>(build_spline(std::move(knots), std::move(values), "tabulated")));
}

CoefficientFn CoefficientFn::abs(CoefficientFn inner) {
  return CoefficientFn(std::make_shared<CoefficientNode>(fn::Abs{std::move(inner)}));
}

CoefficientFn operator+(const CoefficientFn& a, const CoefficientFn& b) {
  return CoefficientFn::sum({a, b});
}
CoefficientFn operator*(const CoefficientFn& a, const CoefficientFn& b) {
  return CoefficientFn::product({a, b});
}
CoefficientFn operator*(double s, const CoefficientFn& f) {
  return CoefficientFn::product({CoefficientFn::constant(s), f});
}

double CoefficientFn::eval(double t) const {
  return std::visit(
      overloaded{
          [](const fn::Constant& f) { return f.c; },
          [t](const fn::PowerLaw& f) {
            const double x = t + f.shift;
            if (!(x > 0.0)) domain_fail("power_law", t, "t + shift <= 0");
            return f.c * std::pow(x, f.exponent);
          },
          [t](const fn::Exponential& f) { return f.c * std::exp(f.rate * t); },
          [t](const fn::Sum& f) {
            double s = 0.0;
            for (const auto& term : f.terms) s += term.eval(t);
            return s;
          },
          [t](const fn::Product& f) {
            double p = 1.0;
            for (const auto& factor : f.factors) p *= factor.eval(t);
            return p;
          },
          [t](const fn::NegExp2Int& f) {
            return -std::exp(-2.0 * f.base.cumulative_integral(f.t0, t));
          },
          [t](const fn::Tabulated& f) { return spline_eval(f, t); },
          [t](const fn::Abs& f) { return std::abs(f.inner.eval(t)); },
      },
      node_->value);
}

double CoefficientFn::derivative(double t) const {
  return std::visit(
      overloaded{
          [](const fn::Constant&) { return 0.0; },
          [t](const fn::PowerLaw& f) {
            const double x = t + f.shift;
            if (!(x > 0.0)) domain_fail("power_law", t, "t + shift <= 0");
            if (f.exponent == 0.0) return 0.0;
            return f.c * f.exponent * std::pow(x, f.exponent - 1.0);
          },
          [t](const fn::Exponential& f) { return f.c * f.rate * std::exp(f.rate * t); },
          [t](const fn::Sum& f) {
            double s = 0.0;
            for (const auto& term : f.terms) s += term.derivative(t);
            return s;
          },
          [t](const fn::Product& f) {
            double total = 0.0;
            for (std::size_t i = 0; i < f.factors.size(); ++i) {
              double p = f.factors[i].derivative(t);
              for (std::size_t j = 0; j < f.factors.size(); ++j) {
                if (j != i) p *= f.factors[j].eval(t);
              }
              total += p;
            }
            return total;
          },
          [t](const fn::NegExp2Int& f) {
            // d/dt -exp(-2B) = 2 b exp(-2B)
            return 2.0 * f.base.eval(t) * std::exp(-2.0 * f.base.cumulative_integral(f.t0, t));
          },
          [t](const fn::Tabulated& f) { return spline_derivative(f, t); },
          [t](const fn::Abs& f) {
            const double v = f.inner.eval(t);
            const double d = f.inner.derivative(t);
            if (v > 0.0) return d;
            if (v < 0.0) return -d;
            return std::abs(d);
          },
      },
      node_->value);
}

bool CoefficientFn::has_exact_integral() const {
  return std::visit(overloaded{
                        [](const fn::Constant&) { return true; },
                        [](const fn::PowerLaw&) { return true; },
                        [](const fn::Exponential&) { return true; },
                        [](const fn::Tabulated&) { return true; },
                        [](const fn::Sum& f) {
                          return std::all_of(f.terms.begin(), f.terms.end(),
                                             [](const auto& x) { return x.has_exact_integral(); });
                        },
                        [](const auto&) { return false; },
                    },
                    node_->value);
}

double CoefficientFn::integral(double a, double b, double tol) const {
  if (a == b) return 0.0;
  if (!(tol > 0.0)) throw InvalidArgument("quadrature tolerance must be positive");
  const Domain dom = domain();
  if (!dom.contains(a)) domain_fail(kind(), a, "integration bound");
  if (!dom.contains(b)) domain_fail(kind(), b, "integration bound");
  return std::visit(
      overloaded{
          [&](const fn::Constant& f) { return f.c * (b - a); },
          [&](const fn::PowerLaw& f) {
            const double xa = a + f.shift;
            const double rel = (b - a) / xa;
            if (f.exponent == -1.0) return f.c * std::log1p(rel);
            const double q = f.exponent + 1.0;
            return f.c / q * std::pow(xa, q) * std::expm1(q * std::log1p(rel));
          },
          [&](const fn::Exponential& f) {
            if (f.rate == 0.0) return f.c * (b - a);
            return f.c / f.rate * std::exp(f.rate * a) * std::expm1(f.rate * (b - a));
          },
          [&](const fn::Sum& f) {
            double s = 0.0;
            for (const auto& term : f.terms) s += term.integral(a, b, tol);
            return s;
          },
          [&](const fn::Tabulated& f) {
            return spline_antiderivative(f, b) - spline_antiderivative(f, a);
          },
          [&](const auto&) {
            QuadOptions opt;
            opt.rel = tol;
            return integrate_adaptive([this](double t) { return eval(t); }, a, b, opt).value;
          },
      },
      node_->value);
}

double CoefficientFn::cumulative_integral(double t0, double t, double tol) const {
  if (t == t0) return 0.0;
  if (const auto* s = get_if<fn::Sum>(*this)) {
    double total = 0.0;
    for (const auto& term : s->terms) total += term.cumulative_integral(t0, t, tol);
    return total;
  }
  if (has_exact_integral() || t < t0) return integral(t0, t, tol);
  if (!domain().contains(t0, t)) domain_fail(kind(), domain().contains(t0) ? t : t0, "integral");

  const std::size_t j = lattice_index_below(t - t0);
  double base = 0.0;
  {
    std::lock_guard<std::mutex> lock(node_->memo_mutex);
    auto& sums = node_->memo[{t0, tol}];
    if (sums.empty()) sums.push_back(0.0);
    while (sums.size() <= j) {
      const std::size_t m = sums.size() - 1;
      sums.push_back(sums.back() +
                     integral(t0 + lattice_offset(m), t0 + lattice_offset(m + 1), tol));
    }
    base = sums[j];
  }
  return base + integral(t0 + lattice_offset(j), t, tol);
}

Domain CoefficientFn::domain() const {
  return std::visit(overloaded{
                        [](const fn::PowerLaw& f) {
                          Domain d;
                          d.lo = -f.shift;
                          d.lo_open = true;
                          return d;
                        },
                        [](const fn::Tabulated& f) {
                          Domain d;
                          d.lo = f.knots.front();
                          d.lo_open = false;
                          d.hi = f.knots.back();
                          d.hi_open = false;
                          return d;
                        },
                        [](const fn::Sum& f) {
                          Domain d;
                          for (const auto& x : f.terms) d = d.intersect(x.domain());
                          return d;
                        },
                        [](const fn::Product& f) {
                          Domain d;
                          for (const auto& x : f.factors) d = d.intersect(x.domain());
                          return d;
                        },
                        [](const fn::NegExp2Int& f) { return f.base.domain(); },
                        [](const fn::Abs& f) { return f.inner.domain(); },
                        [](const auto&) { return Domain{}; },
                    },
                    node_->value);
}

bool CoefficientFn::derivative_trusted() const {
  return std::visit(overloaded{
                        [](const fn::Tabulated& f) { return f.knots.size() >= 4; },
                        [](const fn::Sum& f) {
                          return std::all_of(f.terms.begin(), f.terms.end(),
                                             [](const auto& x) { return x.derivative_trusted(); });
                        },
                        [](const fn::Product& f) {
                          return std::all_of(f.factors.begin(), f.factors.end(),
                                             [](const auto& x) { return x.derivative_trusted(); });
                        },
                        [](const fn::NegExp2Int& f) { return f.base.derivative_trusted(); },
                        [](const fn::Abs& f) { return f.inner.derivative_trusted(); },
                        [](const auto&) { return true; },
                    },
                    node_->value);
}

std::string CoefficientFn::kind() const {
  return std::visit(overloaded{
                        [](const fn::Constant&) { return std::string("constant"); },
                        [](const fn::PowerLaw&) { return std::string("power_law"); },
                        [](const fn::Exponential&) { return std::string("exponential"); },
                        [](const fn::Sum&) { return std::string("sum"); },
                        [](const fn::Product&) { return std::string("product"); },
                        [](const fn::NegExp2Int&) { return std::string("neg_exp2int"); },
                        [](const fn::Tabulated&) { return std::string("tabulated"); },
                        [](const fn::Abs&) { return std::string("abs"); },
                    },
                    node_->value);
}

namespace {

// A decaying exponential, possibly times constants and power laws.
bool vanishes_exponentially(const CoefficientFn& f) {
  if (const auto* e = get_if<fn::Exponential>(f)) return e->rate < 0.0;
  const auto* p = get_if<fn::Product>(f);
  if (!p) return false;
  bool decaying = false;
  for (const auto& x : p->factors) {
    if (const auto* e = get_if<fn::Exponential>(x)) {
      if (e->rate > 0.0) return false;
      decaying = decaying || e->rate < 0.0;
    } else if (!get_if<fn::Constant>(x) && !get_if<fn::PowerLaw>(x)) {
      return false;
    }
  }
  return decaying;
}

void scan_family(const CoefficientFn& f, bool& any_power, bool& any_exp) {
  std::visit(overloaded{
                 [&](const fn::PowerLaw&) { any_power = true; },
                 [&](const fn::Exponential&) { any_exp = true; },
                 [&](const fn::Sum& s) {
                   // Exponentially vanishing terms do not set the tail class.
                   bool all_vanish = true;
                   for (const auto& x : s.terms) all_vanish = all_vanish && vanishes_exponentially(x);
                   for (const auto& x : s.terms) {
                     if (all_vanish || !vanishes_exponentially(x)) scan_family(x, any_power, any_exp);
                   }
                 },
                 [&](const fn::Product& p) {
                   for (const auto& x : p.factors) scan_family(x, any_power, any_exp);
                 },
                 [&](const fn::NegExp2Int& n) { scan_family(n.base, any_power, any_exp); },
                 [&](const fn::Abs& a) { scan_family(a.inner, any_power, any_exp); },
                 [](const auto&) {},
             },
             f.node().value);
}

}  // namespace

bool CoefficientFn::is_power_law_family() const {
  bool any_power = false;
  bool any_exp = false;
  scan_family(*this, any_power, any_exp);
  return any_power && !any_exp;
}

CoefficientFn CoefficientFn::simplified() const {
  return std::visit(
      overloaded{
          [&](const fn::PowerLaw& f) {
            if (f.exponent == 0.0 || f.c == 0.0) return constant(f.c);
            return *this;
          },
          [&](const fn::Exponential& f) {
            if (f.rate == 0.0 || f.c == 0.0) return constant(f.c);
            return *this;
          },
          [](const fn::Abs& f) {
            CoefficientFn in = f.inner.simplified();
            if (const auto* c = get_if<fn::Constant>(in)) return constant(std::abs(c->c));
            if (const auto* p = get_if<fn::PowerLaw>(in)) {
              return power_law(std::abs(p->c), p->shift, p->exponent);
            }
            if (const auto* e = get_if<fn::Exponential>(in)) {
              return exponential(std::abs(e->c), e->rate);
            }
            if (get_if<fn::Abs>(in)) return in;
            return CoefficientFn::abs(in);
          },
          [](const fn::Product& f) {
            double scalar = 1.0;
            std::vector<fn::PowerLaw> powers;
            double exp_c = 1.0;
            double exp_rate = 0.0;
            bool any_exp = false;
            std::vector<CoefficientFn> rest;
            std::vector<CoefficientFn> stack(f.factors.rbegin(), f.factors.rend());
            while (!stack.empty()) {
              CoefficientFn x = stack.back().simplified();
              stack.pop_back();
              if (const auto* inner = get_if<fn::Product>(x)) {
                for (auto it = inner->factors.rbegin(); it != inner->factors.rend(); ++it) {
                  stack.push_back(*it);
                }
              } else if (const auto* c = get_if<fn::Constant>(x)) {
                scalar *= c->c;
              } else if (const auto* p = get_if<fn::PowerLaw>(x)) {
                scalar *= p->c;
                auto same = std::find_if(powers.begin(), powers.end(),
                                         [&](const fn::PowerLaw& q) { return q.shift == p->shift; });
                if (same == powers.end()) {
                  powers.push_back({1.0, p->shift, p->exponent});
                } else {
                  same->exponent += p->exponent;
                }
              } else if (const auto* e = get_if<fn::Exponential>(x)) {
                any_exp = true;
                exp_c *= e->c;
                exp_rate += e->rate;
              } else {
                rest.push_back(x);
              }
            }
            scalar *= exp_c;
            if (scalar == 0.0) return constant(0.0);
            std::vector<CoefficientFn> out;
            for (const auto& p : powers) {
              if (p.exponent != 0.0) out.push_back(power_law(1.0, p.shift, p.exponent));
            }
            if (any_exp && exp_rate != 0.0) out.push_back(exponential(1.0, exp_rate));
            for (auto& r : rest) out.push_back(std::move(r));
            if (out.empty()) return constant(scalar);
            if (out.size() == 1) {
              if (const auto* p = get_if<fn::PowerLaw>(out[0])) {
                return power_law(scalar, p->shift, p->exponent);
              }
              if (const auto* e = get_if<fn::Exponential>(out[0])) {
                return exponential(scalar, e->rate);
              }
              if (scalar == 1.0) return out[0];
            }
            if (scalar != 1.0) out.insert(out.begin(), constant(scalar));
            return product(std::move(out));
          },
          [](const fn::Sum& f) {
            double constant_part = 0.0;
            std::vector<fn::PowerLaw> powers;
            std::vector<fn::Exponential> exps;
            std::vector<CoefficientFn> rest;
            std::vector<CoefficientFn> stack(f.terms.rbegin(), f.terms.rend());
            while (!stack.empty()) {
              CoefficientFn x = stack.back().simplified();
              stack.pop_back();
              if (const auto* inner = get_if<fn::Sum>(x)) {
                for (auto it = inner->terms.rbegin(); it != inner->terms.rend(); ++it) {
                  stack.push_back(*it);
                }
              } else if (const auto* c = get_if<fn::Constant>(x)) {
                constant_part += c->c;
              } else if (const auto* p = get_if<fn::PowerLaw>(x)) {
                auto same = std::find_if(powers.begin(), powers.end(), [&](const fn::PowerLaw& q) {
                  return q.shift == p->shift && q.exponent == p->exponent;
                });
                if (same == powers.end()) {
                  powers.push_back(*p);
                } else {
                  same->c += p->c;
                }
              } else if (const auto* e = get_if<fn::Exponential>(x)) {
                auto same = std::find_if(exps.begin(), exps.end(),
                                         [&](const fn::Exponential& q) { return q.rate == e->rate; });
                if (same == exps.end()) {
                  exps.push_back(*e);
                } else {
                  same->c += e->c;
                }
              } else {
                rest.push_back(x);
              }
            }
            std::vector<CoefficientFn> out;
            if (constant_part != 0.0) out.push_back(constant(constant_part));
            for (const auto& p : powers) {
              if (p.c != 0.0) out.push_back(power_law(p.c, p.shift, p.exponent));
            }
            for (const auto& e : exps) {
              if (e.c != 0.0) out.push_back(exponential(e.c, e.rate));
            }
            for (auto& r : rest) out.push_back(std::move(r));
            if (out.empty()) return constant(0.0);
            if (out.size() == 1) return out[0];
            return sum(std::move(out));
          },
          [](const fn::NegExp2Int& f) { return neg_exp2int(f.base.simplified(), f.t0); },
          [&](const auto&) { return *this; },
      },
      node_->value);
}

CoefficientFn CoefficientFn::from_json(const json& spec, const std::string& path) {
  if (spec.is_number()) {
    const double c = spec.get<double>();
    if (!std::isfinite(c)) throw ConfigError(path, "must be finite");
    return constant(c);
  }
  if (!spec.is_object() || spec.size() != 1) {
    throw ConfigError(path, "coefficient must be an object with exactly one variant key");
  }
  const std::string key = spec.begin().key();
  const json& body = spec.begin().value();
  const std::string here = path + "/" + key;
  if (key == "sum" || key == "product") {
    if (!body.is_array()) throw ConfigError(here, "expected an array of coefficients");
    if (body.empty()) throw ConfigError(here, "must not be empty");
    std::vector<CoefficientFn> parts;
    for (std::size_t i = 0; i < body.size(); ++i) {
      parts.push_back(from_json(body[i], here + "/" + std::to_string(i)));
    }
    return key == "sum" ? sum(std::move(parts)) : product(std::move(parts));
  }
  if (key == "abs") return abs(from_json(body, here));
  if (!body.is_object()) throw ConfigError(here, "expected an object of parameters");
  if (key == "constant") {
    reject_unknown(body, {"c"}, here);
    return constant(require_number(body, "c", here));
  }
  if (key == "power_law") {
    reject_unknown(body, {"c", "shift", "exponent"}, here);
    const double c = require_number(body, "c", here);
    const double shift = require_number(body, "shift", here);
    const double exponent = require_number(body, "exponent", here);
    return power_law(c, shift, exponent);
  }
  if (key == "exponential") {
    reject_unknown(body, {"c", "rate"}, here);
    const double c = require_number(body, "c", here);
    const double rate = require_number(body, "rate", here);
    return exponential(c, rate);
  }
  if (key == "neg_exp2int") {
    reject_unknown(body, {"base", "t0"}, here);
    if (!body.contains("base")) throw ConfigError(here + "/base", "missing required coefficient");
    CoefficientFn base = from_json(body.at("base"), here + "/base");
    return neg_exp2int(std::move(base), require_number(body, "t0", here));
  }
  if (key == "tabulated") {
    reject_unknown(body, {"knots", "values", "interpolation"}, here);
    if (body.contains("interpolation") && body.at("interpolation") != "cubic") {
      throw ConfigError(here + "/interpolation", "only \"cubic\" is supported");
    }
    std::vector<double> knots = number_array(body, "knots", here);
    std::vector<double> values = number_array(body, "values", here);
    return CoefficientFn(std::make_shared<CoefficientNode>(
        build_spline(std::move(knots), std::move(values), here)));
  }
  throw ConfigError(here, "unknown coefficient variant");
}

json CoefficientFn::to_json() const {
  return std::visit(
      overloaded{
          [](const fn::Constant& f) { return json{{"constant", {{"c", f.c}}}}; },
          [](const fn::PowerLaw& f) {
            return json{{"power_law", {{"c", f.c}, {"shift", f.shift}, {"exponent", f.exponent}}}};
          },
          [](const fn::Exponential& f) {
            return json{{"exponential", {{"c", f.c}, {"rate", f.rate}}}};
          },
          [](const fn::Sum& f) {
            json arr = json::array();
            for (const auto& x : f.terms) arr.push_back(x.to_json());
            return json{{"sum", arr}};
          },
          [](const fn::Product& f) {
            json arr = json::array();
            for (const auto& x : f.factors) arr.push_back(x.to_json());
            return json{{"product", arr}};
          },
          [](const fn::NegExp2Int& f) {
            return json{{"neg_exp2int", {{"base", f.base.to_json()}, {"t0", f.t0}}}};
          },
          [](const fn::Tabulated& f) {
            return json{{"tabulated",
                         {{"knots", f.knots}, {"values", f.values}, {"interpolation", "cubic"}}}};
          },
          [](const fn::Abs& f) { return json{{"abs", f.inner.to_json()}}; },
      },
      node_->value);
}

void SystemSpec::require_defined_on(double t_end) const {
  for (const auto* c : {&b, &k}) {
    const Domain d = c->domain();
    const char* name = (c == &b) ? "b" : "k";
    if (!d.contains(t0)) {
      throw DomainError(std::string(name) + " is not defined at t0=" + fmt_double(t0));
    }
    if (!d.contains(t_end)) {
      throw DomainError(std::string(name) + " is not defined at t=" + fmt_double(t_end));
    }
  }
}

double SystemSpec::domain_end() const { return b.domain().intersect(k.domain()).hi; }

SystemSpec SystemSpec::from_json(const json& spec, const std::string& path) {
  if (!spec.is_object()) throw ConfigError(path, "expected an object with b, k, t0");
  reject_unknown(spec, {"b", "k", "t0"}, path);
  if (!spec.contains("b")) throw ConfigError(path + "/b", "missing required coefficient");
  if (!spec.contains("k")) throw ConfigError(path + "/k", "missing required coefficient");
  SystemSpec sys;
  sys.b = CoefficientFn::from_json(spec.at("b"), path + "/b");
  sys.k = CoefficientFn::from_json(spec.at("k"), path + "/k");
  sys.t0 = spec.contains("t0") ? require_number(spec, "t0", path) : 0.0;
  return sys;
}

json SystemSpec::to_json() const {
  return json{{"b", b.to_json()}, {"k", k.to_json()}, {"t0", t0}};
}

}  // namespace stifflab
