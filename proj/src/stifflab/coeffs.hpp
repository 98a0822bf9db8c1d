#pragma once

// Coefficient functions b(t), k(t) of u'' + b u' + k u = 0.
//
// A CoefficientFn is an immutable expression from a small closed family
// (constants, shifted power laws, exponentials, sums, products, the derived
// stiffness -exp(-2 * int b), cubic tables and an absolute-value wrapper).
// Every member supports evaluation, an exact derivative and a cumulative
// integral; the integral is closed-form wherever the variant admits one and
// adaptive quadrature otherwise.

#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "stifflab/quadrature.hpp"

namespace stifflab {

using json = nlohmann::json;

struct CoefficientNode;

/// Interval on which a coefficient is defined.
struct Domain {
  double lo = -std::numeric_limits<double>::infinity();
  bool lo_open = true;
  double hi = std::numeric_limits<double>::infinity();
  bool hi_open = true;

  bool contains(double t) const {
    return (lo_open ? t > lo : t >= lo) && (hi_open ? t < hi : t <= hi);
  }
  bool contains(double a, double b) const { return contains(a) && contains(b); }
  Domain intersect(const Domain& o) const;
};

class CoefficientFn {
 public:
  /// The zero function.
  CoefficientFn();

  static CoefficientFn constant(double c);
  /// c * (t + shift)^exponent, defined for t + shift > 0.
  static CoefficientFn power_law(double c, double shift, double exponent);
  /// c * exp(rate * t).
  static CoefficientFn exponential(double c, double rate);
  static CoefficientFn sum(std::vector<CoefficientFn> terms);
  static CoefficientFn product(std::vector<CoefficientFn> factors);
  /// -exp(-2 * integral_{t0}^{t} base).
  static CoefficientFn neg_exp2int(CoefficientFn base, double t0);
  /// Natural cubic spline through (knots, values). Knots strictly increasing.
  static CoefficientFn tabulated(std::vector<double> knots, std::vector<double> values);
  /// |inner(t)|; derivative is taken one-sided (from the right) at zeros.
  static CoefficientFn abs(CoefficientFn inner);

  /// Build from the JSON coefficient description, e.g.
  /// {"power_law": {"c": -1, "shift": 1, "exponent": -4}}.
  static CoefficientFn from_json(const json& spec, const std::string& path = "");
  json to_json() const;

  double eval(double t) const;
  double derivative(double t) const;

  /// integral_{a}^{b} f with relative tolerance `tol` (closed form when available).
  double integral(double a, double b, double tol = kDefaultRelTol) const;

  /// integral_{t0}^{t} f. For variants without a closed form, partial sums at
  /// fixed panel boundaries measured from t0 are memoised on this instance,
  /// so results do not depend on the order of earlier calls.
  double cumulative_integral(double t0, double t, double tol = kDefaultRelTol) const;

  bool has_exact_integral() const;
  /// False when a tabulated component is too coarse for its spline
  /// derivative to be trusted.
  bool derivative_trusted() const;
  Domain domain() const;

  /// Variant name as used in the JSON schema ("constant", "power_law", ...).
  std::string kind() const;
  /// True if any component is a power law and none is an exponential. Sum
  /// terms that decay exponentially are ignored.
  bool is_power_law_family() const;

  /// Algebraically normalised copy: folds constants, merges power laws with a
  /// common shift and exponentials, strips |.| from fixed-sign terms.
  CoefficientFn simplified() const;

  const CoefficientNode& node() const { return *node_; }

 private:
  explicit CoefficientFn(std::shared_ptr<const CoefficientNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const CoefficientNode> node_;
};

CoefficientFn operator+(const CoefficientFn& a, const CoefficientFn& b);
CoefficientFn operator*(const CoefficientFn& a, const CoefficientFn& b);
CoefficientFn operator*(double s, const CoefficientFn& f);

namespace fn {

struct Constant {
  double c;
};
struct PowerLaw {
  double c, shift, exponent;
};
struct Exponential {
  double c, rate;
};
struct Sum {
  std::vector<CoefficientFn> terms;
};
struct Product {
  std::vector<CoefficientFn> factors;
};
struct NegExp2Int {
  CoefficientFn base;
  double t0;
};
struct Tabulated {
  std::vector<double> knots;
  std::vector<double> values;
  std::vector<double> second;  // spline second derivatives at knots
  std::vector<double> prefix;  // integral from knots[0] to knots[i]
};
struct Abs {
  CoefficientFn inner;
};

}  // namespace fn

struct CoefficientNode {
  using Variant = std::variant<fn::Constant, fn::PowerLaw, fn::Exponential, fn::Sum, fn::Product,
                               fn::NegExp2Int, fn::Tabulated, fn::Abs>;

  explicit CoefficientNode(Variant v) : value(std::move(v)) {}

  Variant value;

  // Memoised cumulative sums at panel boundaries, keyed by (t0, tol).
  mutable std::mutex memo_mutex;
  mutable std::map<std::pair<double, double>, std::vector<double>> memo;
};

template <class T>
const T* get_if(const CoefficientFn& f) {
  return std::get_if<T>(&f.node().value);
}

/// The pair (b, k) plus initial time: u'' + b(t) u' + k(t) u = 0, t >= t0.
struct SystemSpec {
  CoefficientFn b;
  CoefficientFn k;
  double t0 = 0.0;

  /// Throws DomainError unless both coefficients are defined on [t0, t_end].
  void require_defined_on(double t_end) const;
  /// Largest time at which both coefficients are defined (may be +inf).
  double domain_end() const;

  static SystemSpec from_json(const json& spec, const std::string& path = "system");
  json to_json() const;
};

}  // namespace stifflab
