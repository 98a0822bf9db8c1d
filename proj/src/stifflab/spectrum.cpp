#include "stifflab/spectrum.hpp"

#include <cmath>

#include "stifflab/errors.hpp"
#include "stifflab/ode.hpp"

namespace stifflab {

EigenPair eigenvalues(const SystemSpec& system, double t) {
  const double b = system.b.eval(t);
  const double k = system.k.eval(t);
  EigenPair out;
  out.discriminant = b * b - 4.0 * k;
  if (out.discriminant >= 0.0) {
    // Cancellation-free root pair: q is the larger-magnitude root.
    const double sd = std::sqrt(out.discriminant);
    const double q = -0.5 * (b + std::copysign(sd, b));
    if (q == 0.0) return out;
    const double r1 = q, r2 = k / q;
    out.lambda_minus = std::min(r1, r2);
    out.lambda_plus = std::max(r1, r2);
  } else {
    const double im = 0.5 * std::sqrt(-out.discriminant);
    out.lambda_minus = {-0.5 * b, -im};
    out.lambda_plus = {-0.5 * b, im};
  }
  return out;
}

std::pair<double, double> eigenvalue_rates(const SystemSpec& system, double t) {
  const double b = system.b.eval(t);
  const double k = system.k.eval(t);
  const double disc = b * b - 4.0 * k;
  if (!(disc > 0.0)) {
    throw InapplicableError("eigenvalue rates need b^2 - 4k > 0; got " + format_double(disc) +
                            " at t=" + format_double(t));
  }
  const double sd = std::sqrt(disc);
  const double db = system.b.derivative(t);
  const double dk = system.k.derivative(t);
  const double minus = 0.5 * (-1.0 - b / sd) * db + dk / sd;
  const double plus = 0.5 * (-1.0 + b / sd) * db - dk / sd;
  return {minus, plus};
}

}  // namespace stifflab
