#pragma once

#include <complex>
#include <utility>

#include "stifflab/coeffs.hpp"

namespace stifflab {

/// Eigenvalues of the frozen companion matrix [[0, 1], [-k, -b]].
struct EigenPair {
  std::complex<double> lambda_minus;
  std::complex<double> lambda_plus;
  double discriminant = 0.0;  // b^2 - 4k

  bool real() const { return discriminant >= 0.0; }
};

EigenPair eigenvalues(const SystemSpec& system, double t);

/// (d lambda_minus / dt, d lambda_plus / dt). Requires b^2 - 4k > 0;
/// throws InapplicableError otherwise.
std::pair<double, double> eigenvalue_rates(const SystemSpec& system, double t);

}  // namespace stifflab
