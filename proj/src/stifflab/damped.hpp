#pragma once

#include <functional>
#include <vector>

#include "stifflab/coeffs.hpp"

namespace stifflab {

/// exp(-integral_{t0}^{t} b) as a coefficient. Closed form when b is built
/// from constants and 1/(t + shift) terms; otherwise a NegExp2Int wrapper.
CoefficientFn decay_factor(const CoefficientFn& b, double t0);

/// S(s) = exp(-B(s)) * integral_{t0}^{s} f(tau) exp(B(tau)) dtau with
/// B = integral_{t0} b, evaluated without forming exp(B) (which overflows
/// for growing damping). Values at a fixed lattice of checkpoints are built
/// lazily by the recurrence S(c') = exp(-int_c^c' b) S(c) + local integral.
/// Not safe for concurrent use.
class DampedConvolution {
 public:
  DampedConvolution(CoefficientFn b, std::function<double(double)> f, double t0);

  double operator()(double s);

 private:
  double local(double from, double to) const;
  double checkpoint(std::size_t j) const;

  CoefficientFn b_;
  std::function<double(double)> f_;
  double t0_;
  std::vector<double> values_;  // S at checkpoint(j)
};

}  // namespace stifflab
