#pragma once

#include <functional>
#include <optional>
#include <string>

#include "stifflab/coeffs.hpp"

namespace stifflab {

enum class ConvergenceStatus { convergent, divergent, inconclusive };

std::string to_string(ConvergenceStatus s);

struct ConvergenceResult {
  ConvergenceStatus status = ConvergenceStatus::inconclusive;
  /// Partial integral plus extrapolated tail; present only when convergent.
  std::optional<double> value;
  /// Fitted p in |g(t)| ~ C (t - t0)^(-p) over the last decade.
  double tail_exponent = 0.0;
  double horizon_used = 0.0;
  /// Integral over [t0, horizon] (NaN if it overflowed).
  double partial = 0.0;
};

inline constexpr double kImproperDefaultTol = 1e-4;

/// t0 + 1e6 for damping in the power-law family, t0 + 1e3 otherwise.
double default_horizon(const CoefficientFn& damping, double t0);

/// Classify integral_{t0}^{inf} g from its behaviour up to `horizon`.
ConvergenceResult integrate_improper(const CoefficientFn& g, double t0,
                                     double tol = kImproperDefaultTol, double horizon = 1e6);

/// Same classification for an arbitrary integrand; panels are integrated with
/// adaptive Gauss-Kronrod quadrature.
ConvergenceResult integrate_improper(const std::function<double(double)>& g, double t0,
                                     double tol = kImproperDefaultTol, double horizon = 1e6);

}  // namespace stifflab
