#pragma once

#include <functional>
#include <span>
#include <vector>

namespace stifflab {

inline constexpr double kDefaultRelTol = 1e-10;
inline constexpr double kDefaultAbsTol = 1e-12;

struct QuadOptions {
  double rel = kDefaultRelTol;
  double abs = kDefaultAbsTol;
  int max_intervals = 4000;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of f over [a, b].
/// Throws QuadratureError if the interval budget runs out before
/// error <= max(abs, rel*|value|), or if f produces a non-finite value.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              const QuadOptions& opt = {});

/// Running integral of sampled data on an arbitrary ascending grid:
/// out[i] = integral from times[0] to times[i]. Each panel integrates the cubic
/// through four neighbouring samples, so the result is fourth-order accurate
/// on non-uniform grids. Needs at least 4 samples.
std::vector<double> cumulative_integral_sampled(std::span<const double> times,
                                                std::span<const double> values);

/// Integral over one panel [times[i], times[i+1]] of the cubic through the
/// four samples nearest that panel, with sample values supplied by `value_at`.
double panel_integral(std::span<const double> times, std::size_t i,
                      const std::function<double(std::size_t)>& value_at);

}  // namespace stifflab
