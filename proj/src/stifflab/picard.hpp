#pragma once

// The integral-form solution map
//   F[u](t) = u0 + u1 int e^{-B} - int_{t0}^{t} e^{-B(s)} int_{t0}^{s} k e^{B} u dtau ds,
// B(t) = int_{t0}^{t} b, discretised on a fixed grid, and its Picard iteration.

#include <optional>
#include <ostream>
#include <vector>

#include "stifflab/ode.hpp"

namespace stifflab {

/// Samples on an ascending grid with local cubic interpolation.
struct GridFunction {
  std::vector<double> times;
  std::vector<double> values;

  double eval(double t) const;
  double sup_distance(const GridFunction& other) const;
};

/// Default Picard grid: linear then log spacing from t0 up to the first time
/// where e^{-B} < 1e-8, or t0 + 100 if that comes first.
std::vector<double> picard_grid(const SystemSpec& system, int points = 4001);

struct FImage {
  GridFunction value;       // F[u]
  GridFunction derivative;  // F[u]'
};

/// F[u] and F[u]' on u's grid.
FImage apply_F(const SystemSpec& system, const GridFunction& u, State ic);

struct FixedPointResult {
  GridFunction solution;
  GridFunction derivative;
  int iterations = 0;
  /// max(|w_n - w_{n-1}|, |w_n' - w_{n-1}'|) in sup norm, per iteration.
  std::vector<double> residual_history;
  std::vector<double> contraction_ratios;

  void write_csv(std::ostream& out) const;
  json to_json() const;
};

/// Iterates w_n = F[w_{n-1}] from w_0 = u0 until the sup-norm step in both
/// value and derivative is below tol. Throws SolverError after max_iter.
FixedPointResult picard_solve(const SystemSpec& system, State ic, const std::vector<double>& grid,
                              double tol = 1e-10, int max_iter = 200);

struct MembershipReport {
  bool defined = false;  // false when the fix1 integral diverges or is inconclusive
  bool member = false;
  double epsilon = 0.0;
  double integral = 0.0;  // int_{t0}^{inf} e^{-B}
  double u1_bound = 0.0;  // min(eps/4, eps/(4 integral))
  bool u0_gate = false;
  bool u1_gate = false;
  std::optional<double> sup_u, sup_v;
  double horizon = 0.0;  // time up to which the sup bounds were checked

  json to_json() const;
};

/// B_eps gates on the initial data and, when a solution is supplied, the
/// sup bounds |u|, |u'| <= eps over its grid.
MembershipReport b_epsilon_membership(const SystemSpec& system, State ic, double epsilon,
                                      const FixedPointResult* solution = nullptr,
                                      std::optional<double> horizon = std::nullopt);

}  // namespace stifflab
