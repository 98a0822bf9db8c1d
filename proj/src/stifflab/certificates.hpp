#pragma once

// Grid-based checks of the stability and instability hypothesis sets.
//
// Every certificate evaluates pointwise inequalities on a finite grid and
// reports, per condition, the minimal slack ("margin", positive means
// satisfied) and the first grid time where it is violated. A margin is
// refined by a local minimisation around its worst grid point so that it
// does not depend on grid density.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stifflab/coeffs.hpp"

namespace stifflab {

inline constexpr int kDefaultGridPoints = 2048;
inline constexpr double kDecisionTol = 1e-9;

enum class CertStatus { holds, fails, inconclusive };
std::string to_string(CertStatus s);

/// Checking window: linear spacing on [t_start, t_start + 10], log spacing
/// (in t - t_start) beyond; about half the points in each part.
struct Grid {
  double t_start = 0.0;
  double t_end = 100.0;
  int points = kDefaultGridPoints;

  std::vector<double> times() const;
};

struct ConditionResult {
  std::string id;
  CertStatus status = CertStatus::inconclusive;
  /// Minimal slack; NaN when the condition could not be evaluated.
  double margin = 0.0;
  std::optional<double> first_violation;
};

struct Verdict {
  std::string certificate;
  CertStatus status = CertStatus::inconclusive;
  Grid grid;
  std::vector<ConditionResult> conditions;
  std::map<std::string, double> parameters;
  std::vector<std::string> notes;

  const ConditionResult& condition(const std::string& id) const;
  /// {certificate, status, window, gridPoints, conditions, parameters, notes}
  json to_json() const;
};

/// Canonical certificate names, accepted by run_certificate.
const std::vector<std::string>& certificate_names();
bool is_stability_certificate(const std::string& name);
bool is_instability_certificate(const std::string& name);

/// (H1) b > 0 and 1/b + k >= M; (H2) d/dt e^{1/b+k} <= -(e^{1/b+k} - k)^2 / (2b).
/// M defaults to the minimum of 1/b + k over the grid.
Verdict check_lyapunov_stability(const SystemSpec& system, std::optional<double> M,
                                 const Grid& grid);

/// Constant b > 0: (H1') -k >= alpha; (H2') -k' + 2k^2/b <= 0.
Verdict check_const_damping_stability(const SystemSpec& system, std::optional<double> alpha,
                                      const Grid& grid);

/// integral_{t0}^{inf} exp(-integral_{t0}^{s} b) ds < inf. Margin is the
/// fitted tail exponent minus 1.1 (the convergence threshold).
Verdict check_necessary_fix1(const SystemSpec& system, const Grid& grid,
                             std::optional<double> horizon = std::nullopt);

/// fix1 together with fix2 (exp(-int b) < 2), fix3 (double integral < 1/2)
/// and fix4 (exp(-int b) * int |k| exp(int b) < 1/2).
Verdict check_fixed_point_stability(const SystemSpec& system, const Grid& grid,
                                    std::optional<double> horizon = std::nullopt);

/// b <= 0 and k <= 0.
Verdict check_instability_nonpositive(const SystemSpec& system, const Grid& grid);

/// (H5) -k >= alpha; (H6) k' + 2bk >= 0.
Verdict check_instability_chetaev(const SystemSpec& system, std::optional<double> alpha,
                                  const Grid& grid);

/// (H7) -k >= alpha; (H8) k' + 2bk <= 0; (H9) -k' - 2bk >= (alpha3/t) b^2 k^2 for t >= t3.
Verdict check_instability_chetaev2(const SystemSpec& system, std::optional<double> alpha,
                                   std::optional<double> alpha3, std::optional<double> t3,
                                   const Grid& grid);

/// With k <= 0 non-decreasing, checks b(t) >= b(t_start) e^{(t - t_start)/2}
/// (margin in log form). Throws InapplicableError if k fails the gate.
Verdict check_exponential_damping_implication(const SystemSpec& system, const Grid& grid);

/// Dispatch by canonical name with parameters {"M", "alpha", "alpha3", "t3",
/// "horizon"}; absent parameters are auto-suggested.
Verdict run_certificate(const std::string& name, const SystemSpec& system, const json& params,
                        const Grid& grid);

}  // namespace stifflab
