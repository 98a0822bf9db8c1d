#pragma once

// Run configuration, command dispatch and report emission for the CLI and
// the C API.
//
// A config is a strict JSON document; unknown keys and out-of-range values
// raise ConfigError naming the offending field. parse_config fills every
// default, and RunConfig::to_json echoes the complete config, so a run can
// be reproduced from its report alone.

#include <optional>
#include <string>
#include <vector>

#include "stifflab/certificates.hpp"
#include "stifflab/coeffs.hpp"
#include "stifflab/ode.hpp"

namespace stifflab {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Command { check, simulate, picard, synthesize, audit_rate, probe };
std::string to_string(Command c);
Command command_from_string(const std::string& name);

/// Process exit codes of `stifflab`.
enum ExitCode : int {
  kExitOk = 0,
  kExitOperational = 1,
  kExitNotCertified = 2,
  kExitInconclusive = 3,
};

struct RunConfig {
  Command command = Command::check;
  /// Absent only for audit-rate, which builds its own system.
  std::optional<SystemSpec> system;
  /// For synthesize: the coefficient to build ("stiffness" from b, or
  /// "damping" from k).
  std::string target;
  /// Window length: simulation end, certificate window and probe horizon
  /// are all t0 + horizon.
  double horizon = 100.0;
  int grid = kDefaultGridPoints;
  Tolerances tol;
  State ic{1.0, 0.0};
  double epsilon = 0.1;
  double delta = 0.0;  // probe radius; 0 means epsilon / 10
  int directions = 16;
  double alpha = 2.0;
  double picard_tol = 1e-10;
  /// check: certificates to run; empty means every certificate.
  std::vector<std::string> certificates;
  /// check: per-certificate parameter objects, keyed by certificate name.
  json parameters = json::object();
  /// simulate: extra CSV columns, a subset of E, V, lambda_minus, lambda_plus.
  std::vector<std::string> columns;
  std::string out_dir = ".";

  json to_json() const;
};

/// Parses and validates a config document. Syntax errors report line and
/// column; schema errors name the field path.
RunConfig parse_config(const std::string& text);
RunConfig config_from_json(const json& doc);

/// Command-line overrides; set fields win over the config file.
struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<double> horizon;
  std::optional<double> epsilon;
  std::optional<double> alpha;
  std::optional<double> tol;  // relative tolerance
  std::optional<int> grid;
};
void apply_overrides(RunConfig& config, const Overrides& overrides);
/// {"out", "horizon", "epsilon", "alpha", "tol", "grid"}, all optional.
Overrides overrides_from_json(const json& doc);

struct Report {
  json config;
  std::vector<Verdict> verdicts;
  json result = json::object();
  std::vector<std::string> artifacts;
  /// Human-readable summary table (printed by the CLI).
  std::string summary;
  double wall_time = 0.0;
  int exit_code = kExitOk;

  /// Keys are sorted, so everything except wallTime is byte-stable.
  json to_json() const;
};

/// Runs the command, writes its artifacts plus `<command>_report.json` into
/// config.out_dir, and returns the report. Errors propagate as exceptions.
Report run(const RunConfig& config);

/// Exit code for a set of verdicts. With `requested` set (an explicit
/// certificate list) any failing certificate or any holding instability
/// certificate gives 2; otherwise instability evidence (an instability
/// certificate holding, or fix1 failing) gives 2, a holding stability
/// certificate gives 0 and anything else 3.
int exit_code_for(const std::vector<Verdict>& verdicts, bool requested);

/// Trajectory CSV `t,u,v[,E][,V][,lambda_minus][,lambda_plus]`; eigenvalue
/// columns hold real parts.
void write_trajectory_csv(std::ostream& out, const SystemSpec& system, const Trajectory& tr,
                          const std::vector<std::string>& columns);

}  // namespace stifflab
