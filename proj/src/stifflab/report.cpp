#include "stifflab/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "stifflab/errors.hpp"
#include "stifflab/functionals.hpp"
#include "stifflab/picard.hpp"
#include "stifflab/spectrum.hpp"
#include "stifflab/synth.hpp"

namespace stifflab {

namespace {

const std::vector<std::pair<Command, std::string>>& command_table() {
  static const std::vector<std::pair<Command, std::string>> table = {
      {Command::check, "check"},           {Command::simulate, "simulate"},
      {Command::picard, "picard"},         {Command::synthesize, "synthesize"},
      {Command::audit_rate, "audit-rate"}, {Command::probe, "probe"},
  };
  return table;
}

const std::vector<std::string> kExtraColumns = {"E", "V", "lambda_minus", "lambda_plus"};

// Field access on one JSON object with a path prefix for error messages.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  void allow_only(const std::set<std::string>& keys) const {
    for (const auto& [key, value] : obj_.items()) {
      if (!keys.count(key)) throw ConfigError(at(key), "unknown field");
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key); }
  const json& raw(const std::string& key) const { return obj_.at(key); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "/" + key; }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(at(key), "must be finite");
    return x;
  }

  double positive(const std::string& key, double fallback) const {
    const double x = number(key, fallback);
    if (!(x > 0.0)) throw ConfigError(at(key), "must be positive");
    return x;
  }

  int count(const std::string& key, int fallback, int minimum) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
    const auto x = v.get<long long>();
    if (x < minimum || x > 10'000'000) {
      throw ConfigError(at(key), "must be an integer >= " + std::to_string(minimum));
    }
    return static_cast<int>(x);
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<std::string> strings(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    const json& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of strings");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw ConfigError(at(key) + "/" + std::to_string(i), "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

 private:
  const json& obj_;
  std::string path_;
};

void validate(const RunConfig& c) {
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw ConfigError("horizon", "must be positive");
  if (!(c.tol.rel > 0.0)) throw ConfigError("tol/rel", "must be positive");
  if (!(c.tol.abs > 0.0)) throw ConfigError("tol/abs", "must be positive");
  if (c.grid < 16) throw ConfigError("grid", "must be an integer >= 16");
  if (!(c.epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (c.delta < 0.0) throw ConfigError("delta", "must be non-negative");
  if (c.command == Command::synthesize && c.target == "damping" && !(c.alpha > 1.0)) {
    throw ConfigError("alpha", "must exceed 1");
  }
  if (c.out_dir.empty()) throw ConfigError("out", "must not be empty");
}

SystemSpec synth_source(const json& spec, const std::string& path, std::string& target) {
  Fields f(spec, path);
  f.allow_only({"b", "k", "t0"});
  if (f.has("b") == f.has("k")) {
    throw ConfigError(path, "synthesize needs exactly one of b (builds k) or k (builds b)");
  }
  const std::string implied = f.has("b") ? "stiffness" : "damping";
  if (!target.empty() && target != implied) {
    throw ConfigError("target", "target " + target + " does not match the coefficient given");
  }
  target = implied;
  SystemSpec s;
  s.t0 = f.number("t0", 0.0);
  if (f.has("b")) s.b = CoefficientFn::from_json(f.raw("b"), f.at("b"));
  if (f.has("k")) s.k = CoefficientFn::from_json(f.raw("k"), f.at("k"));
  if (target == "damping" && s.t0 != 0.0) throw ConfigError(f.at("t0"), "must be 0 when building b from k");
  return s;
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::filesystem::path artifact(const RunConfig& c, const std::string& name) {
  return std::filesystem::path(c.out_dir) / name;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void write_json(const std::filesystem::path& p, const json& j) {
  auto out = open_out(p);
  out << j.dump(2) << "\n";
}

double worst_margin(const Verdict& v) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : v.conditions) {
    if (std::isnan(c.margin)) continue;
    m = std::min(m, c.margin);
  }
  return m;
}

Verdict guarded_certificate(const std::string& name, const SystemSpec& sys, const json& params,
                            const Grid& grid) {
  try {
    return run_certificate(name, sys, params, grid);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    Verdict v;
    v.certificate = name;
    v.status = CertStatus::inconclusive;
    v.grid = grid;
    v.notes.push_back(std::string("not evaluated: ") + e.what());
    return v;
  }
}

std::string summary_table(const std::vector<Verdict>& verdicts) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "certificate" << std::setw(14) << "status"
     << "worst margin\n";
  for (const auto& v : verdicts) {
    const double m = worst_margin(v);
    os << std::setw(22) << v.certificate << std::setw(14) << to_string(v.status)
       << (std::isfinite(m) ? format_double(m) : std::string("-")) << "\n";
  }
  return os.str();
}

void run_check(const RunConfig& c, Report& r) {
  const SystemSpec& sys = *c.system;
  const Grid grid{sys.t0, sys.t0 + c.horizon, c.grid};
  const bool requested = !c.certificates.empty();
  std::vector<std::string> names = requested ? c.certificates : certificate_names();
  std::sort(names.begin(), names.end());

  std::vector<std::future<Verdict>> jobs;
  for (const auto& name : names) {
    const json params = c.parameters.contains(name) ? c.parameters.at(name) : json();
    jobs.push_back(std::async(std::launch::async, [name, params, &sys, grid] {
      return guarded_certificate(name, sys, params, grid);
    }));
  }
  for (auto& j : jobs) r.verdicts.push_back(j.get());

  const auto path = artifact(c, "check_margins.csv");
  auto out = open_out(path);
  out << "certificate,condition,status,margin,first_violation\n";
  for (const auto& v : r.verdicts) {
    for (const auto& cond : v.conditions) {
      out << v.certificate << "," << cond.id << "," << to_string(cond.status) << ","
          << format_double(cond.margin) << ","
          << (cond.first_violation ? format_double(*cond.first_violation) : std::string()) << "\n";
    }
  }
  r.artifacts.push_back(path.string());
  r.summary = summary_table(r.verdicts);
  r.exit_code = exit_code_for(r.verdicts, requested);

  json stability = json::array(), instability = json::array();
  for (const auto& v : r.verdicts) {
    if (v.status != CertStatus::holds) continue;
    if (is_stability_certificate(v.certificate)) stability.push_back(v.certificate);
    if (is_instability_certificate(v.certificate)) instability.push_back(v.certificate);
  }
  r.result = {{"stabilityCertified", stability}, {"instabilityCertified", instability}};
}

void run_simulate(const RunConfig& c, Report& r) {
  const SystemSpec& sys = *c.system;
  SolveOptions opts;
  opts.tol = c.tol;
  const Trajectory tr = solve_ivp(sys, c.ic, sys.t0 + c.horizon, opts);
  const auto path = artifact(c, "trajectory.csv");
  auto out = open_out(path);
  write_trajectory_csv(out, sys, tr, c.columns);
  r.artifacts.push_back(path.string());
  const State last = tr.states().back();
  r.result = {{"points", tr.size()},
              {"tEnd", tr.t_end()},
              {"final", {{"u", last.u}, {"v", last.v}}},
              {"blowupTime", tr.blowup_time() ? json(*tr.blowup_time()) : json()},
              {"stiffSwitchTime", tr.stiff_switch_time() ? json(*tr.stiff_switch_time()) : json()}};
  std::ostringstream os;
  os << "simulated to t = " << format_double(tr.t_end()) << " (" << tr.size() << " steps)";
  if (tr.blowup_time()) os << ", blow-up threshold reached";
  r.summary = os.str() + "\n";
}

void run_picard(const RunConfig& c, Report& r) {
  const SystemSpec& sys = *c.system;
  const FixedPointResult fp = picard_solve(sys, c.ic, picard_grid(sys, c.grid), c.picard_tol);
  const auto csv = artifact(c, "picard.csv");
  auto out = open_out(csv);
  fp.write_csv(out);
  const auto residuals = artifact(c, "picard_residuals.json");
  write_json(residuals, fp.to_json());
  r.artifacts = {csv.string(), residuals.string()};
  r.result = fp.to_json();
  r.summary = "converged in " + std::to_string(fp.iterations) + " iterations\n";
}

void run_synthesize(const RunConfig& c, Report& r) {
  const SystemSpec& src = *c.system;
  SystemSpec built;
  if (c.target == "stiffness") {
    const StiffnessSynthesis s = synth_stiffness_from_damping(src.b, src.t0);
    built = s.system;
    const std::vector<double> times = Grid{src.t0, src.t0 + c.horizon, c.grid}.times();
    r.result["closedFormResidual"] = {{"plus", verify_closed_form(s, 1, times)},
                                      {"minus", verify_closed_form(s, -1, times)}};
  } else {
    built = SystemSpec{synth_damping_from_stiffness(src.k, c.alpha), src.k, 0.0};
  }
  r.result["system"] = built.to_json();
  const auto path = artifact(c, "synthesized_system.json");
  write_json(path, built.to_json());
  r.artifacts.push_back(path.string());
  r.summary = "wrote " + c.target + " for the given " + (c.target == "stiffness" ? "b" : "k") + "\n";
}

void run_audit_rate(const RunConfig& c, Report& r) {
  const CounterexampleReport ce = synth_counterexample(c.epsilon);
  const auto path = artifact(c, "counterexample.json");
  write_json(path, ce.to_json());
  r.artifacts.push_back(path.string());
  r.result = ce.to_json();
  r.verdicts.push_back(ce.stability_verdict);
  r.exit_code = exit_code_for(r.verdicts, true);
  std::ostringstream os;
  os << "alpha " << format_double(ce.alpha) << ", sup |dlambda/dt| " << format_double(ce.sup_eig_rate)
     << ", bound " << format_double(ce.rate_bound) << ", frozen saddle everywhere "
     << (ce.frozen_saddle_everywhere ? "yes" : "no") << "\n";
  r.summary = os.str() + summary_table(r.verdicts);
}

void run_probe(const RunConfig& c, Report& r) {
  const SystemSpec& sys = *c.system;
  const double delta = c.delta > 0.0 ? c.delta : c.epsilon / 10.0;
  const ProbeReport p = probe_stability(sys, c.epsilon, delta, c.horizon, c.directions);
  const auto path = artifact(c, "probe.json");
  write_json(path, p.to_json());
  r.artifacts.push_back(path.string());
  r.result = p.to_json();
  r.exit_code = p.verdict == ProbeVerdict::stable_evidence ? kExitOk : kExitNotCertified;
  r.summary = "probe verdict: " + to_string(p.verdict) + "\n";
}

}  // namespace

std::string to_string(Command c) {
  for (const auto& [cmd, name] : command_table()) {
    if (cmd == c) return name;
  }
  return "check";
}

Command command_from_string(const std::string& name) {
  for (const auto& [cmd, n] : command_table()) {
    if (n == name) return cmd;
  }
  throw ConfigError("command", "unknown command " + name);
}

json RunConfig::to_json() const {
  json j{{"command", to_string(command)},
         {"horizon", horizon},
         {"grid", grid},
         {"tol", {{"rel", tol.rel}, {"abs", tol.abs}}},
         {"out", out_dir}};
  if (system) {
    if (command == Command::synthesize) {
      json s{{"t0", system->t0}};
      if (target == "stiffness") s["b"] = system->b.to_json();
      else s["k"] = system->k.to_json();
      j["system"] = s;
      j["target"] = target;
      if (target == "damping") j["alpha"] = alpha;
    } else {
      j["system"] = system->to_json();
    }
  }
  switch (command) {
    case Command::check:
      j["certificates"] = certificates;
      j["parameters"] = parameters;
      break;
    case Command::simulate:
      j["ic"] = {ic.u, ic.v};
      j["columns"] = columns;
      break;
    case Command::picard:
      j["ic"] = {ic.u, ic.v};
      j["picardTol"] = picard_tol;
      break;
    case Command::audit_rate:
      j["epsilon"] = epsilon;
      break;
    case Command::probe:
      j["epsilon"] = epsilon;
      j["delta"] = delta;
      j["directions"] = directions;
      break;
    case Command::synthesize:
      break;
  }
  return j;
}

RunConfig config_from_json(const json& doc) {
  Fields f(doc, "");
  if (!f.has("command")) throw ConfigError("command", "missing required field");
  RunConfig c;
  c.command = command_from_string(f.text("command", ""));

  std::set<std::string> allowed = {"command", "system", "horizon", "grid", "tol", "out"};
  switch (c.command) {
    case Command::check:
      allowed.insert({"certificates", "parameters"});
      break;
    case Command::simulate:
      allowed.insert({"ic", "columns"});
      break;
    case Command::picard:
      allowed.insert({"ic", "picardTol"});
      break;
    case Command::synthesize:
      allowed.insert({"target", "alpha"});
      break;
    case Command::audit_rate:
      allowed.insert("epsilon");
      break;
    case Command::probe:
      allowed.insert({"epsilon", "delta", "directions"});
      break;
  }
  f.allow_only(allowed);

  if (c.command == Command::picard) c.grid = 4001;
  c.horizon = f.positive("horizon", c.horizon);
  c.grid = f.count("grid", c.grid, 16);
  c.out_dir = f.text("out", c.out_dir);
  if (f.has("tol")) {
    Fields t(f.raw("tol"), "tol");
    t.allow_only({"rel", "abs"});
    c.tol.rel = t.positive("rel", c.tol.rel);
    c.tol.abs = t.positive("abs", c.tol.abs);
  }

  if (c.command == Command::audit_rate) {
    if (f.has("system")) throw ConfigError("system", "audit-rate builds its own system");
  } else {
    if (!f.has("system")) throw ConfigError("system", "missing required field");
    if (c.command == Command::synthesize) {
      c.target = f.text("target", "");
      if (!c.target.empty() && c.target != "stiffness" && c.target != "damping") {
        throw ConfigError("target", "expected \"stiffness\" or \"damping\"");
      }
      c.system = synth_source(f.raw("system"), "system", c.target);
      c.alpha = f.number("alpha", c.alpha);
      if (c.target == "stiffness" && f.has("alpha")) {
        throw ConfigError("alpha", "only used when building b from k");
      }
    } else {
      c.system = SystemSpec::from_json(f.raw("system"), "system");
    }
  }

  if (f.has("ic")) {
    const json& ic = f.raw("ic");
    if (!ic.is_array() || ic.size() != 2 || !ic[0].is_number() || !ic[1].is_number()) {
      throw ConfigError("ic", "expected [u0, u1]");
    }
    c.ic = {ic[0].get<double>(), ic[1].get<double>()};
    if (!std::isfinite(c.ic.u) || !std::isfinite(c.ic.v)) throw ConfigError("ic", "must be finite");
  }
  c.picard_tol = f.positive("picardTol", c.picard_tol);
  c.epsilon = f.positive("epsilon", c.epsilon);
  c.delta = f.number("delta", c.delta);
  c.directions = f.count("directions", c.directions, 4);

  c.certificates = f.strings("certificates");
  for (std::size_t i = 0; i < c.certificates.size(); ++i) {
    const auto& names = certificate_names();
    if (std::find(names.begin(), names.end(), c.certificates[i]) == names.end()) {
      throw ConfigError("certificates/" + std::to_string(i), "unknown certificate " + c.certificates[i]);
    }
  }
  std::sort(c.certificates.begin(), c.certificates.end());
  c.certificates.erase(std::unique(c.certificates.begin(), c.certificates.end()), c.certificates.end());
  if (f.has("parameters")) {
    Fields p(f.raw("parameters"), "parameters");
    p.allow_only({certificate_names().begin(), certificate_names().end()});
    for (const auto& [name, params] : f.raw("parameters").items()) {
      Fields q(params, "parameters/" + name);
      q.allow_only({"M", "alpha", "alpha3", "t3", "horizon"});
      for (const auto& [key, value] : params.items()) q.number(key, 0.0);
    }
    c.parameters = f.raw("parameters");
  }

  c.columns = f.strings("columns");
  for (std::size_t i = 0; i < c.columns.size(); ++i) {
    if (std::find(kExtraColumns.begin(), kExtraColumns.end(), c.columns[i]) == kExtraColumns.end()) {
      throw ConfigError("columns/" + std::to_string(i), "unknown column " + c.columns[i]);
    }
  }
  // Contract order, duplicates dropped.
  std::vector<std::string> ordered;
  for (const auto& col : kExtraColumns) {
    if (std::find(c.columns.begin(), c.columns.end(), col) != c.columns.end()) ordered.push_back(col);
  }
  c.columns = ordered;

  validate(c);
  return c;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "malformed JSON at " + line_column(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  return config_from_json(doc);
}

void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.horizon) c.horizon = *o.horizon;
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.tol) c.tol.rel = *o.tol;
  if (o.grid) c.grid = *o.grid;
  validate(c);
}

Overrides overrides_from_json(const json& doc) {
  Fields f(doc, "overrides");
  f.allow_only({"out", "horizon", "epsilon", "alpha", "tol", "grid"});
  Overrides o;
  if (f.has("out")) o.out_dir = f.text("out", "");
  if (f.has("horizon")) o.horizon = f.positive("horizon", 0.0);
  if (f.has("epsilon")) o.epsilon = f.positive("epsilon", 0.0);
  if (f.has("alpha")) o.alpha = f.number("alpha", 0.0);
  if (f.has("tol")) o.tol = f.positive("tol", 0.0);
  if (f.has("grid")) o.grid = f.count("grid", 0, 16);
  return o;
}

json Report::to_json() const {
  json vs = json::array();
  for (const auto& v : verdicts) vs.push_back(v.to_json());
  return json{{"tool", "stifflab"}, {"version", kToolVersion}, {"config", config},
              {"verdicts", vs},     {"result", result},        {"artifacts", artifacts},
              {"exitCode", exit_code}, {"summary", summary}, {"wallTime", wall_time}};
}

int exit_code_for(const std::vector<Verdict>& verdicts, bool requested) {
  bool unstable = false, stable = false, failed = false, inconclusive = false;
  for (const auto& v : verdicts) {
    if (v.status == CertStatus::holds && is_instability_certificate(v.certificate)) unstable = true;
    if (v.status == CertStatus::holds && is_stability_certificate(v.certificate)) stable = true;
    if (v.status == CertStatus::fails) failed = true;
    if (v.status == CertStatus::inconclusive) inconclusive = true;
    if (v.certificate == "fix1" && v.status == CertStatus::fails) unstable = true;
  }
  if (requested) {
    if (unstable || failed) return kExitNotCertified;
    return inconclusive ? kExitInconclusive : kExitOk;
  }
  if (unstable) return kExitNotCertified;
  return stable ? kExitOk : kExitInconclusive;
}

void write_trajectory_csv(std::ostream& out, const SystemSpec& sys, const Trajectory& tr,
                          const std::vector<std::string>& columns) {
  out << "t,u,v";
  for (const auto& col : columns) out << "," << col;
  out << "\n";
  const auto guarded = [](auto&& f) {
    try {
      return f();
    } catch (const Error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double t = tr.times()[i];
    const State s = tr.states()[i];
    out << format_double(t) << "," << format_double(s.u) << "," << format_double(s.v);
    for (const auto& col : columns) {
      double x;
      if (col == "E") {
        x = guarded([&] { return functional_value(sys, FunctionalKind::E_lyapunov, t, s); });
      } else if (col == "V") {
        x = guarded([&] { return functional_value(sys, FunctionalKind::V_chetaev, t, s); });
      } else if (col == "lambda_minus") {
        x = guarded([&] { return eigenvalues(sys, t).lambda_minus.real(); });
      } else {
        x = guarded([&] { return eigenvalues(sys, t).lambda_plus.real(); });
      }
      out << "," << format_double(x);
    }
    out << "\n";
  }
}

Report run(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  Report r;
  r.config = config.to_json();
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw Error("cannot create output directory " + config.out_dir + ": " + ec.message());
  spdlog::info("running {} into {}", to_string(config.command), config.out_dir);

  switch (config.command) {
    case Command::check:
      run_check(config, r);
      break;
    case Command::simulate:
      run_simulate(config, r);
      break;
    case Command::picard:
      run_picard(config, r);
      break;
    case Command::synthesize:
      run_synthesize(config, r);
      break;
    case Command::audit_rate:
      run_audit_rate(config, r);
      break;
    case Command::probe:
      run_probe(config, r);
      break;
  }

  const auto report_path = artifact(config, to_string(config.command) + "_report.json");
  r.artifacts.push_back(report_path.string());
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(report_path, r.to_json());
  spdlog::debug("report written to {}", report_path.string());
  return r;
}

}  // namespace stifflab
