// stifflab: command-line front end over the C API.
//
//   stifflab <command> --config <path> [--out <dir>] [--horizon N] [--epsilon X]
//            [--alpha X] [--tol X] [--grid N]
//
// Exit codes: 0 completed (stability certified where applicable), 1 error,
// 2 not certified stable (a certificate failed or instability holds),
// 3 inconclusive.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stifflab.h"

namespace {

using json = nlohmann::json;

constexpr int kExitError = 1;

const char* kCommands[] = {"check", "simulate", "picard", "synthesize", "audit-rate", "probe"};

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<double> horizon, epsilon, alpha, tol;
  std::optional<int> grid;
};

void configure_logging() {
  const char* env = std::getenv("STIFFLAB_LOG");
  if (!env) {
    sl_set_log_level(SL_LOG_WARN);
    return;
  }
  const std::string level = env;
  if (level == "trace") sl_set_log_level(SL_LOG_TRACE);
  else if (level == "debug") sl_set_log_level(SL_LOG_DEBUG);
  else if (level == "info") sl_set_log_level(SL_LOG_INFO);
  else if (level == "error") sl_set_log_level(SL_LOG_ERROR);
  else if (level == "off") sl_set_log_level(SL_LOG_OFF);
  else sl_set_log_level(SL_LOG_WARN);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The subcommand supplies "command" when the file leaves it out; a file that
// names a different command is an error.
std::string config_text(const std::string& command, const Options& opt) {
  if (opt.config.empty()) return json{{"command", command}}.dump();
  const std::string text = read_file(opt.config);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    return text;  // the library reports line and column
  }
  if (!doc.is_object()) return text;
  if (!doc.contains("command")) {
    doc["command"] = command;
  } else if (doc["command"] != command) {
    throw std::runtime_error("config is for command " + doc["command"].dump() + ", not " + command);
  }
  return doc.dump();
}

json overrides(const Options& opt) {
  json o = json::object();
  if (opt.out) o["out"] = *opt.out;
  if (opt.horizon) o["horizon"] = *opt.horizon;
  if (opt.epsilon) o["epsilon"] = *opt.epsilon;
  if (opt.alpha) o["alpha"] = *opt.alpha;
  if (opt.tol) o["tol"] = *opt.tol;
  if (opt.grid) o["grid"] = *opt.grid;
  return o;
}

int execute(const std::string& command, const Options& opt) {
  const std::string text = config_text(command, opt);
  const std::string over = overrides(opt).dump();
  int exit_code = kExitError;
  char* report = nullptr;
  const sl_status st = sl_run(text.c_str(), over.c_str(), &exit_code, &report);
  if (st != SL_OK) {
    std::cerr << "stifflab: " << sl_status_string(st) << ": " << sl_last_error() << "\n";
    return kExitError;
  }
  const json r = json::parse(report);
  sl_string_free(report);
  std::cout << r.value("summary", "");
  for (const auto& path : r["artifacts"]) std::cout << "wrote " << path.get<std::string>() << "\n";
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Stability and instability certificates for u'' + b(t) u' + k(t) u = 0"};
  app.set_version_flag("--version", std::string(sl_version()));
  app.require_subcommand(1);

  Options opt;
  std::string chosen;
  for (const char* name : kCommands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--horizon", opt.horizon, "window length after t0");
    sub->add_option("--epsilon", opt.epsilon, "epsilon for audit-rate and probe");
    sub->add_option("--alpha", opt.alpha, "alpha for synthesize");
    sub->add_option("--tol", opt.tol, "relative tolerance");
    sub->add_option("--grid", opt.grid, "grid points");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    return execute(chosen, opt);
  } catch (const std::exception& e) {
    std::cerr << "stifflab: " << e.what() << "\n";
    return kExitError;
  }
}
