#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "stifflab_cli_test";

const json kStable = json::parse(R"({"b": {"power_law": {"c": 2, "shift": 1, "exponent": -1}},
                                     "k": {"power_law": {"c": -1, "shift": 1, "exponent": -4}}, "t0": 0})");

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kRoot);
  const fs::path p = kRoot / (name + ".json");
  std::ofstream(p) << text;
  return p;
}

// Runs the CLI with output silenced and returns its exit status.
int stifflab(const std::string& args) {
  const std::string cmd = "STIFFLAB_LOG=off \"" STIFFLAB_CLI "\" " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(raw));
  return WEXITSTATUS(raw);
}

std::string out_dir(const std::string& name) { return (kRoot / name).string(); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("check exit codes") {
    const auto stable = write_config("stable", json{{"system", kStable}}.dump());
    CHECK(stifflab("check --config " + stable.string() + " --out " + out_dir("stable")) == 0);
    CHECK(fs::exists(kRoot / "stable" / "check_report.json"));
    CHECK(fs::exists(kRoot / "stable" / "check_margins.csv"));

    const auto zero = write_config("zero", R"({"system": {"b": {"constant": {"c": 0}},
                                                          "k": {"constant": {"c": 0}}, "t0": 0}})");
    CHECK(stifflab("check --config " + zero.string() + " --out " + out_dir("zero")) == 2);

    const auto osc = write_config("osc", R"({"system": {"b": {"constant": {"c": 0}},
                                                        "k": {"constant": {"c": 1}}, "t0": 0}})");
    CHECK(stifflab("check --config " + osc.string() + " --out " + out_dir("osc")) == 3);
  }

  TEST_CASE("audit-rate needs no config") {
    CHECK(stifflab("audit-rate --epsilon 0.1 --out " + out_dir("audit")) == 0);
    std::ifstream in(kRoot / "audit" / "audit-rate_report.json");
    REQUIRE(in);
    const json report = json::parse(in);
    CHECK(report["exitCode"] == 0);
    CHECK(report["config"]["epsilon"] == 0.1);
  }

  TEST_CASE("operational errors exit 1") {
    const auto bad = write_config("bad", "{\"system\": {\"b\": }");
    CHECK(stifflab("check --config " + bad.string()) == 1);
    const auto other = write_config("other", json{{"command", "simulate"}, {"system", kStable}}.dump());
    CHECK(stifflab("check --config " + other.string()) == 1);
    const auto neg = write_config("neg", json{{"system", kStable}, {"tol", {{"rel", -1}}}}.dump());
    CHECK(stifflab("simulate --config " + neg.string()) == 1);
    CHECK(stifflab("check --config " + (kRoot / "missing.json").string()) == 1);
    CHECK(stifflab("no-such-command") == 1);
    CHECK(stifflab("") == 1);
  }

  TEST_CASE("overrides reach the report") {
    const auto cfg = write_config("sim", json{{"system", kStable}, {"columns", {"E"}}}.dump());
    REQUIRE(stifflab("simulate --config " + cfg.string() + " --horizon 7 --tol 1e-8 --out " + out_dir("sim")) == 0);
    std::ifstream in(kRoot / "sim" / "simulate_report.json");
    const json report = json::parse(in);
    CHECK(report["config"]["horizon"] == 7.0);
    CHECK(report["config"]["tol"]["rel"] == 1e-8);
    std::ifstream csv(kRoot / "sim" / "trajectory.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "t,u,v,E");
  }
}
