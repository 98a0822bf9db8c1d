#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "stifflab/errors.hpp"
#include "stifflab/fixtures.hpp"
#include "stifflab/report.hpp"

using namespace stifflab;
using CF = CoefficientFn;

namespace {

const char* kStableSystem = R"({"b": {"power_law": {"c": 2, "shift": 1, "exponent": -1}},
                                "k": {"power_law": {"c": -1, "shift": 1, "exponent": -4}}, "t0": 0})";

std::string config(const std::string& command, const std::string& extra = "") {
  std::string s = R"({"command": ")" + command + R"(")";
  if (command != "audit-rate") s += std::string(R"(, "system": )") + kStableSystem;
  if (!extra.empty()) s += ", " + extra;
  return s + "}";
}

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("stifflab_report_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json without_wall_time(json j) {
  j.erase("wallTime");
  return j;
}

}  // namespace

TEST_SUITE("cli_report") {
  TEST_CASE("minimal simulate config gets the documented defaults") {
    const RunConfig c = parse_config(config("simulate"));
    CHECK(c.command == Command::simulate);
    CHECK(c.horizon == 100.0);
    CHECK(c.tol.rel == 1e-9);
    CHECK(c.tol.abs == 1e-12);
    CHECK(c.ic.u == 1.0);
    CHECK(c.ic.v == 0.0);
    CHECK(c.columns.empty());
    const json echo = c.to_json();
    CHECK(echo["horizon"] == 100.0);
    CHECK(echo["tol"]["rel"] == 1e-9);
    CHECK(echo["system"]["b"]["power_law"]["c"] == 2.0);
  }

  TEST_CASE("schema errors name the field") {
    CHECK(field_of(config("simulate", R"("tol": {"rel": -1e-9})")) == "tol/rel");
    CHECK(field_of(config("simulate", R"("tol": {"abs": 0})")) == "tol/abs");
    CHECK(field_of(config("simulate", R"("horizon": -5)")) == "horizon");
    CHECK(field_of(config("simulate", R"("colour": 1)")) == "colour");
    CHECK(field_of(config("simulate", R"("epsilon": 0.1)")) == "epsilon");
    CHECK(field_of(config("simulate", R"("columns": ["E", "W"])")) == "columns/1");
    CHECK(field_of(config("check", R"("certificates": ["lyapunov", "bogus"])")) == "certificates/1");
    CHECK(field_of(config("check", R"("parameters": {"chetaev": {"beta": 1}})")) == "parameters/chetaev/beta");
    CHECK(field_of(config("check", R"("parameters": {"nope": {}})")) == "parameters/nope");
    CHECK(field_of(config("check", R"("grid": 3.5)")) == "grid");
    CHECK(field_of(R"({"command": "simulate"})") == "system");
    CHECK(field_of(R"({"command": "fly", "system": {}})") == "command");
    CHECK(field_of(R"({"system": {}})") == "command");
    CHECK(field_of(R"({"command": "simulate", "system": {"b": {"constant": {"c": 1}}}})") == "system/k");
    CHECK(field_of(R"({"command": "simulate", "system": {"b": {"cosine": {}}, "k": {"constant": {"c": 1}}}})")
              .rfind("system/b", 0) == 0);
    CHECK(field_of(R"({"command": "audit-rate", "epsilon": 0})") == "epsilon");
    CHECK(field_of(R"({"command": "synthesize", "system": {"k": {"constant": {"c": -1}}}, "alpha": 1})") ==
          "alpha");
    CHECK(field_of(R"({"command": "synthesize", "system": {"b": {"constant": {"c": 1}}, "k": {"constant": {"c": 1}}}})") ==
          "system");
  }

  TEST_CASE("syntax errors carry line and column") {
    try {
      parse_config("{\"command\": \"simulate\",\n  \"horizon\": ,\n}");
      FAIL("accepted malformed JSON");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  TEST_CASE("round trip parse(echo(parse(x))) == parse(x) over generated configs") {
    std::mt19937 rng(20261016);
    const auto& fixtures = builtin_fixtures();
    const std::vector<std::string> commands = {"check", "simulate", "picard", "synthesize", "audit-rate", "probe"};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
      const std::string cmd = commands[rng() % commands.size()];
      const Fixture& fx = fixtures[rng() % fixtures.size()];
      json doc{{"command", cmd}};
      if (cmd == "synthesize") {
        if (rng() % 2) {
          doc["system"] = {{"b", fx.system.b.to_json()}, {"t0", fx.system.t0}};
        } else {
          doc["system"] = {{"k", CF::constant(-1).to_json()}};
          doc["alpha"] = 1.5 + 8 * unit(rng);
        }
      } else if (cmd != "audit-rate") {
        doc["system"] = fx.system.to_json();
      }
      if (rng() % 2) doc["horizon"] = 1 + 200 * unit(rng);
      if (rng() % 2) doc["grid"] = 16 + static_cast<int>(rng() % 4000);
      if (rng() % 2) doc["tol"] = {{"rel", std::pow(10.0, -4 - 8 * unit(rng))}};
      if (cmd == "simulate" && rng() % 2) doc["columns"] = {"lambda_plus", "E", "E"};
      if ((cmd == "simulate" || cmd == "picard") && rng() % 2) doc["ic"] = {unit(rng), -unit(rng)};
      if ((cmd == "probe" || cmd == "audit-rate") && rng() % 2) doc["epsilon"] = 0.01 + unit(rng);
      if (cmd == "check" && rng() % 2) {
        doc["certificates"] = {"chetaev", "lyapunov"};
        doc["parameters"] = {{"chetaev", {{"alpha", 0.5}}}};
      }
      CAPTURE(doc.dump());
      const RunConfig first = parse_config(doc.dump());
      const RunConfig second = parse_config(first.to_json().dump());
      CHECK(second.to_json() == first.to_json());
    }
  }

  TEST_CASE("overrides win over the file") {
    RunConfig c = parse_config(config("probe", R"("epsilon": 0.5)"));
    Overrides o;
    o.epsilon = 0.25;
    o.horizon = 7.0;
    o.tol = 1e-7;
    o.grid = 64;
    o.out_dir = "elsewhere";
    apply_overrides(c, o);
    CHECK(c.epsilon == 0.25);
    CHECK(c.horizon == 7.0);
    CHECK(c.tol.rel == 1e-7);
    CHECK(c.grid == 64);
    CHECK(c.out_dir == "elsewhere");
    o = {};
    o.tol = -1.0;
    CHECK_THROWS_AS(apply_overrides(c, o), ConfigError);
    CHECK_THROWS_AS(overrides_from_json(json{{"colour", 1}}), ConfigError);
    CHECK(overrides_from_json(json{{"grid", 32}}).grid == 32);
  }

  TEST_CASE("exit codes from verdicts") {
    const auto verdict = [](const std::string& name, CertStatus s) {
      Verdict v;
      v.certificate = name;
      v.status = s;
      return v;
    };
    using S = CertStatus;
    CHECK(exit_code_for({verdict("fixed_point", S::holds), verdict("lyapunov", S::fails)}, false) == 0);
    CHECK(exit_code_for({verdict("fixed_point", S::holds), verdict("lyapunov", S::fails)}, true) == 2);
    CHECK(exit_code_for({verdict("nonpositive", S::holds)}, false) == 2);
    CHECK(exit_code_for({verdict("fix1", S::fails), verdict("lyapunov", S::inconclusive)}, false) == 2);
    CHECK(exit_code_for({verdict("lyapunov", S::inconclusive), verdict("chetaev", S::fails)}, false) == 3);
    CHECK(exit_code_for({verdict("lyapunov", S::inconclusive)}, true) == 3);
    CHECK(exit_code_for({verdict("chetaev", S::holds)}, true) == 2);
    CHECK(exit_code_for({verdict("lyapunov", S::holds)}, true) == 0);
  }

  TEST_CASE("check on the stable example certifies stability") {
    RunConfig c = parse_config(config("check"));
    c.out_dir = scratch_dir("check_stable").string();
    const Report r = run(c);
    CHECK(r.exit_code == 0);
    bool fixed_point_holds = false;
    for (const auto& v : r.verdicts) {
      if (v.certificate == "fixed_point") fixed_point_holds = v.status == CertStatus::holds;
      if (is_instability_certificate(v.certificate)) CHECK(v.status != CertStatus::holds);
    }
    CHECK(fixed_point_holds);
    // Ordered by certificate name.
    for (std::size_t i = 1; i < r.verdicts.size(); ++i) {
      CHECK(r.verdicts[i - 1].certificate < r.verdicts[i].certificate);
    }
    for (const auto& p : r.artifacts) CHECK(std::filesystem::exists(p));
  }

  TEST_CASE("check on the zero system certifies instability") {
    RunConfig c = parse_config(
        R"({"command": "check", "system": {"b": {"constant": {"c": 0}}, "k": {"constant": {"c": 0}}}})");
    c.out_dir = scratch_dir("check_zero").string();
    const Report r = run(c);
    CHECK(r.exit_code == 2);
    bool nonpositive = false;
    for (const auto& v : r.verdicts) {
      if (v.certificate == "nonpositive") nonpositive = v.status == CertStatus::holds;
    }
    CHECK(nonpositive);
  }

  TEST_CASE("audit-rate reports the bound 0.095 for epsilon 0.1") {
    RunConfig c = parse_config(R"({"command": "audit-rate", "epsilon": 0.1})");
    c.out_dir = scratch_dir("audit").string();
    const Report r = run(c);
    CHECK(r.result["rateBound"] == 0.095);
    CHECK(r.exit_code == 0);
    const json saved = json::parse(slurp(std::filesystem::path(c.out_dir) / "counterexample.json"));
    CHECK(saved == r.result);
    CHECK(r.result.dump().find("0.095") != std::string::npos);
  }

  TEST_CASE("simulate CSV column contract") {
    for (const std::string cols : {R"([])", R"(["V", "E"])", R"(["lambda_plus", "lambda_minus", "E", "V"])"}) {
      RunConfig c = parse_config(config("simulate", R"("horizon": 20, "columns": )" + cols));
      c.out_dir = scratch_dir("simulate").string();
      run(c);
      std::ifstream in(std::filesystem::path(c.out_dir) / "trajectory.csv");
      std::string header, line;
      std::getline(in, header);
      std::string expected = "t,u,v";
      for (const auto& col : c.columns) expected += "," + col;
      CHECK(header == expected);
      const auto arity = std::count(header.begin(), header.end(), ',');
      double prev = -1;
      int rows = 0;
      while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == arity);
        const double t = std::stod(line.substr(0, line.find(',')));
        CHECK(t > prev);
        prev = t;
        ++rows;
      }
      CHECK(rows > 10);
      CHECK(prev == doctest::Approx(20.0));
    }
    const RunConfig c = parse_config(config("simulate", R"("columns": ["lambda_minus", "E", "lambda_plus", "V"])"));
    CHECK(c.columns == std::vector<std::string>{"E", "V", "lambda_minus", "lambda_plus"});
  }

  TEST_CASE("identical configs give byte-identical reports apart from wall time") {
    for (const std::string cmd : {"check", "simulate", "picard", "synthesize", "probe"}) {
      std::string extra = cmd == "probe" ? R"("horizon": 20, "epsilon": 0.2)" : R"("horizon": 20)";
      const std::string text = cmd == "synthesize"
                                   ? R"({"command": "synthesize", "system": {"b": {"power_law": {"c": 2, "shift": 1, "exponent": -1}}}})"
                                   : config(cmd, extra);
      RunConfig c = parse_config(text);
      c.out_dir = scratch_dir("det_" + cmd).string();
      const json a = without_wall_time(run(c).to_json());
      const std::string first = slurp(std::filesystem::path(c.out_dir) / (cmd + "_report.json"));
      const json b = without_wall_time(run(c).to_json());
      const std::string second = slurp(std::filesystem::path(c.out_dir) / (cmd + "_report.json"));
      CAPTURE(cmd);
      CHECK(a.dump() == b.dump());
      CHECK(without_wall_time(json::parse(first)).dump() == without_wall_time(json::parse(second)).dump());
    }
  }

  TEST_CASE("picard and synthesize emit their artifacts") {
    RunConfig c = parse_config(config("picard", R"("ic": [0.01, -0.01])"));
    c.out_dir = scratch_dir("picard").string();
    Report r = run(c);
    CHECK(r.exit_code == 0);
    CHECK(std::filesystem::exists(std::filesystem::path(c.out_dir) / "picard.csv"));
    CHECK(std::filesystem::exists(std::filesystem::path(c.out_dir) / "picard_residuals.json"));
    CHECK(r.result["contractionRatios"].size() >= 1);

    c = parse_config(R"({"command": "synthesize", "system": {"k": {"power_law": {"c": -1, "shift": 2, "exponent": -3}}}, "alpha": 2})");
    c.out_dir = scratch_dir("synth").string();
    r = run(c);
    const json sys = json::parse(slurp(std::filesystem::path(c.out_dir) / "synthesized_system.json"));
    const SystemSpec s = SystemSpec::from_json(sys);
    CHECK(s.b.eval(3.0) == doctest::Approx(4.0 / 5.0));

    c = parse_config(R"({"command": "synthesize", "system": {"b": {"power_law": {"c": 2, "shift": 1, "exponent": -1}}}})");
    c.out_dir = scratch_dir("synth2").string();
    r = run(c);
    CHECK(r.result["closedFormResidual"]["plus"].get<double>() < 1e-9);
    CHECK(SystemSpec::from_json(r.result["system"]).k.eval(1.0) == doctest::Approx(-1.0 / 16));
  }
}
