#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "stifflab.h"

using json = nlohmann::json;

namespace {

const char* kStable = R"({"b": {"power_law": {"c": 2, "shift": 1, "exponent": -1}},
                          "k": {"power_law": {"c": -1, "shift": 1, "exponent": -4}}, "t0": 0})";
const char* kUnstable = R"({"b": {"power_law": {"c": 1, "shift": 1, "exponent": -1}},
                            "k": {"power_law": {"c": -1, "shift": 1, "exponent": -2}}, "t0": 0})";

// Takes ownership of a library string.
json take(char* s) {
  REQUIRE(s != nullptr);
  json j = json::parse(s);
  sl_string_free(s);
  return j;
}

sl_system* make_system(const char* text) {
  sl_system* sys = nullptr;
  REQUIRE(sl_system_from_json(text, &sys) == SL_OK);
  return sys;
}

double cubic(double, double v, double u, void*) { return -2 * v + u * u * u - u; }

double shifted(double, double, double u, void*) { return 1.0 - u; }

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("version and status strings") {
    CHECK(std::string(sl_version()) == "0.1.0");
    CHECK(std::string(sl_status_string(SL_OK)) == "ok");
    CHECK(std::string(sl_status_string(SL_ERR_CONFIG)) == "configuration error");
  }

  TEST_CASE("system handles and errors") {
    sl_system* sys = nullptr;
    CHECK(sl_system_from_json("{\"b\": 1}", &sys) == SL_ERR_CONFIG);
    CHECK(sys == nullptr);
    CHECK(std::string(sl_last_error()).find("system/k") != std::string::npos);
    CHECK(sl_system_from_json("{not json", &sys) == SL_ERR_CONFIG);
    CHECK(sl_system_from_json(nullptr, &sys) == SL_ERR_INVALID_ARGUMENT);
    CHECK(sl_system_from_fixture("no_such_fixture", &sys) != SL_OK);

    sys = make_system(kStable);
    double b = 0, k = 0;
    CHECK(sl_system_eval(sys, 1.0, &b, &k) == SL_OK);
    CHECK(b == doctest::Approx(1.0));
    CHECK(k == doctest::Approx(-1.0 / 16));
    CHECK(sl_system_eval(sys, -2.0, &b, &k) == SL_ERR_DOMAIN);
    char* out = nullptr;
    REQUIRE(sl_system_to_json(sys, &out) == SL_OK);
    CHECK(take(out)["b"]["power_law"]["c"] == 2.0);
    sl_system_free(sys);

    REQUIRE(sl_fixture_names(&out) == SL_OK);
    const json names = take(out);
    CHECK(names.size() >= 20);
    REQUIRE(sl_system_from_fixture(names[0].get<std::string>().c_str(), &sys) == SL_OK);
    sl_system_free(sys);
  }

  TEST_CASE("trajectory of the closed-form stable example") {
    sl_system* sys = make_system(kStable);
    sl_trajectory* tr = nullptr;
    REQUIRE(sl_solve_ivp(sys, std::exp(1.0), -std::exp(1.0), 100.0, 0, 0, &tr) == SL_OK);
    const size_t n = sl_trajectory_size(tr);
    CHECK(n > 10);
    std::vector<double> t(n), u(n);
    REQUIRE(sl_trajectory_points(tr, t.data(), u.data(), nullptr, n) == SL_OK);
    for (size_t i = 0; i < n; ++i) CHECK(u[i] == doctest::Approx(std::exp(1 / (t[i] + 1))).epsilon(1e-6));
    double ue = 0, ve = 0;
    REQUIRE(sl_trajectory_eval(tr, 50.0, &ue, &ve) == SL_OK);
    CHECK(ue == doctest::Approx(std::exp(1 / 51.0)).epsilon(1e-6));
    CHECK(sl_trajectory_eval(tr, 200.0, &ue, &ve) != SL_OK);
    int blew = -1;
    double tb = 0;
    REQUIRE(sl_trajectory_blowup(tr, &blew, &tb) == SL_OK);
    CHECK(blew == 0);

    char* out = nullptr;
    REQUIRE(sl_audit_functional(sys, tr, "E_lyapunov", 0, &out) == SL_OK);
    CHECK(take(out)["residual"].get<double>() < 1e-6);
    CHECK(sl_audit_functional(sys, tr, "W", 0, &out) != SL_OK);
    sl_trajectory_free(tr);
    sl_system_free(sys);
  }

  TEST_CASE("improper integrals and certificates") {
    char* out = nullptr;
    REQUIRE(sl_integrate_improper(R"({"power_law": {"c": 1, "shift": 1, "exponent": -2}})", 0, 0, 1e6, &out) ==
            SL_OK);
    json r = take(out);
    CHECK(r["status"] == "convergent");
    CHECK(r["value"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));
    REQUIRE(sl_integrate_improper(R"({"power_law": {"c": 1, "shift": 1, "exponent": -1}})", 0, 0, 1e6, &out) ==
            SL_OK);
    CHECK(take(out)["status"] == "divergent");

    sl_system* stable = make_system(kStable);
    REQUIRE(sl_certificate(stable, "fixed_point", nullptr, 100, 0, &out) == SL_OK);
    r = take(out);
    CHECK(r["status"] == "holds");
    CHECK(r["conditions"].size() == 4);
    CHECK(sl_certificate(stable, "no_such", nullptr, 100, 0, &out) == SL_ERR_INVALID_ARGUMENT);
    CHECK(sl_certificate(stable, "chetaev", R"({"beta": 1})", 100, 0, &out) == SL_ERR_CONFIG);
    CHECK(sl_certificate(stable, "const_damping", nullptr, 100, 0, &out) == SL_ERR_INAPPLICABLE);

    sl_system* unstable = make_system(kUnstable);
    REQUIRE(sl_certificate(unstable, "fix1", nullptr, 100, 0, &out) == SL_OK);
    CHECK(take(out)["status"] == "fails");
    sl_system_free(unstable);
    sl_system_free(stable);
  }

  TEST_CASE("picard, probe and synthesis") {
    sl_system* sys = make_system(kStable);
    char* out = nullptr;
    REQUIRE(sl_picard_solve(sys, 0.01, -0.01, 0, 0, &out) == SL_OK);
    json r = take(out);
    CHECK(r["u"].size() == r["times"].size());
    for (const auto& q : r["contractionRatios"]) CHECK(q.get<double>() < 0.55);

    REQUIRE(sl_probe(sys, 0.1, 0.01, 50, 8, &out) == SL_OK);
    CHECK(take(out)["verdict"] == "stable_evidence");
    sl_system_free(sys);

    REQUIRE(sl_synth_stiffness(R"({"power_law": {"c": 2, "shift": 1, "exponent": -1}})", 0, &out) == SL_OK);
    sys = make_system(take(out).dump().c_str());
    double b = 0, k = 0;
    REQUIRE(sl_system_eval(sys, 1.0, &b, &k) == SL_OK);
    CHECK(k == doctest::Approx(-1.0 / 16).epsilon(1e-10));
    sl_system_free(sys);

    REQUIRE(sl_synth_damping(R"({"power_law": {"c": -1, "shift": 2, "exponent": -3}})", 2, &out) == SL_OK);
    sys = make_system(take(out).dump().c_str());
    REQUIRE(sl_system_eval(sys, 2.0, &b, &k) == SL_OK);
    CHECK(b == doctest::Approx(1.0));
    sl_system_free(sys);
    CHECK(sl_synth_damping(R"({"constant": {"c": -1}})", 1.0, &out) == SL_ERR_INVALID_ARGUMENT);

    REQUIRE(sl_counterexample(0.1, &out) == SL_OK);
    r = take(out);
    CHECK(r["rateBound"] == 0.095);
    CHECK(r["frozenSaddleEverywhere"] == true);
    CHECK(sl_counterexample(-1, &out) == SL_ERR_INVALID_ARGUMENT);
  }

  TEST_CASE("linearize through a callback") {
    std::vector<double> t;
    for (int i = 0; i <= 20; ++i) t.push_back(i);
    char* out = nullptr;
    REQUIRE(sl_linearize(cubic, nullptr, t.data(), t.size(), &out) == SL_OK);
    sl_system* sys = make_system(take(out)["system"].dump().c_str());
    double b = 0, k = 0;
    REQUIRE(sl_system_eval(sys, 7.5, &b, &k) == SL_OK);
    CHECK(b == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(k == doctest::Approx(1.0).epsilon(1e-8));
    sl_system_free(sys);
    CHECK(sl_linearize(shifted, nullptr, t.data(), t.size(), &out) == SL_ERR_INVALID_ARGUMENT);
  }

  TEST_CASE("run and parse_config") {
    char* out = nullptr;
    const std::string simulate = std::string(R"({"command": "simulate", "system": )") + kStable + "}";
    REQUIRE(sl_parse_config(simulate.c_str(), &out) == SL_OK);
    const json echo = take(out);
    CHECK(echo["horizon"] == 100.0);
    CHECK(echo["tol"]["rel"] == 1e-9);
    CHECK(sl_parse_config(R"({"command": "simulate", "tol": {"rel": -1}})", &out) == SL_ERR_CONFIG);
    CHECK(std::string(sl_last_error()).find("tol/rel") != std::string::npos);

    const auto dir = std::filesystem::temp_directory_path() / "stifflab_capi_run";
    std::filesystem::remove_all(dir);
    const json over{{"out", dir.string()}, {"horizon", 20}};
    int code = -1;
    REQUIRE(sl_run((std::string(R"({"command": "check", "system": )") + kUnstable + "}").c_str(),
                   over.dump().c_str(), &code, &out) == SL_OK);
    const json report = take(out);
    CHECK(code == 2);
    CHECK(report["exitCode"] == 2);
    CHECK(report["config"]["horizon"] == 20.0);
    for (const auto& p : report["artifacts"]) CHECK(std::filesystem::exists(p.get<std::string>()));

    CHECK(sl_run("{\"command\": \"probe\"}", nullptr, &code, &out) == SL_ERR_CONFIG);
    CHECK(code == 1);
  }

  TEST_CASE("last error is per thread") {
    sl_system* sys = nullptr;
    CHECK(sl_system_from_json("{\"b\": 1}", &sys) == SL_ERR_CONFIG);
    const std::string here = sl_last_error();
    std::string there;
    std::thread([&] {
      there = sl_last_error();
      sl_system_from_json("[]", &sys);
    }).join();
    CHECK(there.empty());
    CHECK(std::string(sl_last_error()) == here);
  }
}
