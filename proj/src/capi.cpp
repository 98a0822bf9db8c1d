#include "stifflab.h"

#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <new>
#include <string>

#include <spdlog/spdlog.h>

#include "stifflab/certificates.hpp"
#include "stifflab/errors.hpp"
#include "stifflab/fixtures.hpp"
#include "stifflab/functionals.hpp"
#include "stifflab/improper.hpp"
#include "stifflab/ode.hpp"
#include "stifflab/picard.hpp"
#include "stifflab/report.hpp"
#include "stifflab/synth.hpp"

struct sl_system {
  stifflab::SystemSpec spec;
};

struct sl_trajectory {
  stifflab::Trajectory tr;
};

namespace {

thread_local std::string last_error;

sl_status fail(sl_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Maps the library's exception hierarchy onto status codes.
template <class F>
sl_status guard(F&& body) {
  try {
    body();
    return SL_OK;
  } catch (const stifflab::ConfigError& e) {
    return fail(SL_ERR_CONFIG, e.what());
  } catch (const stifflab::DomainError& e) {
    return fail(SL_ERR_DOMAIN, e.what());
  } catch (const stifflab::QuadratureError& e) {
    return fail(SL_ERR_QUADRATURE, e.what());
  } catch (const stifflab::SolverError& e) {
    return fail(SL_ERR_SOLVER, e.what());
  } catch (const stifflab::InapplicableError& e) {
    return fail(SL_ERR_INAPPLICABLE, e.what());
  } catch (const stifflab::InvalidArgument& e) {
    return fail(SL_ERR_INVALID_ARGUMENT, e.what());
  } catch (const stifflab::json::exception& e) {
    return fail(SL_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SL_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw stifflab::InvalidArgument(what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(const stifflab::json& j, char** out) { *out = dup_string(j.dump()); }

stifflab::json parse_json(const char* text, const char* what) {
  require(text != nullptr, what);
  try {
    return stifflab::json::parse(text);
  } catch (const stifflab::json::parse_error& e) {
    throw stifflab::ConfigError("", std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

extern "C" {

const char* sl_version(void) { return stifflab::kToolVersion; }

const char* sl_status_string(sl_status status) {
  switch (status) {
    case SL_OK: return "ok";
    case SL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SL_ERR_CONFIG: return "configuration error";
    case SL_ERR_DOMAIN: return "domain error";
    case SL_ERR_QUADRATURE: return "quadrature error";
    case SL_ERR_SOLVER: return "solver error";
    case SL_ERR_INAPPLICABLE: return "inapplicable";
    case SL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sl_last_error(void) { return last_error.c_str(); }

void sl_string_free(char* s) { delete[] s; }

void sl_set_log_level(sl_log_level level) {
  spdlog::set_level(static_cast<spdlog::level::level_enum>(level));
}

sl_status sl_system_from_json(const char* system_json, sl_system** out) {
  return guard([&] {
    require(out != nullptr, "out must not be NULL");
    const auto doc = parse_json(system_json, "system_json must not be NULL");
    *out = new sl_system{stifflab::SystemSpec::from_json(doc)};
  });
}

sl_status sl_system_from_fixture(const char* name, sl_system** out) {
  return guard([&] {
    require(name != nullptr && out != nullptr, "name and out must not be NULL");
    *out = new sl_system{stifflab::find_fixture(name).system};
  });
}

sl_status sl_fixture_names(char** out_json) {
  return guard([&] {
    require(out_json != nullptr, "out_json must not be NULL");
    stifflab::json names = stifflab::json::array();
    for (const auto& f : stifflab::builtin_fixtures()) names.push_back(f.name);
    emit(names, out_json);
  });
}

sl_status sl_system_to_json(const sl_system* system, char** out_json) {
  return guard([&] {
    require(system != nullptr && out_json != nullptr, "system and out_json must not be NULL");
    emit(system->spec.to_json(), out_json);
  });
}

sl_status sl_system_eval(const sl_system* system, double t, double* b, double* k) {
  return guard([&] {
    require(system != nullptr, "system must not be NULL");
    const double bv = system->spec.b.eval(t);
    const double kv = system->spec.k.eval(t);
    if (b) *b = bv;
    if (k) *k = kv;
  });
}

void sl_system_free(sl_system* system) { delete system; }

sl_status sl_solve_ivp(const sl_system* system, double u0, double u1, double t_end, double rel,
                       double abs, sl_trajectory** out) {
  return guard([&] {
    require(system != nullptr && out != nullptr, "system and out must not be NULL");
    stifflab::SolveOptions opts;
    if (rel > 0) opts.tol.rel = rel;
    if (abs > 0) opts.tol.abs = abs;
    *out = new sl_trajectory{stifflab::solve_ivp(system->spec, {u0, u1}, t_end, opts)};
  });
}

size_t sl_trajectory_size(const sl_trajectory* tr) { return tr ? tr->tr.size() : 0; }

sl_status sl_trajectory_points(const sl_trajectory* tr, double* t, double* u, double* v,
                               size_t capacity) {
  return guard([&] {
    require(tr != nullptr, "trajectory must not be NULL");
    const size_t n = std::min(capacity, tr->tr.size());
    for (size_t i = 0; i < n; ++i) {
      if (t) t[i] = tr->tr.times()[i];
      if (u) u[i] = tr->tr.states()[i].u;
      if (v) v[i] = tr->tr.states()[i].v;
    }
  });
}

sl_status sl_trajectory_eval(const sl_trajectory* tr, double t, double* u, double* v) {
  return guard([&] {
    require(tr != nullptr, "trajectory must not be NULL");
    const auto s = tr->tr.eval(t);
    if (u) *u = s.u;
    if (v) *v = s.v;
  });
}

sl_status sl_trajectory_blowup(const sl_trajectory* tr, int* blew_up, double* t) {
  return guard([&] {
    require(tr != nullptr, "trajectory must not be NULL");
    const auto b = tr->tr.blowup_time();
    if (blew_up) *blew_up = b ? 1 : 0;
    if (t) *t = b ? *b : std::numeric_limits<double>::quiet_NaN();
  });
}

void sl_trajectory_free(sl_trajectory* tr) { delete tr; }

sl_status sl_integrate_improper(const char* coeff_json, double t0, double tol, double horizon,
                                char** out_json) {
  return guard([&] {
    require(out_json != nullptr, "out_json must not be NULL");
    const auto g = stifflab::CoefficientFn::from_json(parse_json(coeff_json, "coeff_json must not be NULL"));
    const auto r = stifflab::integrate_improper(g, t0, tol > 0 ? tol : stifflab::kImproperDefaultTol,
                                                horizon);
    emit({{"status", stifflab::to_string(r.status)},
          {"value", r.value ? stifflab::json(*r.value) : stifflab::json()},
          {"tailExponent", r.tail_exponent},
          {"horizonUsed", r.horizon_used}},
         out_json);
  });
}

sl_status sl_certificate(const sl_system* system, const char* name, const char* params_json,
                         double t_end, int grid_points, char** out_json) {
  return guard([&] {
    require(system != nullptr && name != nullptr && out_json != nullptr,
            "system, name and out_json must not be NULL");
    const stifflab::json params = params_json ? parse_json(params_json, "") : stifflab::json();
    const stifflab::Grid grid{system->spec.t0, t_end,
                              grid_points > 0 ? grid_points : stifflab::kDefaultGridPoints};
    require(t_end > system->spec.t0, "t_end must exceed t0");
    emit(stifflab::run_certificate(name, system->spec, params, grid).to_json(), out_json);
  });
}

sl_status sl_audit_functional(const sl_system* system, const sl_trajectory* tr, const char* kind,
                              double step, char** out_json) {
  return guard([&] {
    require(system != nullptr && tr != nullptr && kind != nullptr && out_json != nullptr,
            "arguments must not be NULL");
    const auto report = stifflab::audit_functional(system->spec, tr->tr,
                                                   stifflab::functional_from_string(kind),
                                                   step > 0 ? step : 0.0);
    emit(report.to_json(false), out_json);
  });
}

sl_status sl_probe(const sl_system* system, double epsilon, double delta, double horizon,
                   int directions, char** out_json) {
  return guard([&] {
    require(system != nullptr && out_json != nullptr, "system and out_json must not be NULL");
    emit(stifflab::probe_stability(system->spec, epsilon, delta, horizon, directions > 0 ? directions : 16)
             .to_json(),
         out_json);
  });
}

sl_status sl_picard_solve(const sl_system* system, double u0, double u1, int grid_points, double tol,
                          char** out_json) {
  return guard([&] {
    require(system != nullptr && out_json != nullptr, "system and out_json must not be NULL");
    const auto grid = stifflab::picard_grid(system->spec, grid_points > 0 ? grid_points : 4001);
    const auto fp = stifflab::picard_solve(system->spec, {u0, u1}, grid, tol > 0 ? tol : 1e-10);
    auto j = fp.to_json();
    j["times"] = fp.solution.times;
    j["u"] = fp.solution.values;
    j["v"] = fp.derivative.values;
    emit(j, out_json);
  });
}

sl_status sl_synth_stiffness(const char* b_json, double t0, char** out_system_json) {
  return guard([&] {
    require(out_system_json != nullptr, "out_system_json must not be NULL");
    const auto b = stifflab::CoefficientFn::from_json(parse_json(b_json, "b_json must not be NULL"));
    emit(stifflab::synth_stiffness_from_damping(b, t0).system.to_json(), out_system_json);
  });
}

sl_status sl_synth_damping(const char* k_json, double alpha, char** out_system_json) {
  return guard([&] {
    require(out_system_json != nullptr, "out_system_json must not be NULL");
    const auto k = stifflab::CoefficientFn::from_json(parse_json(k_json, "k_json must not be NULL"));
    const stifflab::SystemSpec s{stifflab::synth_damping_from_stiffness(k, alpha), k, 0.0};
    emit(s.to_json(), out_system_json);
  });
}

sl_status sl_counterexample(double epsilon, char** out_json) {
  return guard([&] {
    require(out_json != nullptr, "out_json must not be NULL");
    emit(stifflab::synth_counterexample(epsilon).to_json(), out_json);
  });
}

sl_status sl_linearize(sl_rhs_fn f, void* user, const double* times, size_t n, char** out_json) {
  return guard([&] {
    require(f != nullptr && times != nullptr && out_json != nullptr, "arguments must not be NULL");
    const std::vector<double> grid(times, times + n);
    const auto lin = stifflab::linearize([&](double t, double v, double u) { return f(t, v, u, user); }, grid);
    emit({{"system", lin.system.to_json()}, {"derivativeError", lin.derivative_error}}, out_json);
  });
}

sl_status sl_parse_config(const char* config_text, char** out_echo_json) {
  return guard([&] {
    require(config_text != nullptr && out_echo_json != nullptr, "arguments must not be NULL");
    emit(stifflab::parse_config(config_text).to_json(), out_echo_json);
  });
}

sl_status sl_run(const char* config_text, const char* overrides_json, int* exit_code,
                 char** out_report_json) {
  if (exit_code) *exit_code = stifflab::kExitOperational;
  return guard([&] {
    require(config_text != nullptr, "config_text must not be NULL");
    auto config = stifflab::parse_config(config_text);
    if (overrides_json) {
      stifflab::apply_overrides(config, stifflab::overrides_from_json(parse_json(overrides_json, "")));
    }
    const auto report = stifflab::run(config);
    if (exit_code) *exit_code = report.exit_code;
    if (out_report_json) emit(report.to_json(), out_report_json);
  });
}

}  // extern "C"
