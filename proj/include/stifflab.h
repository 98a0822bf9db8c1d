/* C interface to stifflab: stability and instability certificates for
 * u'' + b(t) u' + k(t) u = 0.
 *
 * Conventions
 *   - Every fallible call returns sl_status; SL_OK is 0.
 *   - On failure, sl_last_error() describes the error. The message is
 *     thread-local and stays valid until the next failing call on the same
 *     thread.
 *   - Results that are documents come back as NUL-terminated JSON strings
 *     allocated by the library; release them with sl_string_free.
 *   - Handles are opaque. A handle may be used from several threads at once
 *     only for read-only calls; free it exactly once.
 *   - Coefficients and systems use the JSON coefficient language, e.g.
 *     {"b": {"power_law": {"c": 2, "shift": 1, "exponent": -1}},
 *      "k": {"power_law": {"c": -1, "shift": 1, "exponent": -4}}, "t0": 0}
 */
#ifndef STIFFLAB_H
#define STIFFLAB_H

#include <stddef.h>

#if defined(_WIN32)
#define SL_API __declspec(dllexport)
#else
#define SL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sl_status {
  SL_OK = 0,
  SL_ERR_INVALID_ARGUMENT = 1,
  SL_ERR_CONFIG = 2,      /* malformed JSON or schema violation */
  SL_ERR_DOMAIN = 3,      /* coefficient evaluated outside its domain */
  SL_ERR_QUADRATURE = 4,
  SL_ERR_SOLVER = 5,      /* step underflow, non-contraction, overflow */
  SL_ERR_INAPPLICABLE = 6,/* outside the hypotheses of a recipe */
  SL_ERR_INTERNAL = 7
} sl_status;

typedef enum sl_log_level {
  SL_LOG_TRACE = 0,
  SL_LOG_DEBUG = 1,
  SL_LOG_INFO = 2,
  SL_LOG_WARN = 3,
  SL_LOG_ERROR = 4,
  SL_LOG_OFF = 6
} sl_log_level;

typedef struct sl_system sl_system;
typedef struct sl_trajectory sl_trajectory;

/* Acceleration u'' = f(t, u', u) of a nonlinear system. */
typedef double (*sl_rhs_fn)(double t, double v, double u, void* user);

SL_API const char* sl_version(void);
SL_API const char* sl_status_string(sl_status status);
SL_API const char* sl_last_error(void);
SL_API void sl_string_free(char* s);
SL_API void sl_set_log_level(sl_log_level level);

/* Systems */
SL_API sl_status sl_system_from_json(const char* system_json, sl_system** out);
SL_API sl_status sl_system_from_fixture(const char* name, sl_system** out);
SL_API sl_status sl_fixture_names(char** out_json);
SL_API sl_status sl_system_to_json(const sl_system* system, char** out_json);
SL_API sl_status sl_system_eval(const sl_system* system, double t, double* b, double* k);
SL_API void sl_system_free(sl_system* system);

/* Trajectories. rel/abs <= 0 select the defaults 1e-9 / 1e-12. */
SL_API sl_status sl_solve_ivp(const sl_system* system, double u0, double u1, double t_end,
                              double rel, double abs, sl_trajectory** out);
SL_API size_t sl_trajectory_size(const sl_trajectory* tr);
/* Copies up to `capacity` recorded points; any output pointer may be NULL. */
SL_API sl_status sl_trajectory_points(const sl_trajectory* tr, double* t, double* u, double* v,
                                      size_t capacity);
SL_API sl_status sl_trajectory_eval(const sl_trajectory* tr, double t, double* u, double* v);
/* *blew_up is set to 1 when integration stopped at the blow-up threshold. */
SL_API sl_status sl_trajectory_blowup(const sl_trajectory* tr, int* blew_up, double* t);
SL_API void sl_trajectory_free(sl_trajectory* tr);

/* Analysis. Each returns a JSON document through out_json. */
SL_API sl_status sl_integrate_improper(const char* coeff_json, double t0, double tol, double horizon,
                                       char** out_json);
/* name: lyapunov, const_damping, fix1, fixed_point, nonpositive, chetaev,
 * chetaev2, exponential_damping. params_json may be NULL. The window is
 * [t0, t_end]; grid_points <= 0 selects the default. */
SL_API sl_status sl_certificate(const sl_system* system, const char* name, const char* params_json,
                                double t_end, int grid_points, char** out_json);
/* kind: E_lyapunov, E_const_damping, V_chetaev. step <= 0 selects the default. */
SL_API sl_status sl_audit_functional(const sl_system* system, const sl_trajectory* tr,
                                     const char* kind, double step, char** out_json);
SL_API sl_status sl_probe(const sl_system* system, double epsilon, double delta, double horizon,
                          int directions, char** out_json);
/* grid_points <= 0 selects 4001; tol <= 0 selects 1e-10. */
SL_API sl_status sl_picard_solve(const sl_system* system, double u0, double u1, int grid_points,
                                 double tol, char** out_json);

/* Synthesis */
SL_API sl_status sl_synth_stiffness(const char* b_json, double t0, char** out_system_json);
SL_API sl_status sl_synth_damping(const char* k_json, double alpha, char** out_system_json);
SL_API sl_status sl_counterexample(double epsilon, char** out_json);
SL_API sl_status sl_linearize(sl_rhs_fn f, void* user, const double* times, size_t n,
                              char** out_json);

/* Runs */
/* Validates a run config and returns the echo with all defaults filled. */
SL_API sl_status sl_parse_config(const char* config_text, char** out_echo_json);
/* Runs a config exactly like the CLI. overrides_json (may be NULL) holds
 * flag values that win over the config: {"out", "horizon", "epsilon",
 * "alpha", "tol", "grid"}. *exit_code receives the CLI exit code. */
SL_API sl_status sl_run(const char* config_text, const char* overrides_json, int* exit_code,
                        char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* STIFFLAB_H */
