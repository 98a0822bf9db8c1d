#include "stifflab/ode.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "stifflab/errors.hpp"

namespace stifflab {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Trajectory::Trajectory(double t0, State initial, Tolerances tol) : tol_(tol) {
  times_.push_back(t0);
  states_.push_back(initial);
}

void Trajectory::append(const Step& step, double t, State s) {
  steps_.push_back(step);
  times_.push_back(t);
  states_.push_back(s);
}

namespace {

// Radau IIA, three stages.
const double kSqrt6 = std::sqrt(6.0);
const std::array<double, 3> kRadauC = {(4.0 - kSqrt6) / 10.0, (4.0 + kSqrt6) / 10.0, 1.0};
const std::array<std::array<double, 3>, 3> kRadauA = {{
    {(88.0 - 7.0 * kSqrt6) / 360.0, (296.0 - 169.0 * kSqrt6) / 1800.0, (-2.0 + 3.0 * kSqrt6) / 225.0},
    {(296.0 + 169.0 * kSqrt6) / 1800.0, (88.0 + 7.0 * kSqrt6) / 360.0, (-2.0 - 3.0 * kSqrt6) / 225.0},
    {(16.0 - kSqrt6) / 36.0, (16.0 + kSqrt6) / 36.0, 1.0 / 9.0},
}};

double collocation_eval(const std::array<double, 5>& y, double theta) {
  const std::array<double, 4> nodes = {0.0, kRadauC[0], kRadauC[1], 1.0};
  double out = 0.0;
  for (int j = 0; j < 4; ++j) {
    double l = 1.0;
    for (int m = 0; m < 4; ++m) {
      if (m != j) l *= (theta - nodes[m]) / (nodes[j] - nodes[m]);
    }
    out += l * y[j];
  }
  return out;
}

double dense_dp(const std::array<double, 5>& r, double theta) {
  const double t1 = 1.0 - theta;
  return r[0] + theta * (r[1] + t1 * (r[2] + theta * (r[3] + t1 * r[4])));
}

}  // namespace

State Trajectory::eval(double t) const {
  if (!(t >= times_.front() && t <= times_.back())) {
    throw DomainError("trajectory evaluated at t=" + format_double(t) + " outside [" +
                      format_double(times_.front()) + ", " + format_double(times_.back()) + "]");
  }
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  const std::size_t idx = static_cast<std::size_t>(it - times_.begin());
  if (idx < times_.size() && times_[idx] == t) return states_[idx];
  const Step& st = steps_[idx - 1];
  const double theta = (t - st.t0) / st.h;
  if (st.kind == Step::Kind::explicit_rk) return {dense_dp(st.cu, theta), dense_dp(st.cv, theta)};
  return {collocation_eval(st.cu, theta), collocation_eval(st.cv, theta)};
}

void Trajectory::write_csv(std::ostream& out) const {
  out << "t,u,v\n";
  for (std::size_t i = 0; i < times_.size(); ++i) {
    out << format_double(times_[i]) << ',' << format_double(states_[i].u) << ','
        << format_double(states_[i].v) << '\n';
  }
}

namespace {

struct Rhs {
  const SystemSpec& sys;
  State operator()(double t, State y) const {
    return {y.v, -sys.b.eval(t) * y.v - sys.k.eval(t) * y.u};
  }
  // Spectral radius of the companion matrix [[0, 1], [-k, -b]].
  double spectral_radius(double t) const {
    const double b = sys.b.eval(t);
    const double k = sys.k.eval(t);
    const double disc = b * b - 4.0 * k;
    if (disc >= 0.0) return 0.5 * (std::abs(b) + std::sqrt(disc));
    return std::sqrt(k);
  }
};

double error_norm(State err, State y0, State y1, const Tolerances& tol) {
  const double su = tol.abs + tol.rel * std::max(std::abs(y0.u), std::abs(y1.u));
  const double sv = tol.abs + tol.rel * std::max(std::abs(y0.v), std::abs(y1.v));
  const double eu = err.u / su;
  const double ev = err.v / sv;
  return std::sqrt(0.5 * (eu * eu + ev * ev));
}

bool blown_up(State s, double threshold) {
  return !(std::abs(s.u) <= threshold && std::abs(s.v) <= threshold);
}

void check_step(double t, double h) {
  if (!(h > 1e-14 * std::max(1.0, std::abs(t)))) {
    throw SolverError("step size underflow at t=" + format_double(t));
  }
}

struct RadauResult {
  State end;
  std::array<State, 3> stages;
};

RadauResult radau_step(const SystemSpec& sys, double t, State y, double h) {
  Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Identity();
  for (int j = 0; j < 3; ++j) {
    const double tj = t + kRadauC[j] * h;
    const double b = sys.b.eval(tj);
    const double k = sys.k.eval(tj);
    for (int i = 0; i < 3; ++i) {
      const double ha = h * kRadauA[i][j];
      // block (i, j) -= h a_ij [[0, 1], [-k, -b]]
      m(2 * i, 2 * j + 1) -= ha;
      m(2 * i + 1, 2 * j) += ha * k;
      m(2 * i + 1, 2 * j + 1) += ha * b;
    }
  }
  Eigen::Matrix<double, 6, 1> rhs;
  for (int i = 0; i < 3; ++i) {
    rhs(2 * i) = y.u;
    rhs(2 * i + 1) = y.v;
  }
  // Row equilibration: damping entries can exceed the identity by many orders.
  for (int r = 0; r < 6; ++r) {
    const double s = m.row(r).cwiseAbs().maxCoeff();
    m.row(r) /= s;
    rhs(r) /= s;
  }
  const Eigen::Matrix<double, 6, 1> z = m.fullPivLu().solve(rhs);
  RadauResult out;
  for (int i = 0; i < 3; ++i) out.stages[i] = {z(2 * i), z(2 * i + 1)};
  out.end = out.stages[2];
  return out;
}

Step collocation_step(double t, double h, State y0, const RadauResult& r) {
  Step st{Step::Kind::implicit_collocation, t, h, {}, {}};
  st.cu = {y0.u, r.stages[0].u, r.stages[1].u, r.stages[2].u, 0.0};
  st.cv = {y0.v, r.stages[0].v, r.stages[1].v, r.stages[2].v, 0.0};
  return st;
}

void integrate_implicit(const SystemSpec& sys, double t, State y, double h, double t_end,
                        const SolveOptions& opt, Trajectory& traj, long& steps) {
  while (t < t_end) {
    if (++steps > opt.max_steps) {
      throw SolverError("step budget exhausted at t=" + format_double(t));
    }
    h = std::min(h, t_end - t);
    check_step(t, h);
    const RadauResult full = radau_step(sys, t, y, h);
    const RadauResult half1 = radau_step(sys, t, y, 0.5 * h);
    const RadauResult half2 = radau_step(sys, t + 0.5 * h, half1.end, 0.5 * h);
    const State diff{half2.end.u - full.end.u, half2.end.v - full.end.v};
    const double err = error_norm(diff, y, half2.end, opt.tol);
    const double fac = err == 0.0 ? 4.0 : std::clamp(0.9 * std::pow(err, -0.25), 0.2, 4.0);
    if (!std::isfinite(err) || err > 1.0) {
      h *= std::isfinite(err) ? std::min(fac, 0.9) : 0.2;
      continue;
    }
    const double t_mid = t + 0.5 * h;
    const double t_new = (t_end - t - h <= 1e-15 * std::max(1.0, std::abs(t_end))) ? t_end : t + h;
    traj.append(collocation_step(t, 0.5 * h, y, half1), t_mid, half1.end);
    traj.append(collocation_step(t_mid, t_new - t_mid, half1.end, half2), t_new, half2.end);
    t = t_new;
    y = half2.end;
    if (blown_up(y, opt.blowup_threshold)) {
      traj.mark_blowup(t);
      return;
    }
    h *= fac;
  }
}

}  // namespace

Trajectory solve_ivp(const SystemSpec& system, State ic, double t_end, const SolveOptions& opt) {
  const double t0 = system.t0;
  if (!(t_end > t0)) throw InvalidArgument("solve_ivp: t_end must exceed t0");
  if (!(opt.tol.rel > 0.0) || !(opt.tol.abs > 0.0)) {
    throw InvalidArgument("solve_ivp: tolerances must be positive");
  }
  if (!std::isfinite(ic.u) || !std::isfinite(ic.v)) {
    throw InvalidArgument("solve_ivp: initial condition must be finite");
  }
  system.require_defined_on(t_end);

  Trajectory traj(t0, ic, opt.tol);
  if (blown_up(ic, opt.blowup_threshold)) {
    traj.mark_blowup(t0);
    return traj;
  }
  const Rhs f{system};

  // Dormand-Prince 5(4) tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                   a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                   d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                   d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  auto axpy = [](State y, double h, std::initializer_list<std::pair<double, State>> terms) {
    for (const auto& [c, k] : terms) {
      y.u += h * c * k.u;
      y.v += h * c * k.v;
    }
    return y;
  };

  double t = t0;
  State y = ic;
  State k1 = f(t, y);

  // Initial step (Hairer-Norsett-Wanner heuristic).
  double h;
  {
    const Tolerances& tol = opt.tol;
    auto norm = [&](State s) {
      const double su = tol.abs + tol.rel * std::abs(y.u);
      const double sv = tol.abs + tol.rel * std::abs(y.v);
      return std::sqrt(0.5 * ((s.u / su) * (s.u / su) + (s.v / sv) * (s.v / sv)));
    };
    const double dn0 = norm(y);
    const double dn1 = norm(k1);
    double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
    h0 = std::min(h0, t_end - t0);
    const State y1 = axpy(y, h0, {{1.0, k1}});
    const State f1 = f(t0 + h0, y1);
    const double dn2 = norm({f1.u - k1.u, f1.v - k1.v}) / h0;
    const double dmax = std::max(dn1, dn2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    h = std::min({100.0 * h0, h1, t_end - t0});
  }

  constexpr double beta = 0.04;
  constexpr double expo1 = 0.2 - beta * 0.75;
  constexpr double safe = 0.9;
  constexpr double fac_min = 0.2;  // largest allowed shrink is 1/5
  constexpr double fac_max = 10.0;
  double err_old = 1e-4;
  long steps = 0;
  int stiff_count = 0;
  bool rejected_last = false;

  while (t < t_end) {
    if (++steps > opt.max_steps) {
      throw SolverError("step budget exhausted at t=" + format_double(t));
    }
    bool last = false;
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      last = true;
    }
    check_step(t, h);

    const State k2 = f(t + c2 * h, axpy(y, h, {{a21, k1}}));
    const State k3 = f(t + c3 * h, axpy(y, h, {{a31, k1}, {a32, k2}}));
    const State k4 = f(t + c4 * h, axpy(y, h, {{a41, k1}, {a42, k2}, {a43, k3}}));
    const State k5 = f(t + c5 * h, axpy(y, h, {{a51, k1}, {a52, k2}, {a53, k3}, {a54, k4}}));
    const State k6 =
        f(t + h, axpy(y, h, {{a61, k1}, {a62, k2}, {a63, k3}, {a64, k4}, {a65, k5}}));
    const double t_new = last ? t_end : t + h;
    const State y_new = axpy(y, h, {{a71, k1}, {a73, k3}, {a74, k4}, {a75, k5}, {a76, k6}});
    const State k7 = f(t_new, y_new);
    const State err_vec =
        axpy(State{}, h, {{e1, k1}, {e3, k3}, {e4, k4}, {e5, k5}, {e6, k6}, {e7, k7}});
    const double err = error_norm(err_vec, y, y_new, opt.tol);

    const double fac11 = std::pow(std::max(err, 1e-300), expo1);
    if (std::isfinite(err) && err <= 1.0) {
      double fac = fac11 / std::pow(err_old, beta);
      fac = std::clamp(fac / safe, 1.0 / fac_max, 1.0 / fac_min);
      double h_next = h / fac;
      err_old = std::max(err, 1e-4);

      Step st{Step::Kind::explicit_rk, t, h, {}, {}};
      const State dy{y_new.u - y.u, y_new.v - y.v};
      const State r5 = axpy(State{}, h, {{d1, k1}, {d3, k3}, {d4, k4}, {d5, k5}, {d6, k6}, {d7, k7}});
      st.cu = {y.u, dy.u, h * k1.u - dy.u, 0.0, r5.u};
      st.cv = {y.v, dy.v, h * k1.v - dy.v, 0.0, r5.v};
      st.cu[3] = dy.u - h * k7.u - st.cu[2];
      st.cv[3] = dy.v - h * k7.v - st.cv[2];
      traj.append(st, t_new, y_new);

      t = t_new;
      y = y_new;
      k1 = k7;
      if (blown_up(y, opt.blowup_threshold)) {
        traj.mark_blowup(t);
        return traj;
      }
      if (rejected_last) h_next = std::min(h_next, h);
      rejected_last = false;

      if (opt.stiff_switch && t < t_end) {
        if (h * f.spectral_radius(t) > 2.5) {
          ++stiff_count;
        } else {
          stiff_count = 0;
        }
        if (stiff_count >= 15) {
          traj.mark_stiff_switch(t);
          integrate_implicit(system, t, y, h, t_end, opt, traj, steps);
          return traj;
        }
      }
      h = h_next;
    } else {
      rejected_last = true;
      h = std::isfinite(err) ? h / std::min(1.0 / fac_min, fac11 / safe) : h * fac_min;
    }
  }
  return traj;
}

}  // namespace stifflab
