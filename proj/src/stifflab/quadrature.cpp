#include "stifflab/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <sstream>

#include "stifflab/errors.hpp"

namespace stifflab {
namespace {

// Kronrod abscissae; the odd entries are the 7-point Gauss nodes.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    kronrod += kWgk[j] * s;
    if (j % 2 == 1) gauss += kWg[j / 2] * s;
  }
  kronrod *= h;
  gauss *= h;
  if (!std::isfinite(kronrod)) {
    std::ostringstream os;
    os << "integrand not finite on [" << a << ", " << b << "]";
    throw QuadratureError(os.str());
  }
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace

QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              const QuadOptions& opt) {
  if (a == b) return {};
  if (a > b) {
    QuadResult r = integrate_adaptive(f, b, a, opt);
    r.value = -r.value;
    return r;
  }
  std::priority_queue<Segment> heap;
  Segment first = gk15(f, a, b);
  heap.push(first);
  double value = first.value;
  double error = first.error;
  int evaluations = 15;
  int intervals = 1;
  while (error > std::max(opt.abs, opt.rel * std::abs(value))) {
    if (intervals >= opt.max_intervals) {
      std::ostringstream os;
      os << "adaptive quadrature did not converge on [" << a << ", " << b
         << "]: estimated error " << error << " after " << intervals << " intervals";
      throw QuadratureError(os.str());
    }
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval cannot be split further in floating point; accept what we have.
      heap.push(worst);
      break;
    }
    Segment left = gk15(f, worst.a, mid);
    Segment right = gk15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    evaluations += 30;
    ++intervals;
  }
  // Re-sum to shed the drift of the running updates.
  value = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  return {value, error, evaluations};
}

double panel_integral(std::span<const double> times, std::size_t i,
                      const std::function<double(std::size_t)>& value_at) {
  const std::size_t n = times.size();
  // Stencil of four points containing [i, i+1], centred where possible.
  std::size_t s = (i == 0) ? 0 : i - 1;
  if (s + 3 >= n) s = n - 4;
  const double a = times[i];
  const double b = times[i + 1];
  // Integrate each Lagrange basis polynomial over [a, b] with 3-point Gauss
  // (exact for cubics).
  constexpr double g = 0.774596669241483377035853079956;
  const std::array<double, 3> nodes = {-g, 0.0, g};
  const std::array<double, 3> weights = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double total = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    double wj = 0.0;
    for (std::size_t q = 0; q < 3; ++q) {
      const double x = c + h * nodes[q];
      double l = 1.0;
      for (std::size_t m = 0; m < 4; ++m) {
        if (m == j) continue;
        l *= (x - times[s + m]) / (times[s + j] - times[s + m]);
      }
      wj += weights[q] * l;
    }
    total += h * wj * value_at(s + j);
  }
  return total;
}

std::vector<double> cumulative_integral_sampled(std::span<const double> times,
                                                std::span<const double> values) {
  if (times.size() != values.size() || times.size() < 4) {
    throw InvalidArgument("cumulative_integral_sampled needs >= 4 matching samples");
  }
  std::vector<double> out(times.size(), 0.0);
  const auto at = [&](std::size_t j) { return values[j]; };
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    out[i + 1] = out[i] + panel_integral(times, i, at);
  }
  return out;
}

}  // namespace stifflab
