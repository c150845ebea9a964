#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "../core.hpp"

namespace hybrid_bhl::numerics {

struct QuadSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_subdivisions = 500;

  void validate() const {
    // abs_tol = 0 asks for a purely relative target
    require(abs_tol >= 0.0 && std::isfinite(abs_tol), "abs_tol must be non-negative and finite");
    require_positive(rel_tol, "rel_tol");
    require(max_subdivisions > 0, "max_subdivisions must be positive");
  }
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
};

namespace detail {

// Kronrod 21-point abscissae and weights, Gauss 10-point weights (QUADPACK qk21).
inline constexpr double kXgk[11] = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr double kWgk[11] = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525255696, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr double kWg[5] = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk21(F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double resg = 0.0;
  double resk = fc * kWgk[10];
  double resabs = std::abs(resk);
  double fv1[10], fv2[10];
  for (int j = 0; j < 5; ++j) {
    const int jt = 2 * j + 1;
    const double dx = h * kXgk[jt];
    const double f1 = f(c - dx), f2 = f(c + dx);
    fv1[jt] = f1;
    fv2[jt] = f2;
    resg += kWg[j] * (f1 + f2);
    resk += kWgk[jt] * (f1 + f2);
    resabs += kWgk[jt] * (std::abs(f1) + std::abs(f2));
  }
  for (int j = 0; j < 5; ++j) {
    const int jt = 2 * j;
    const double dx = h * kXgk[jt];
    const double f1 = f(c - dx), f2 = f(c + dx);
    fv1[jt] = f1;
    fv2[jt] = f2;
    resk += kWgk[jt] * (f1 + f2);
    resabs += kWgk[jt] * (std::abs(f1) + std::abs(f2));
  }
  const double reskh = 0.5 * resk;
  double resasc = kWgk[10] * std::abs(fc - reskh);
  for (int j = 0; j < 10; ++j) resasc += kWgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
  const double result = resk * h;
  resabs *= std::abs(h);
  resasc *= std::abs(h);
  double err = std::abs((resk - resg) * h);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  return {a, b, result, err};
}

template <class F>
QuadResult adaptive_finite(F& f, double a, double b, const QuadSpec& spec) {
  std::priority_queue<Segment> heap;
  Segment s0 = gk21(f, a, b);
  double total = s0.value, err = s0.error;
  heap.push(s0);
  int n = 1;
  auto done = [&] { return err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(total)); };
  while (!done()) {
    if (n >= spec.max_subdivisions) {
      throw NumericFailure("adaptive quadrature: subdivision limit reached (estimate " +
                               std::to_string(total) + ", error " + std::to_string(err) + ")",
                           total, err);
    }
    Segment s = heap.top();
    heap.pop();
    const double m = 0.5 * (s.a + s.b);
    if (!(m > s.a && m < s.b)) {
      throw NumericFailure("adaptive quadrature: interval collapsed at " + std::to_string(s.a),
                           total, err);
    }
    Segment l = gk21(f, s.a, m), r = gk21(f, m, s.b);
    total += l.value + r.value - s.value;
    err += l.error + r.error - s.error;
    heap.push(l);
    heap.push(r);
    ++n;
    // Running sums drift; resum occasionally.
    if (n % 64 == 0) {
      auto copy = heap;
      total = err = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        err += copy.top().error;
        copy.pop();
      }
    }
  }
  return {total, err, n};
}

}  // namespace detail

// Global adaptive Gauss-Kronrod (21 point). b may be +inf, handled by the
// substitution x = a + (1 - t) / t on t in (0, 1]. GK nodes never touch the
// interval ends, so integrable endpoint singularities are fine.
template <class F>
QuadResult integrate_adaptive_detailed(F&& f, double a, double b, const QuadSpec& spec = {}) {
  spec.validate();
  require(std::isfinite(a), "lower integration limit must be finite");
  require(!std::isnan(b), "upper integration limit is NaN");
  if (b == a) return {0.0, 0.0, 0};
  require(b > a, "integration limits reversed");
  if (std::isinf(b)) {
    auto g = [&](double t) {
      const double x = a + (1.0 - t) / t;
      const double v = f(x);
      return v == 0.0 ? 0.0 : v / (t * t);
    };
    return detail::adaptive_finite(g, 0.0, 1.0, spec);
  }
  auto g = [&](double x) { return static_cast<double>(f(x)); };
  return detail::adaptive_finite(g, a, b, spec);
}

template <class F>
double integrate_adaptive(F&& f, double a, double b, const QuadSpec& spec = {}) {
  return integrate_adaptive_detailed(std::forward<F>(f), a, b, spec).value;
}

}  // namespace hybrid_bhl::numerics
