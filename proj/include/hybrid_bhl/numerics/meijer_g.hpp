#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "../core.hpp"
#include "gamma.hpp"

namespace hybrid_bhl::numerics {

// G^{m,n}_{p,q}(z | a_1..a_p ; b_1..b_q). The first n entries of a and the
// first m entries of b are the numerator groups.
struct MeijerParams {
  std::vector<double> a;
  std::size_t n = 0;
  std::vector<double> b;
  std::size_t m = 0;
};

enum class ContourPlacement {
  Midpoint,  // halfway between the rightmost left pole and the leftmost right pole
  ZAdaptive  // where |Phi(c) z^c| is smallest on the real axis (least cancellation)
};

struct ContourSpec {
  std::optional<double> abscissa;  // overrides placement
  ContourPlacement placement = ContourPlacement::Midpoint;
  double half_width = 10.0;        // initial T, grown until the tail is negligible
  int nodes = 200;                 // initial trapezoid nodes on [0, T]
  double abs_tol = 0.0;  // purely relative by default
  double rel_tol = 1e-10;
};

namespace detail {

struct MbSetup {
  double c;
  double pole_gap;  // distance from c to the nearest pole
  double kappa;     // exponential decay rate of |integrand| is pi * kappa
};

inline std::complex<double> log_phi(const MeijerParams& p, std::complex<double> s);

// Golden-section minimum of log|Phi(c) z^c| over (lo, hi).
inline double min_modulus_abscissa(const MeijerParams& p, double lz, double lo, double hi) {
  auto f = [&](double c) { return log_phi(p, {c, 0.0}).real() + c * lz; };
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 80 && b - a > 1e-6; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

// z only matters for ZAdaptive placement.
inline MbSetup mb_setup(const MeijerParams& p, const ContourSpec& cs, double z = 1.0) {
  require(p.m <= p.b.size() && p.n <= p.a.size(), "Meijer-G: m > q or n > p");
  require(p.m + p.n > 0, "Meijer-G: m + n must be positive");
  for (double v : p.a) require_finite(v, "Meijer-G parameter");
  for (double v : p.b) require_finite(v, "Meijer-G parameter");

  // Left poles: a_j - 1 - k (j < n). Right poles: b_j + k (j < m).
  double left = -std::numeric_limits<double>::infinity();
  double right = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < p.n; ++j) left = std::max(left, p.a[j] - 1.0);
  for (std::size_t j = 0; j < p.m; ++j) right = std::min(right, p.b[j]);
  if (p.n > 0 && p.m > 0 && !(left < right)) {
    throw NumericFailure("Meijer-G: left and right pole sets overlap (max a - 1 = " +
                         std::to_string(left) + " >= min b = " + std::to_string(right) + ")");
  }
  double c;
  if (cs.abscissa) c = *cs.abscissa;
  else if (p.n == 0) c = right - 0.5;
  else if (p.m == 0) c = left + 0.5;
  else if (cs.placement == ContourPlacement::Midpoint) c = 0.5 * (left + right);
  else {
    // Keep a quarter unit (or a quarter of the strip) away from the poles so
    // the trapezoid step stays reasonable.
    const double lo = p.n > 0 ? left : right - 40.0;
    const double hi = p.m > 0 ? right : left + 40.0;
    const double d = std::min(0.25, 0.25 * (hi - lo));
    c = min_modulus_abscissa(p, std::log(z), lo + d, hi - d);
  }

  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < p.n; ++j) {
    const double d = c - (p.a[j] - 1.0);
    if (d <= 0.0) throw NumericFailure("Meijer-G: contour left of a left pole");
    gap = std::min(gap, d);
  }
  for (std::size_t j = 0; j < p.m; ++j) {
    const double d = p.b[j] - c;
    if (d <= 0.0) throw NumericFailure("Meijer-G: contour right of a right pole");
    gap = std::min(gap, d);
  }
  if (!(gap > 1e-10)) throw NumericFailure("Meijer-G: pole on contour");

  const double kappa = static_cast<double>(p.m + p.n) - 0.5 * static_cast<double>(p.a.size() + p.b.size());
  if (!(kappa > 0.0)) throw NumericFailure("Meijer-G: integrand does not decay along the contour");
  return {c, gap, kappa};
}

// log of Gamma-ratio kernel Phi(s).
inline std::complex<double> log_phi(const MeijerParams& p, std::complex<double> s) {
  std::complex<double> acc = 0.0;
  for (std::size_t j = 0; j < p.b.size(); ++j)
    acc += j < p.m ? log_gamma(p.b[j] - s) : -log_gamma(1.0 - p.b[j] + s);
  for (std::size_t j = 0; j < p.a.size(); ++j)
    acc += j < p.n ? log_gamma(1.0 - p.a[j] + s) : -log_gamma(p.a[j] - s);
  return acc;
}

}  // namespace detail

// Mellin-Barnes evaluation on Re s = c:
//   G(z) = (1/pi) int_0^inf Re[ Phi(c + i t) z^(c + i t) ] dt
// by the trapezoid rule, extending T until the tail is below tolerance and
// halving the step until successive sums agree.
inline double meijer_g_mb(const MeijerParams& p, double z, const ContourSpec& cs = {}) {
  require(z > 0.0 && std::isfinite(z), "Meijer-G: z must be positive");
  require(cs.half_width > 0.0 && cs.nodes > 0, "Meijer-G: bad contour spec");
  const auto setup = detail::mb_setup(p, cs, z);
  const double lz = std::log(z);
  auto g = [&](double t) {
    const std::complex<double> s(setup.c, t);
    return std::exp(detail::log_phi(p, s) + s * lz).real();
  };
  auto gabs = [&](double t) {
    const std::complex<double> s(setup.c, t);
    return std::exp((detail::log_phi(p, s) + s * lz).real());
  };

  // Tail: |g(t)| ~ exp(-pi kappa t) once t is large; integral beyond T is
  // about |g(T)| / (pi kappa).
  const double scale = gabs(0.0);
  double T = cs.half_width;
  const double tail_rate = std::numbers::pi * setup.kappa;
  for (int grow = 0;; ++grow) {
    const double tail = std::max(gabs(T), gabs(T - 0.5)) / tail_rate;
    if (tail <= std::max(cs.abs_tol, cs.rel_tol * 1e-2 * scale)) break;
    if (grow > 40) throw NumericFailure("Meijer-G: contour tail does not decay", std::numeric_limits<double>::quiet_NaN(), tail);
    T *= 1.5;
  }

  double h = std::min(T / cs.nodes, setup.pole_gap / 2.0);
  int n = static_cast<int>(std::ceil(T / h));
  h = T / n;
  double sum = 0.5 * g(0.0);
  for (int k = 1; k < n; ++k) sum += g(k * h);
  sum += 0.5 * g(T);
  double prev = sum * h / std::numbers::pi;
  for (int level = 0; level < 12; ++level) {
    double mid = 0.0;
    for (int k = 0; k < n; ++k) mid += g((k + 0.5) * h);
    sum += mid;
    n *= 2;
    h *= 0.5;
    const double cur = sum * h / std::numbers::pi;
    if (std::abs(cur - prev) <= std::max(cs.abs_tol, cs.rel_tol * std::abs(cur))) return cur;
    prev = cur;
  }
  throw NumericFailure("Meijer-G: trapezoid refinement did not converge", prev);
}

// Fixed-node evaluator for many z with the same parameters. The step is a
// sixth of the pole gap, the truncation point where |Phi| has dropped by
// 1e-18 relative to its peak. With ZAdaptive placement one contour is kept
// per band of z (split at 1e-2, 1, 1e2), each placed for the band centre.
class MeijerGTable {
 public:
  explicit MeijerGTable(MeijerParams p, const ContourSpec& cs = {}) : p_(std::move(p)) {
    if (cs.placement == ContourPlacement::ZAdaptive && !cs.abscissa) {
      for (double zc : {1e-3, 0.1, 10.0, 1e3}) bands_.push_back(build(detail::mb_setup(p_, cs, zc), cs));
    } else {
      bands_.push_back(build(detail::mb_setup(p_, cs), cs));
    }
  }

  double operator()(double z) const {
    require(z > 0.0 && std::isfinite(z), "Meijer-G: z must be positive");
    std::size_t band = 0;
    if (bands_.size() > 1) band = z < 1e-2 ? 0 : z < 1.0 ? 1 : z < 1e2 ? 2 : 3;
    const Nodes& nd = bands_[band];
    const double lz = std::log(z);
    // z^(i t_k) by rotation recurrence, re-anchored every 64 steps.
    const std::complex<double> step = std::polar(1.0, nd.h * lz);
    std::complex<double> rot = 1.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < nd.phi.size(); ++k) {
      if (k % 64 == 0) rot = std::polar(1.0, static_cast<double>(k) * nd.h * lz);
      sum += (nd.phi[k] * rot).real();
      rot *= step;
    }
    return std::exp(nd.c * lz) * sum * nd.h / std::numbers::pi;
  }

  std::size_t node_count() const {
    std::size_t n = 0;
    for (const auto& b : bands_) n += b.phi.size();
    return n;
  }

 private:
  struct Nodes {
    double c = 0.0;
    double h = 0.0;
    std::vector<std::complex<double>> phi;
  };

  Nodes build(const detail::MbSetup& setup, const ContourSpec& cs) const {
    Nodes nd;
    nd.c = setup.c;
    double T = cs.half_width;
    const double peak = std::exp(detail::log_phi(p_, {nd.c, 0.0}).real());
    for (int grow = 0;; ++grow) {
      if (std::exp(detail::log_phi(p_, {nd.c, T}).real()) < 1e-18 * peak) break;
      if (grow > 40) throw NumericFailure("Meijer-G table: kernel does not decay");
      T *= 1.25;
    }
    const double h = std::min(0.05, setup.pole_gap / 6.0);
    const int n = static_cast<int>(std::ceil(T / h));
    nd.h = T / n;
    nd.phi.resize(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
      auto& v = nd.phi[static_cast<std::size_t>(k)];
      v = std::exp(detail::log_phi(p_, {nd.c, k * nd.h}));
      if (k == 0 || k == n) v *= 0.5;
    }
    return nd;
  }

  MeijerParams p_;
  std::vector<Nodes> bands_;
};

}  // namespace hybrid_bhl::numerics
