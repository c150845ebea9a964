#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "../core.hpp"

namespace hybrid_bhl::numerics {

struct ConvolveSpec {
  std::size_t points = 4096;  // uniform resampling grid size per input extent
  double mass_tol = 1e-3;
};

// Density of X + Y for independent X ~ a, Y ~ b (tabulated PDFs on [0, ...)).
// Both inputs are resampled onto one uniform grid and convolved with the
// trapezoid rule; the result lives on [0, max_a + max_b].
inline DistCurve convolve_pdfs(const DistCurve& a, const DistCurve& b, const ConvolveSpec& spec = {}) {
  require(a.kind() == CurveKind::Pdf && b.kind() == CurveKind::Pdf, "convolve_pdfs needs PDF curves");
  require(a.grid().front() >= 0.0 && b.grid().front() >= 0.0, "convolve_pdfs needs non-negative grids");
  require(spec.points >= 16, "convolution grid too coarse");
  for (const DistCurve* c : {&a, &b}) {
    const double m = c->mass();
    if (std::abs(m - c->target_mass()) > spec.mass_tol) {
      throw NumericFailure("convolve_pdfs: input mass " + std::to_string(m) + " differs from declared " +
                           std::to_string(c->target_mass()));
    }
  }
  const double h = std::min(a.grid().back(), b.grid().back()) / static_cast<double>(spec.points - 1);
  const double top = a.grid().back() + b.grid().back();
  const std::size_t n = static_cast<std::size_t>(std::ceil(top / h)) + 1;

  std::vector<double> fa(n), fb(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(i) * h;
    fa[i] = a.at(x[i]);
    fb[i] = b.at(x[i]);
  }
  // Pointwise resampling that loses mass means the grids are incompatible.
  auto trap = [&](const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 1; i < n; ++i) s += 0.5 * (f[i] + f[i - 1]) * h;
    return s;
  };
  if (std::abs(trap(fa) - a.mass()) > spec.mass_tol || std::abs(trap(fb) - b.mass()) > spec.mass_tol)
    throw NumericFailure("convolve_pdfs: input grid too coarse or too fine to resample");

  std::vector<double> out(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    double s = 0.5 * (fa[0] * fb[k] + fa[k] * fb[0]);
    for (std::size_t j = 1; j < k; ++j) s += fa[j] * fb[k - j];
    out[k] = s * h;
  }
  DistCurve result(CurveKind::Pdf, std::move(x), std::move(out), a.target_mass() * b.target_mass());
  if (std::abs(result.mass() - result.target_mass()) > 2.0 * spec.mass_tol)
    throw NumericFailure("convolve_pdfs: mass not preserved", result.mass());
  return result;
}

using CdfFn = std::function<double(double)>;

// Linear convolution truncated to n entries.
inline std::vector<double> convolve_truncated(const std::vector<double>& u, const std::vector<double>& v,
                                              std::size_t n) {
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < std::min(n, u.size()); ++i) {
    if (u[i] == 0.0) continue;
    const std::size_t lim = std::min(v.size(), n - i);
    for (std::size_t j = 0; j < lim; ++j) w[i + j] += u[i] * v[j];
  }
  return w;
}

// CDF of X_1 + ... + X_L at g for independent non-negative X_i with CDFs
// F_i. X_2..X_L are lumped into cell masses on a uniform n-cell grid over
// [0, g] (each mass at its cell midpoint); X_1 enters through its exact CDF:
//   F(g) = sum_k q_k F_1(g - x_k)
// The caller should put the link with the most singular density first.
inline double sum_cdf_at(std::span<const CdfFn> cdfs, double g, std::size_t cells) {
  require(!cdfs.empty(), "sum_cdf_at needs at least one CDF");
  require(cells >= 2, "sum_cdf_at needs at least two cells");
  if (!(g > 0.0)) return 0.0;
  if (cdfs.size() == 1) return cdfs[0](g);
  const double h = g / static_cast<double>(cells);

  std::vector<double> q;
  for (std::size_t l = 1; l < cdfs.size(); ++l) {
    std::vector<double> mass(cells);
    double prev = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
      const double cur = cdfs[l](static_cast<double>(i + 1) * h);
      mass[i] = std::max(0.0, cur - prev);
      prev = std::max(prev, cur);
    }
    q = q.empty() ? std::move(mass) : convolve_truncated(q, mass, cells);
  }
  // After L-1 lumps, mass k sits at (k + (L-1)/2) h.
  const double offset = 0.5 * static_cast<double>(cdfs.size() - 1);
  double s = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] == 0.0) continue;
    const double rest = g - (static_cast<double>(k) + offset) * h;
    if (rest <= 0.0) break;
    s += q[k] * cdfs[0](rest);
  }
  return s;
}

}  // namespace hybrid_bhl::numerics
