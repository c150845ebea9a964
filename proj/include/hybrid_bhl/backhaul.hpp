#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "channels.hpp"
#include "core.hpp"
#include "numerics/convolution.hpp"
#include "rng.hpp"

namespace hybrid_bhl {

// Up to three independent backhaul links and how they are combined.
struct BackhaulSpec {
  std::vector<ChannelModel> links;
  Combiner combiner = Combiner::Mrc;
  friend bool operator==(const BackhaulSpec&, const BackhaulSpec&) = default;
};

inline void validate(const BackhaulSpec& s) {
  require(!s.links.empty() && s.links.size() <= 3, "backhaul needs 1 to 3 links");
  for (const auto& l : s.links) validate(l);
}

inline double combine_draws(Combiner c, std::span<const double> draws) {
  require(!draws.empty(), "combine_draws needs at least one draw");
  if (c == Combiner::Osc) return *std::max_element(draws.begin(), draws.end());
  double s = 0.0;
  for (double d : draws) s += d;
  return s;
}

class BackhaulSampler {
 public:
  explicit BackhaulSampler(const BackhaulSpec& s) : combiner_(s.combiner) {
    validate(s);
    for (const auto& l : s.links) links_.emplace_back(l);
    buf_.resize(links_.size());
  }

  double operator()(Rng& rng) {
    for (std::size_t i = 0; i < links_.size(); ++i) buf_[i] = links_[i](rng);
    return combine_draws(combiner_, buf_);
  }

 private:
  Combiner combiner_;
  std::vector<ChannelSampler> links_;
  std::vector<double> buf_;
};

inline double sample_bhl_snr(const BackhaulSpec& s, Rng& rng) {
  BackhaulSampler b(s);
  return b(rng);
}

// Monotone cubic (Fritsch-Carlson) interpolation of log F against log gamma.
// Used for links whose CDF costs a quadrature per call; below the table the
// lower tail follows the exact power law.
class LogCdfTable {
 public:
  LogCdfTable(const ChannelDistribution& d, double lo, double hi, double per_decade = 100.0)
      : lo_(std::log(lo)), exponent_(tail_exponent(d.model())) {
    const int n = static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade)) + 1;
    step_ = (std::log(hi) - lo_) / (n - 1);
    y_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double v = d.cdf(std::exp(lo_ + i * step_)).value;
      require(v > 0.0, "LogCdfTable: CDF underflows at the table start");
      y_[static_cast<std::size_t>(i)] = std::log(v);
    }
    top_ = d.cdf(std::numeric_limits<double>::infinity()).value;
    slopes();
  }

  double operator()(double g) const {
    if (!(g > 0.0)) return 0.0;
    const double x = std::log(g);
    if (x <= lo_) return std::exp(y_.front() + exponent_ * (x - lo_));
    const double t = (x - lo_) / step_;
    const std::size_t i = static_cast<std::size_t>(t);
    if (i + 1 >= y_.size()) return std::min(top_, std::exp(y_.back()));
    const double s = t - static_cast<double>(i);
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    const double y = h00 * y_[i] + h10 * step_ * m_[i] + h01 * y_[i + 1] + h11 * step_ * m_[i + 1];
    return std::min(top_, std::exp(y));
  }

 private:
  void slopes() {
    const std::size_t n = y_.size();
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / step_;
    m_.assign(n, 0.0);
    m_[0] = d[0];
    m_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = d[i - 1] * d[i] <= 0.0 ? 0.0 : 0.5 * (d[i - 1] + d[i]);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (d[i] == 0.0) {
        m_[i] = m_[i + 1] = 0.0;
        continue;
      }
      const double a = m_[i] / d[i], b = m_[i + 1] / d[i];
      const double r = a * a + b * b;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        m_[i] = tau * a * d[i];
        m_[i + 1] = tau * b * d[i];
      }
    }
  }

  double lo_, step_, exponent_, top_ = 1.0;
  std::vector<double> y_, m_;
};

struct MrcSpec {
  std::size_t start_cells = 4096;
  std::size_t max_cells = 32768;
  double rel_change = 1e-3;
};

struct BhlCdf {
  double value = 0.0;
  double error = 0.0;  // grid-refinement change (MRC) or series truncation (OSC)
};

// Analytic CDF of the combined backhaul SNR. OSC is the product of the link
// CDFs. MRC is the CDF of the sum, from a cell-mass convolution refined by
// doubling until the value changes by less than rel_change relative.
class BackhaulDistribution {
 public:
  explicit BackhaulDistribution(const BackhaulSpec& s, MrcSpec mrc = {}) : spec_(s), mrc_(mrc) {
    validate(s);
    require(mrc.start_cells >= 16 && mrc.max_cells >= mrc.start_cells, "bad MRC grid spec");
    for (const auto& l : s.links) dists_.push_back(std::make_shared<const ChannelDistribution>(l));
    // Most singular lower tail first: it enters the MRC sum through its exact CDF.
    order_.resize(s.links.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return tail_exponent(s.links[a]) < tail_exponent(s.links[b]);
    });
    for (std::size_t i : order_) {
      auto d = dists_[i];
      if (technology(d->model()) == Technology::Thz && s.combiner == Combiner::Mrc && s.links.size() > 1) {
        const double gb = d->model().gamma_bar.value();
        auto table = std::make_shared<const LogCdfTable>(*d, 1e-14 * gb, 1e5 * gb);
        cdfs_.push_back([table](double g) { return (*table)(g); });
      } else {
        cdfs_.push_back([d](double g) { return d->cdf(g).value; });
      }
    }
  }

  const BackhaulSpec& spec() const { return spec_; }
  const ChannelDistribution& link(std::size_t i) const { return *dists_.at(i); }

  // Law of the MRC sum as cell masses on [0, g_max]: every link is lumped
  // into n cells of width h, the masses are convolved, and mass k of the sum
  // sits at (k + L/2) h. Mass beyond g_max is dropped (1 - sum of masses).
  struct MassGrid {
    double h = 0.0;
    double offset = 0.0;
    std::vector<double> mass;
  };

  MassGrid sum_masses(double g_max, std::size_t cells) const {
    require(g_max > 0.0 && std::isfinite(g_max) && cells >= 2, "sum_masses needs a positive range");
    MassGrid m;
    m.h = g_max / static_cast<double>(cells);
    m.offset = 0.5 * static_cast<double>(cdfs_.size());
    for (const auto& f : cdfs_) {
      std::vector<double> cell(cells);
      double prev = 0.0;
      for (std::size_t i = 0; i < cells; ++i) {
        const double cur = f(static_cast<double>(i + 1) * m.h);
        cell[i] = std::max(0.0, cur - prev);
        prev = std::max(prev, cur);
      }
      m.mass = m.mass.empty() ? std::move(cell) : numerics::convolve_truncated(m.mass, cell, cells);
    }
    return m;
  }

  BhlCdf cdf(double g) const {
    require(g >= 0.0 && !std::isnan(g), "cdf_bhl needs gamma >= 0");
    if (g == 0.0) return {};
    if (spec_.combiner == Combiner::Osc || dists_.size() == 1) {
      double p = 1.0, err = 0.0;
      for (const auto& d : dists_) {
        const auto c = d->cdf(g);
        p *= c.value;
        err += c.truncation;
      }
      return {p, err};
    }
    if (std::isinf(g)) {
      double p = 1.0;
      for (const auto& d : dists_) p *= 1.0 - d->mass_deficit();
      return {p, 0.0};
    }
    std::size_t n = mrc_.start_cells;
    double prev = numerics::sum_cdf_at(cdfs_, g, n);
    for (n *= 2; n <= mrc_.max_cells; n *= 2) {
      const double cur = numerics::sum_cdf_at(cdfs_, g, n);
      const double change = std::abs(cur - prev);
      if (change <= mrc_.rel_change * std::abs(cur)) return {cur, change};
      prev = cur;
    }
    throw NumericFailure("MRC grid refinement did not stabilise within " + std::to_string(mrc_.rel_change) +
                             " (relative) at gamma = " + std::to_string(g),
                         prev);
  }

 private:
  BackhaulSpec spec_;
  MrcSpec mrc_;
  std::vector<std::shared_ptr<const ChannelDistribution>> dists_;
  std::vector<std::size_t> order_;
  std::vector<numerics::CdfFn> cdfs_;
};

inline BhlCdf cdf_bhl(const BackhaulSpec& s, SnrValue g) { return BackhaulDistribution(s).cdf(g.value()); }

// Closed-form order: min over the exponents contributed by the present links,
// mmWave (and RF) 1, FSO {beta/2, phi/2}, THz {1/2, rho/2}. Reads parameters
// only; no model validation.
inline double diversity_order_bhl(const BackhaulSpec& s) {
  require(!s.links.empty() && s.links.size() <= 3, "backhaul needs 1 to 3 links");
  double d = std::numeric_limits<double>::infinity();
  for (const auto& l : s.links) {
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, FsoFading>) d = std::min({d, 0.5 * f.beta, 0.5 * f.pointing.phi});
          else if constexpr (std::is_same_v<T, ThzFading>) d = std::min({d, 0.5, 0.5 * f.rho});
          else d = std::min(d, 1.0);
        },
        l.fading);
  }
  return d;
}

// Exact lower-tail exponent of the combined SNR: the link exponents add for
// both MRC and OSC (independent links).
inline double combined_tail_exponent(const BackhaulSpec& s) {
  double d = 0.0;
  for (const auto& l : s.links) d += tail_exponent(l);
  return d;
}

// Slope-only surrogate c gamma^d with c fixed by the exact CDF at an anchor.
// d defaults to diversity_order_bhl.
inline double asymptotic_cdf_mrc(const BackhaulDistribution& d, double gamma, double anchor,
                                 std::optional<double> exponent = std::nullopt) {
  require(gamma > 0.0 && anchor > 0.0, "asymptotic_cdf_mrc needs positive SNRs");
  const double e = exponent.value_or(diversity_order_bhl(d.spec()));
  const double c = d.cdf(anchor).value / std::pow(anchor, e);
  return c * std::pow(gamma, e);
}

}  // namespace hybrid_bhl
