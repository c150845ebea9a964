#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "backhaul.hpp"
#include "core.hpp"
#include "iot_access.hpp"
#include "numerics/gamma.hpp"
#include "rng.hpp"

namespace hybrid_bhl {

// Access hop and backhaul hop joined by a decode-and-forward UAV.
struct IntegratedSpec {
  AccessSpec access;
  BackhaulSpec backhaul;
  SnrDb nominal{0.0};  // the swept average SNR this instance was built for
};

inline void validate(const IntegratedSpec& s) {
  validate(s.access);
  validate(s.backhaul);
}

// P(at least one hop fails) for independent hops: 1 - (1 - a)(1 - b).
inline double combine_df(double a, double b) {
  require(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0, "combine_df needs probabilities");
  const double r = a + b - a * b;
  return std::clamp(r, std::max(a, b), 1.0);
}

struct HopDraw {
  double access = 0.0;
  double backhaul = 0.0;
  double integrated() const { return std::min(access, backhaul); }
};

class IntegratedSampler {
 public:
  explicit IntegratedSampler(const IntegratedSpec& s) : access_(s.access), bhl_(s.backhaul) { validate(s.access); }
  HopDraw draw(Rng& rng) {
    HopDraw d;
    d.access = sample_access_snr(access_, rng);
    d.backhaul = bhl_(rng);
    return d;
  }
  double operator()(Rng& rng) { return draw(rng).integrated(); }

 private:
  AccessSpec access_;
  BackhaulSampler bhl_;
};

inline double sample_integrated_snr(const IntegratedSpec& s, Rng& rng) {
  IntegratedSampler smp(s);
  return smp(rng);
}

enum class Metric { Outage, Aber, ErgodicCapacity };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::Outage: return "outage";
    case Metric::Aber: return "aber";
    case Metric::ErgodicCapacity: return "ergodic_capacity";
  }
  return "?";
}

struct MetricResult {
  Metric metric = Metric::Outage;
  SnrDb gamma_bar_db{0.0};
  std::optional<double> analytic;
  double analytic_tolerance = 0.0;
  Estimate monte_carlo;
  bool flagged = false;  // analytic and MC disagree beyond 4 stderr + tolerance
  std::string note;
};

inline void flag_disagreement(MetricResult& r) {
  if (!r.analytic) return;
  r.flagged = r.metric == Metric::Outage ? !agrees_proportion(*r.analytic, r.analytic_tolerance, r.monte_carlo)
                                         : !agrees(*r.analytic, r.analytic_tolerance, r.monte_carlo);
}

// ---------------------------------------------------------------- outage

struct OutageAnalytic {
  double access = 0.0;
  double backhaul = 0.0;
  double value = 0.0;
  double tolerance = 0.0;
};

inline OutageAnalytic outage_analytic(const IntegratedSpec& s, double gamma_th, const BackhaulDistribution& bhl) {
  OutageAnalytic o;
  o.access = cdf_access(s.access, gamma_th);
  const auto b = bhl.cdf(gamma_th);
  o.backhaul = b.value;
  o.value = combine_df(o.access, o.backhaul);
  o.tolerance = b.error + 1e-12;
  return o;
}

inline Estimate outage_mc(const IntegratedSpec& s, double gamma_th, const McConfig& cfg) {
  validate(s);
  const auto acc = run_chunked<CountAcc>(cfg, [&](Rng& rng, std::uint64_t n) {
    IntegratedSampler smp(s);
    CountAcc a;
    for (std::uint64_t i = 0; i < n; ++i)
      if (smp(rng) < gamma_th) ++a.events;
    a.trials = n;
    return a;
  });
  return acc.estimate();
}

inline MetricResult outage(const IntegratedSpec& s, double gamma_th, const McConfig& cfg) {
  require_positive(gamma_th, "gamma_th");
  validate(s);
  MetricResult r;
  r.metric = Metric::Outage;
  r.gamma_bar_db = s.nominal;
  try {
    const BackhaulDistribution bhl(s.backhaul);
    const auto a = outage_analytic(s, gamma_th, bhl);
    r.analytic = a.value;
    r.analytic_tolerance = a.tolerance;
  } catch (const NumericFailure& e) {
    r.note = e.what();
  }
  r.monte_carlo = outage_mc(s, gamma_th, cfg);
  flag_disagreement(r);
  return r;
}

// ---------------------------------------------------------------- BER

// Conditional BER at a fixed SNR: Gamma(p, q gamma) / (2 Gamma(p)).
inline double conditional_ber(const ModulationParams& mod, double g) {
  return 0.5 * numerics::regularized_upper_gamma(mod.p, mod.q * g);
}

struct BerAnalytic {
  double access = 0.0;
  double access_closed_form = 0.0;
  bool access_paths_agree = true;
  double backhaul = 0.0;
  double backhaul_tolerance = 0.0;
  double value = 0.0;
  double tolerance = 0.0;
};

inline BerAnalytic ber_analytic(const IntegratedSpec& s, const ModulationParams& mod, const BackhaulDistribution& bhl) {
  BerAnalytic b;
  const auto cf = access_ber_closed_form(s.access, mod);
  b.access = access_ber_quadrature(s.access, mod);
  b.access_closed_form = cf.value;
  b.access_paths_agree = std::abs(cf.value - b.access) <= 1e-6 * b.access + cf.rounding_bound;

  const bool mrc = s.backhaul.combiner == Combiner::Mrc && s.backhaul.links.size() > 1;
  if (mrc) {
    // By parts, the CDF-weighted BER integral is E[conditional BER] over the
    // law of the sum; take it over the lumped masses, doubling the cells.
    const double g_max = 60.0 / mod.q;
    auto over = [&](std::size_t cells) {
      const auto m = bhl.sum_masses(g_max, cells);
      double acc = 0.0, mass = 0.0;
      for (std::size_t k = 0; k < m.mass.size(); ++k) {
        if (m.mass[k] == 0.0) continue;
        acc += m.mass[k] * conditional_ber(mod, (static_cast<double>(k) + m.offset) * m.h);
        mass += m.mass[k];
      }
      return acc + std::max(0.0, 1.0 - mass) * conditional_ber(mod, g_max);
    };
    std::size_t cells = 8192;
    double prev = over(cells);
    for (;;) {
      cells *= 2;
      const double cur = over(cells);
      const double change = std::abs(cur - prev);
      if (change <= 1e-3 * cur) {
        b.backhaul = cur;
        b.backhaul_tolerance = change;
        break;
      }
      if (cells >= 65536) throw NumericFailure("MRC BER grid refinement did not stabilise", cur, change);
      prev = cur;
    }
  } else {
    numerics::QuadSpec q;
    q.abs_tol = 0.0;
    q.rel_tol = 1e-8;
    q.max_subdivisions = 2000;
    double worst = 0.0;
    b.backhaul = ber_from_cdf(
        [&](double g) {
          const auto c = bhl.cdf(g);
          if (c.value > 0.0) worst = std::max(worst, c.error / c.value);
          return c.value;
        },
        mod, q);
    b.backhaul_tolerance = (worst + q.rel_tol) * b.backhaul;
  }
  b.value = combine_df(b.access, b.backhaul);
  b.tolerance = b.backhaul_tolerance + 1e-6 * b.access;
  return b;
}

// Per-hop conditional-BER averages over the same draws, combined like the
// analytic value. Standard error by the delta method.
inline Estimate ber_mc(const IntegratedSpec& s, const ModulationParams& mod, const McConfig& cfg) {
  validate(s);
  struct Acc {
    MeanAcc a, b;
    void merge(const Acc& o) {
      a.merge(o.a);
      b.merge(o.b);
    }
  };
  const auto acc = run_chunked<Acc>(cfg, [&](Rng& rng, std::uint64_t n) {
    IntegratedSampler smp(s);
    Acc r;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto d = smp.draw(rng);
      r.a.add(conditional_ber(mod, d.access));
      r.b.add(conditional_ber(mod, d.backhaul));
    }
    return r;
  });
  const auto ea = acc.a.estimate(), eb = acc.b.estimate();
  const double m = combine_df(std::clamp(ea.mean, 0.0, 1.0), std::clamp(eb.mean, 0.0, 1.0));
  const double se = std::sqrt(std::pow((1.0 - eb.mean) * ea.std_error, 2) + std::pow((1.0 - ea.mean) * eb.std_error, 2));
  return {m, se, ea.trials};
}

inline MetricResult average_ber(const IntegratedSpec& s, const ModulationParams& mod, const McConfig& cfg) {
  validate(s);
  MetricResult r;
  r.metric = Metric::Aber;
  r.gamma_bar_db = s.nominal;
  try {
    const BackhaulDistribution bhl(s.backhaul);
    const auto b = ber_analytic(s, mod, bhl);
    r.analytic = b.value;
    r.analytic_tolerance = b.tolerance;
    if (!b.access_paths_agree) r.note = "access BER closed form and quadrature disagree";
  } catch (const NumericFailure& e) {
    r.note = e.what();
  }
  r.monte_carlo = ber_mc(s, mod, cfg);
  flag_disagreement(r);
  return r;
}

// ---------------------------------------------------------------- capacity

enum class SnrTarget { Integrated, Backhaul, Access };

inline Estimate ergodic_capacity_mc(const IntegratedSpec& s, SnrTarget target, const McConfig& cfg) {
  validate(s);
  const auto acc = run_chunked<MeanAcc>(cfg, [&](Rng& rng, std::uint64_t n) {
    IntegratedSampler smp(s);
    MeanAcc a;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto d = smp.draw(rng);
      const double g = target == SnrTarget::Access ? d.access : target == SnrTarget::Backhaul ? d.backhaul : d.integrated();
      a.add(std::log2(1.0 + g));
    }
    return a;
  });
  return acc.estimate();
}

inline MetricResult ergodic_capacity(const IntegratedSpec& s, SnrTarget target, const McConfig& cfg) {
  MetricResult r;
  r.metric = Metric::ErgodicCapacity;
  r.gamma_bar_db = s.nominal;
  r.monte_carlo = ergodic_capacity_mc(s, target, cfg);
  return r;
}

// ---------------------------------------------------------------- diversity

inline double diversity_order_integrated(const IntegratedSpec& s) {
  return std::min(diversity_order_bhl(s.backhaul), static_cast<double>(s.access.n_devices));
}

// Exact order of the integrated outage: the smaller of the backhaul tail
// exponent and N.
inline double integrated_tail_exponent(const IntegratedSpec& s) {
  return std::min(combined_tail_exponent(s.backhaul), static_cast<double>(s.access.n_devices));
}

struct SlopePoint {
  double gamma_bar_db = 0.0;
  Estimate outage;
};

struct SlopeFit {
  Estimate slope;
  std::vector<SlopePoint> points;
};

struct SlopeSpec {
  double gamma_th = 1.0;
  std::uint64_t min_events = 100;
  double max_rel_stderr = 0.1;
  std::uint64_t max_trials = 400'000'000;
  std::size_t min_points = 5;
};

// -d log10 P_out / d log10 gamma_bar by weighted least squares over the sweep
// points in the top two decades. Each point's trials grow 4x until it has
// enough outage events; point i uses RNG stream cfg.stream + i.
inline SlopeFit estimate_do_slope(const std::function<IntegratedSpec(double db)>& at, std::vector<double> sweep_db,
                                  const SlopeSpec& spec, const McConfig& cfg) {
  require(!sweep_db.empty(), "slope estimate needs a sweep");
  std::sort(sweep_db.begin(), sweep_db.end());
  const double top = sweep_db.back();
  std::vector<double> window;
  for (double db : sweep_db)
    if (db >= top - 20.0 - 1e-9) window.push_back(db);
  if (window.size() < spec.min_points)
    throw InvalidArgument("slope estimate needs at least " + std::to_string(spec.min_points) +
                          " sweep points in the top two decades");

  SlopeFit fit;
  for (std::size_t i = 0; i < window.size(); ++i) {
    McConfig c = cfg;
    c.stream = cfg.stream + i;
    const IntegratedSpec s = at(window[i]);
    Estimate e;
    for (;;) {
      e = outage_mc(s, spec.gamma_th, c);
      const auto events = static_cast<std::uint64_t>(std::llround(e.mean * static_cast<double>(e.trials)));
      if (events >= spec.min_events && e.std_error <= spec.max_rel_stderr * e.mean) break;
      if (c.trials * 4 > spec.max_trials) {
        throw UnderSampled("only " + std::to_string(events) + " outage events in " + std::to_string(c.trials) +
                           " trials at " + std::to_string(window[i]) +
                           " dB; raise gamma_th or the trial budget, or lower the sweep top");
      }
      c.trials *= 4;
    }
    fit.points.push_back({window[i], e});
  }

  double sw = 0, sx = 0, sy = 0;
  std::vector<double> x, y, w;
  std::uint64_t trials = 0;
  for (const auto& p : fit.points) {
    const double sd = p.outage.std_error / (p.outage.mean * std::log(10.0));
    x.push_back(p.gamma_bar_db / 10.0);
    y.push_back(std::log10(p.outage.mean));
    w.push_back(1.0 / (sd * sd));
    trials += p.outage.trials;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  fit.slope = {-sxy / sxx, std::sqrt(1.0 / sxx), trials};
  return fit;
}

}  // namespace hybrid_bhl
