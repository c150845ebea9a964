#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "backhaul.hpp"
#include "channels.hpp"
#include "integrated.hpp"
#include "iot_access.hpp"
#include "linkbudget.hpp"
#include "scenario.hpp"

namespace hybrid_bhl {

// Output of one CLI command: the CSV body, a JSON summary for the manifest,
// and whether every check the command makes passed.
struct CommandOutput {
  std::string csv;
  nlohmann::json summary = nlohmann::json::object();
  bool passed = true;
};

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

inline std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

inline const char* kSweepHeader = "gamma_bar_db,metric,analytic,mc_mean,mc_stderr,trials,scenario_hash";

inline std::string sweep_row(const MetricResult& r, const std::string& hash) {
  return fmt(r.gamma_bar_db.db) + ',' + to_string(r.metric) + ',' + fmt(r.analytic) + ',' + fmt(r.monte_carlo.mean) +
         ',' + fmt(r.monte_carlo.std_error) + ',' + std::to_string(r.monte_carlo.trials) + ',' + hash;
}

// ---------------------------------------------------------------- sweeps

inline CommandOutput sweep_metric(const Scenario& s, const std::function<MetricResult(const IntegratedSpec&, const McConfig&)>& run) {
  CommandOutput out;
  const auto hash = scenario_hash(s);
  std::ostringstream csv;
  csv << kSweepHeader << '\n';
  const auto pts = sweep_points(s.sweep);
  auto flagged = nlohmann::json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto r = run(integrated_at(s, pts[i]), mc_config(s, i));
    csv << sweep_row(r, hash) << '\n';
    if (r.flagged) flagged.push_back({{"gamma_bar_db", pts[i]}, {"analytic", *r.analytic}, {"mc", r.monte_carlo.mean}});
    if (!r.note.empty()) out.summary["notes"].push_back(r.note);
  }
  out.summary["flagged"] = flagged;
  out.passed = flagged.empty();
  out.csv = csv.str();
  return out;
}

inline CommandOutput cmd_outage(const Scenario& s) {
  return sweep_metric(s, [&](const IntegratedSpec& spec, const McConfig& c) { return outage(spec, s.gamma_th(), c); });
}

inline CommandOutput cmd_ber(const Scenario& s) {
  return sweep_metric(s, [&](const IntegratedSpec& spec, const McConfig& c) { return average_ber(spec, s.modulation, c); });
}

// ---------------------------------------------------------------- compare

// Subsets of {mW, FSO, THz}: three singles, three duals, the triple.
inline const std::array<std::vector<int>, 7> kSubsets{{{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}}};
inline const std::array<const char*, 7> kSubsetNames{"mW", "FSO", "THz", "mW-FSO", "mW-THz", "FSO-THz", "mW-FSO-THz"};

struct CompareRow {
  double snr_db = 0.0;
  std::array<int, 3> types{};  // 1 or 2 per technology
  std::array<double, 7> outage{};
  std::array<Estimate, 7> mc{};
  int best_single() const { return static_cast<int>(std::min_element(outage.begin(), outage.begin() + 3) - outage.begin()); }
  int best_dual() const {
    return 3 + static_cast<int>(std::min_element(outage.begin() + 3, outage.begin() + 6) - (outage.begin() + 3));
  }
  bool triple_strictly_best() const { return outage[6] < *std::min_element(outage.begin(), outage.begin() + 6); }
};

// Rows ordered by SNR point, then (mW, FSO, THz) types 111, 112, ..., 222.
// Backhaul links are MRC-combined.
inline std::vector<CompareRow> compare_rows(const Scenario& s, bool with_mc) {
  require(s.compare.has_value(), "scenario has no compare section");
  const auto& c = *s.compare;
  std::vector<CompareRow> rows;
  for (std::size_t si = 0; si < c.snr_points_db.size(); ++si)
    for (int r = 0; r < 8; ++r) {
      CompareRow row;
      row.snr_db = c.snr_points_db[si];
      row.types = {1 + ((r >> 2) & 1), 1 + ((r >> 1) & 1), 1 + (r & 1)};
      const std::array<Fading, 3> f{c.mw[row.types[0] - 1], c.fso[row.types[1] - 1], c.thz[row.types[2] - 1]};
      for (std::size_t k = 0; k < kSubsets.size(); ++k) {
        BackhaulSpec b{{}, Combiner::Mrc};
        for (int i : kSubsets[k]) b.links.push_back(link_at(f[i], row.snr_db, s.snr_reference));
        const IntegratedSpec spec{access_at(s, row.snr_db), b, SnrDb{row.snr_db}};
        const BackhaulDistribution d(b);
        row.outage[k] = outage_analytic(spec, s.gamma_th(), d).value;
        if (with_mc) row.mc[k] = outage_mc(spec, s.gamma_th(), mc_config(s, (si * 8 + r) * 8 + k));
      }
      rows.push_back(row);
    }
  return rows;
}

inline CommandOutput cmd_compare(const Scenario& s, bool with_mc = true) {
  CommandOutput out;
  const auto hash = scenario_hash(s);
  const auto rows = compare_rows(s, with_mc);
  std::ostringstream csv;
  csv << "snr_db,mw_type,fso_type,thz_type,config,analytic,factor,mc_mean,mc_stderr,trials,scenario_hash\n";
  auto table = nlohmann::json::array();
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < 7; ++k) {
      csv << fmt(row.snr_db) << ',' << row.types[0] << ',' << row.types[1] << ',' << row.types[2] << ','
          << kSubsetNames[k] << ',' << fmt(row.outage[k]) << ',' << fmt(row.outage[k] / row.outage[6]) << ',';
      if (with_mc) csv << fmt(row.mc[k].mean) << ',' << fmt(row.mc[k].std_error) << ',' << row.mc[k].trials;
      else csv << ",,";
      csv << ',' << hash << '\n';
    }
    table.push_back({{"snr_db", row.snr_db},
                     {"types", row.types},
                     {"best_single", kSubsetNames[row.best_single()]},
                     {"best_dual", kSubsetNames[row.best_dual()]},
                     {"triple_strictly_best", row.triple_strictly_best()}});
    out.passed = out.passed && row.triple_strictly_best();
  }
  out.summary["rows"] = table;
  out.csv = csv.str();
  return out;
}

// ---------------------------------------------------------------- diversity

inline CommandOutput cmd_diversity(const Scenario& s) {
  CommandOutput out;
  const auto hash = scenario_hash(s);
  auto at = [&](double db) { return integrated_at(s, db); };
  SlopeSpec spec;
  spec.gamma_th = s.gamma_th();
  const auto fit = estimate_do_slope(at, sweep_points(s.sweep), spec, mc_config(s));
  std::ostringstream csv;
  csv << kSweepHeader << '\n';
  for (const auto& p : fit.points) {
    const auto is = at(p.gamma_bar_db);
    std::optional<double> a;
    try {
      a = outage_analytic(is, s.gamma_th(), BackhaulDistribution(is.backhaul)).value;
    } catch (const NumericFailure&) {
    }
    csv << fmt(p.gamma_bar_db) << ",outage," << fmt(a) << ',' << fmt(p.outage.mean) << ',' << fmt(p.outage.std_error)
        << ',' << p.outage.trials << ',' << hash << '\n';
  }
  const double top = fit.points.back().gamma_bar_db;
  const double formula = diversity_order_integrated(at(top));
  csv << fmt(top) << ",diversity_slope," << fmt(formula) << ',' << fmt(fit.slope.mean) << ','
      << fmt(fit.slope.std_error) << ',' << fit.slope.trials << ',' << hash << '\n';
  out.summary = {{"formula", formula},
                 {"tail_exponent", integrated_tail_exponent(at(top))},
                 {"slope", fit.slope.mean},
                 {"slope_stderr", fit.slope.std_error}};
  out.passed = std::abs(fit.slope.mean - formula) <= 0.1;
  out.csv = csv.str();
  return out;
}

// ---------------------------------------------------------------- protocol

struct ProtocolStats {
  std::uint64_t runs = 0;
  std::uint64_t mismatches = 0;  // winner is not the device with the largest SNR
  double ks = 0.0;
  double dkw = 0.0;
};

inline ProtocolStats protocol_runs(const AccessSpec& a, const McConfig& cfg, std::ostream* csv) {
  struct Acc {
    std::vector<ProtocolRun> runs;
    void merge(Acc& o) { std::move(o.runs.begin(), o.runs.end(), std::back_inserter(runs)); }
    void merge(const Acc& o) { runs.insert(runs.end(), o.runs.begin(), o.runs.end()); }
  };
  auto acc = run_chunked<Acc>(cfg, [&](Rng& rng, std::uint64_t n) {
    Acc x;
    x.runs.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) x.runs.push_back(run_an_selection(a, rng));
    return x;
  });
  ProtocolStats st;
  st.runs = acc.runs.size();
  std::vector<double> win;
  win.reserve(acc.runs.size());
  for (std::size_t i = 0; i < acc.runs.size(); ++i) {
    const auto& r = acc.runs[i];
    const auto best = static_cast<std::size_t>(std::max_element(r.snrs.begin(), r.snrs.end()) - r.snrs.begin());
    if (best != r.winner) ++st.mismatches;
    win.push_back(r.snrs[r.winner]);
    if (csv) *csv << protocol_csv_row(i, r) << '\n';
  }
  std::sort(win.begin(), win.end());
  st.ks = ks_statistic(win, [&](double g) { return cdf_access(a, g); });
  st.dkw = dkw_epsilon(st.runs);
  return st;
}

inline CommandOutput cmd_protocol(const Scenario& s) {
  CommandOutput out;
  const auto a = access_at(s, sweep_points(s.sweep).front());
  std::ostringstream csv;
  csv << protocol_csv_header() << '\n';
  const auto st = protocol_runs(a, mc_config(s), &csv);
  out.summary = {{"runs", st.runs},
                 {"n_devices", a.n_devices},
                 {"mismatches", st.mismatches},
                 {"ks", st.ks},
                 {"dkw_band", st.dkw},
                 {"mean_latency_closed_form", expected_latency(a)}};
  out.passed = st.mismatches == 0 && st.ks <= st.dkw;
  out.csv = csv.str();
  return out;
}

// ---------------------------------------------------------------- link budget

inline CommandOutput cmd_linkbudget(const Scenario& s) {
  CommandOutput out;
  require(!s.budgets.empty(), "scenario has no budgets");
  std::ostringstream csv;
  csv << "name,technology,distance_m,carrier_hz,tx_power_dbm,tx_gain_dbi,rx_gain_dbi,path_loss_db,noise_dbm,snr_db,"
         "claimed_snr_db,gap_db\n";
  auto gaps = nlohmann::json::array();
  for (const auto& nb : s.budgets) {
    const auto r = budget_report(nb.budget, nb.claimed_snr_db);
    const auto& b = nb.budget;
    csv << nb.name << ',' << to_string(b.technology) << ',' << fmt(b.distance_m) << ',' << fmt(b.carrier_hz) << ','
        << fmt(b.tx_power_dbm) << ',' << fmt(b.tx_gain_dbi) << ',' << fmt(b.rx_gain_dbi) << ',' << fmt(r.path_loss_db)
        << ',' << fmt(b.noise_dbm) << ',' << fmt(r.snr_db) << ',' << fmt(r.claimed_db) << ',' << fmt(r.gap_db) << '\n';
    if (r.gap_db) gaps.push_back({{"name", nb.name}, {"chain_db", r.snr_db}, {"claimed_db", *r.claimed_db}, {"gap_db", *r.gap_db}});
  }
  out.summary["gaps"] = gaps;
  out.csv = csv.str();
  return out;
}

// ---------------------------------------------------------------- validate

struct CheckPoint {
  std::string check;
  double gamma = 0.0;
  double analytic = 0.0;
  double tolerance = 0.0;
  Estimate mc;
  bool pass = false;
};

// Empirical CDF of n draws against an analytic CDF at each grid point:
// |F_n - F| <= 4 sqrt(F (1 - F) / n) + tolerance.
inline std::vector<CheckPoint> sampler_vs_cdf(const std::string& name, std::vector<double> draws,
                                              const std::function<std::pair<double, double>(double)>& cdf,
                                              const std::vector<double>& grid) {
  std::sort(draws.begin(), draws.end());
  const auto n = static_cast<double>(draws.size());
  std::vector<CheckPoint> out;
  for (double g : grid) {
    const auto [f, tol] = cdf(g);
    CheckPoint c;
    c.check = name;
    c.gamma = g;
    c.analytic = f;
    c.tolerance = tol;
    c.mc.mean = empirical_cdf(draws, g);
    c.mc.trials = draws.size();
    c.mc.std_error = std::sqrt(std::max(0.0, f * (1.0 - f)) / n);
    c.pass = std::abs(c.mc.mean - f) <= 4.0 * c.mc.std_error + tol;
    out.push_back(c);
  }
  return out;
}

inline std::vector<CheckPoint> validation_suite(const Scenario& s) {
  std::vector<CheckPoint> all;
  auto add = [&](std::vector<CheckPoint> v) { all.insert(all.end(), v.begin(), v.end()); };
  const double db = sweep_points(s.sweep).front();
  const auto spec = integrated_at(s, db);
  std::uint64_t stream = 1000;
  for (std::size_t i = 0; i < spec.backhaul.links.size(); ++i) {
    const auto& m = spec.backhaul.links[i];
    const ChannelDistribution d(m);
    auto draws = collect_draws(mc_config(s, stream++), [smp = ChannelSampler(m)](Rng& r) mutable { return smp(r); });
    add(sampler_vs_cdf(std::string("link") + std::to_string(i) + '_' + to_string(technology(m)), std::move(draws),
                       [&](double g) {
                         const auto c = d.cdf(g);
                         return std::pair{c.value, c.truncation};
                       },
                       make_grid(s.grid, m.gamma_bar)));
  }
  for (Combiner c : {Combiner::Mrc, Combiner::Osc}) {
    BackhaulSpec b = spec.backhaul;
    b.combiner = c;
    const BackhaulDistribution d(b);
    auto draws = collect_draws(mc_config(s, stream++), [smp = BackhaulSampler(b)](Rng& r) mutable { return smp(r); });
    add(sampler_vs_cdf(std::string("backhaul_") + to_string(c), std::move(draws),
                       [&](double g) {
                         const auto v = d.cdf(g);
                         return std::pair{v.value, v.error};
                       },
                       make_grid(s.grid, b.links.front().gamma_bar)));
  }
  auto acc = collect_draws(mc_config(s, stream++), [&](Rng& r) { return sample_access_snr(spec.access, r); });
  add(sampler_vs_cdf("access", std::move(acc), [&](double g) { return std::pair{cdf_access(spec.access, g), 1e-12}; },
                     make_grid(s.grid, spec.access.gamma_bar)));
  const auto pts = sweep_points(s.sweep);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto r = outage(integrated_at(s, pts[i]), s.gamma_th(), mc_config(s, stream++));
    CheckPoint c;
    c.check = "outage@" + fmt(pts[i]) + "dB";
    c.gamma = s.gamma_th();
    c.analytic = r.analytic.value_or(std::nan(""));
    c.tolerance = r.analytic_tolerance;
    c.mc = r.monte_carlo;
    c.pass = r.analytic.has_value() && !r.flagged;
    all.push_back(c);
  }
  return all;
}

inline CommandOutput cmd_validate(const Scenario& s) {
  CommandOutput out;
  const auto hash = scenario_hash(s);
  std::ostringstream csv;
  csv << "check,gamma,analytic,tolerance,mc_mean,mc_stderr,trials,pass,scenario_hash\n";
  std::size_t failed = 0;
  const auto checks = validation_suite(s);
  for (const auto& c : checks) {
    csv << c.check << ',' << fmt(c.gamma) << ',' << fmt(c.analytic) << ',' << fmt(c.tolerance) << ',' << fmt(c.mc.mean)
        << ',' << fmt(c.mc.std_error) << ',' << c.mc.trials << ',' << (c.pass ? 1 : 0) << ',' << hash << '\n';
    failed += c.pass ? 0 : 1;
  }
  out.summary = {{"checks", checks.size()}, {"failed", failed}};
  out.passed = failed == 0;
  out.csv = csv.str();
  return out;
}

}  // namespace hybrid_bhl
