#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/special_functions/expint.hpp>

#include "hybrid_bhl/integrated.hpp"

using namespace hybrid_bhl;

namespace {

ChannelModel mw(double gbar) { return {FtrFading{0.5, 1.0, 0.9, 50}, SnrValue(gbar)}; }
ChannelModel fso(double gbar) { return {FsoFading{2.9, 2.1, {0.8, 3.0}}, SnrValue(gbar)}; }
ChannelModel thz(double gbar) { return {ThzFading{{ThzComponent{1.0, 0.0, 0.6}}, 27.94, true}, SnrValue(gbar)}; }

IntegratedSpec scenario(double db, unsigned n, Combiner c) {
  const double g = db_to_linear(db);
  return {{n, 1.0, SnrValue(g)}, {{mw(g), fso(g), thz(g)}, c}, SnrDb{db}};
}

McConfig mc(std::uint64_t trials, std::uint64_t seed = 1) {
  McConfig c;
  c.trials = trials;
  c.seed = seed;
  c.workers = 1;
  return c;
}

}  // namespace

TEST(CombineDf, Examples) {
  EXPECT_NEAR(combine_df(0.1, 0.2), 0.28, 1e-15);
  EXPECT_EQ(combine_df(0.3, 0.0), 0.3);
  EXPECT_EQ(combine_df(1.0, 0.4), 1.0);
  EXPECT_EQ(combine_df(0.5, 0.5), 0.75);
  EXPECT_EQ(combine_df(0.0, 0.125), 0.125);
}

TEST(CombineDf, InclusionExclusionAlgebra) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double a = u(rng), b = u(rng);
    const double r = combine_df(a, b);
    EXPECT_GE(r, std::max(a, b));
    EXPECT_LE(r, 1.0);
    EXPECT_NEAR(r, 1.0 - (1.0 - a) * (1.0 - b), 1e-15);
  }
  EXPECT_THROW(combine_df(1.5, 0.0), InvalidArgument);
}

TEST(Integrated, MinOfHops) {
  EXPECT_EQ((HopDraw{5.0, 2.0}.integrated()), 2.0);
  EXPECT_EQ((HopDraw{3.0, 3.0}.integrated()), 3.0);
}

TEST(Integrated, DrawsFollowComposedCdf) {
  for (Combiner c : {Combiner::Osc, Combiner::Mrc}) {
    const auto s = scenario(10.0, 3, c);
    const BackhaulDistribution bhl(s.backhaul);
    auto v = collect_draws(mc(1000000, 9), [smp = IntegratedSampler(s)](Rng& r) mutable { return smp(r); });
    std::sort(v.begin(), v.end());
    const double eps = dkw_epsilon(v.size());
    for (double g : make_grid({}, s.access.gamma_bar)) {
      const auto b = bhl.cdf(g);
      const double f = combine_df(cdf_access(s.access, g), b.value);
      EXPECT_LE(std::abs(empirical_cdf(v, g) - f), eps + b.error) << to_string(c) << " " << g;
    }
  }
}

// FTR and THz samplers cache normal variates; chunks must not share them.
TEST(Integrated, CollectedDrawsIgnoreWorkerCount) {
  const auto s = scenario(10.0, 3, Combiner::Mrc);
  auto run = [&](unsigned workers) {
    McConfig c = mc(200000, 4);
    c.chunk_size = 997;
    c.workers = workers;
    return collect_draws(c, [smp = IntegratedSampler(s)](Rng& r) mutable { return smp(r); });
  };
  const auto one = run(1);
  EXPECT_EQ(one, run(4));
  EXPECT_EQ(one, run(7));
}

TEST(Outage, AnalyticMatchesMonteCarlo) {
  for (Combiner c : {Combiner::Osc, Combiner::Mrc})
    for (double db : {0.0, 10.0, 20.0}) {
      const auto r = outage(scenario(db, 5, c), 1.0, mc(400000, 2));
      ASSERT_TRUE(r.analytic.has_value()) << r.note;
      EXPECT_FALSE(r.flagged) << to_string(c) << " " << db << ": " << *r.analytic << " vs " << r.monte_carlo.mean;
      EXPECT_EQ(r.gamma_bar_db.db, db);
    }
}

TEST(Outage, MoreDevicesHelp) {
  for (double db : {0.0, 5.0, 10.0, 20.0}) {
    const auto one = outage(scenario(db, 1, Combiner::Osc), 1.0, mc(100000, 4));
    const auto ten = outage(scenario(db, 10, Combiner::Osc), 1.0, mc(100000, 4));
    EXPECT_LE(*ten.analytic, *one.analytic);
    EXPECT_LE(ten.monte_carlo.mean, one.monte_carlo.mean);
  }
}

TEST(Ber, AnalyticMatchesMonteCarlo) {
  for (Combiner c : {Combiner::Osc, Combiner::Mrc})
    for (const auto& mod : {ModulationParams::bpsk(), ModulationParams::dpsk()})
      for (double db : {0.0, 15.0}) {
        const auto r = average_ber(scenario(db, 5, c), mod, mc(200000, 6));
        ASSERT_TRUE(r.analytic.has_value()) << r.note;
        EXPECT_TRUE(r.note.empty()) << r.note;
        EXPECT_FALSE(r.flagged) << to_string(c) << " p=" << mod.p << " " << db << ": " << *r.analytic << " vs "
                                << r.monte_carlo.mean << " +- " << r.monte_carlo.std_error;
      }
}

TEST(Ber, NonIncreasingAndBounded) {
  for (Combiner c : {Combiner::Osc, Combiner::Mrc})
    for (const auto& mod : {ModulationParams::bpsk(), ModulationParams::dpsk(), ModulationParams::bfsk()}) {
      double prev = 1.0;
      for (double db = 0.0; db <= 30.0; db += 5.0) {
        const auto s = scenario(db, 5, c);
        const BackhaulDistribution bhl(s.backhaul);
        const double v = ber_analytic(s, mod, bhl).value;
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 0.5);
        EXPECT_LE(v, prev * (1.0 + 2e-3)) << to_string(c) << " " << db;
        prev = v;
      }
    }
}

TEST(Capacity, DeterministicSums) {
  EXPECT_NEAR(std::log2(1.0 + 3.0), 2.0, 1e-15);
  const std::vector<double> three{100.0, 100.0, 100.0};
  EXPECT_NEAR(std::log2(1.0 + combine_draws(Combiner::Mrc, three)), std::log2(301.0), 1e-15);
  EXPECT_NEAR(std::log2(301.0), 8.234, 1e-3);
}

TEST(Capacity, ExactForSingleRayleighAccess) {
  // E log2(1 + X), X ~ Exp(mean g): e^(1/g) E1(1/g) / ln 2.
  const double g = 10.0;
  IntegratedSpec s{{1, 1.0, SnrValue(g)}, {{{RayleighFading{1.0}, SnrValue(1.0)}}, Combiner::Mrc}, SnrDb{10.0}};
  const auto e = ergodic_capacity_mc(s, SnrTarget::Access, mc(1000000, 3));
  const double exact = std::exp(1.0 / g) * boost::math::expint(1, 1.0 / g) / std::log(2.0);
  EXPECT_LE(std::abs(e.mean - exact), 4.0 * e.std_error);
}

TEST(Diversity, FormulaExamples) {
  const double g = 100.0;
  IntegratedSpec s{{5, 1.0, SnrValue(g)},
                   {{mw(g), {FsoFading{2.0, 1.5, {0.8, 3.0}}, SnrValue(g)}, thz(g)}, Combiner::Mrc},
                   SnrDb{20.0}};
  EXPECT_EQ(diversity_order_integrated(s), 0.5);
  IntegratedSpec t{{1, 1.0, SnrValue(g)},
                   {{mw(g), {FsoFading{4.0, 3.0, {0.8, 3.0}}, SnrValue(g)}, thz(g)}, Combiner::Osc},
                   SnrDb{20.0}};
  EXPECT_EQ(diversity_order_integrated(t), 0.5);
}

TEST(Diversity, SlopeEstimatorOnKnownOrder) {
  // Rayleigh backhaul and a single device: outage 1 - e^(-2 g_th / g), order 1.
  auto at = [](double db) {
    const double g = db_to_linear(db);
    return IntegratedSpec{{1, 1.0, SnrValue(g)}, {{{RayleighFading{1.0}, SnrValue(g)}}, Combiner::Mrc}, SnrDb{db}};
  };
  std::vector<double> sweep;
  for (double db = 0.0; db <= 30.0; db += 5.0) sweep.push_back(db);
  const auto fit = estimate_do_slope(at, sweep, {}, mc(20000, 8));
  EXPECT_EQ(fit.points.size(), 5u);
  EXPECT_NEAR(fit.slope.mean, integrated_tail_exponent(at(0.0)), 0.1);
  for (const auto& p : fit.points) EXPECT_LE(p.outage.std_error, 0.1 * p.outage.mean);

  SlopeSpec tight;
  tight.max_trials = 30000;
  EXPECT_THROW(estimate_do_slope(at, sweep, tight, mc(20000, 8)), UnderSampled);
  EXPECT_THROW(estimate_do_slope(at, {20.0, 25.0, 30.0}, {}, mc(20000, 8)), InvalidArgument);
}
