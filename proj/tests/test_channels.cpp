#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "hybrid_bhl/channels.hpp"

using namespace hybrid_bhl;

namespace {

ChannelModel rayleigh(double gbar, double lambda = 1.0) { return {RayleighFading{lambda}, SnrValue(gbar)}; }
ChannelModel ftr(double m, double delta, double k = 1.0, double gbar = 10.0) {
  return {FtrFading{m, k, delta, 50}, SnrValue(gbar)};
}
ChannelModel fso(double alpha, double beta, double s0, double phi, double gbar = 10.0) {
  return {FsoFading{alpha, beta, {s0, phi}}, SnrValue(gbar)};
}
ChannelModel thz(double sigma, double rho = 27.94, bool normalized = true, double mu = 0.0, double gbar = 10.0) {
  return {ThzFading{{ThzComponent{1.0, mu, sigma}}, rho, normalized}, SnrValue(gbar)};
}

std::vector<ChannelModel> reference_models() {
  std::vector<ChannelModel> v;
  v.push_back(rayleigh(10.0));
  for (double m : {0.5, 20.0})
    for (double d : {0.1, 0.9}) v.push_back(ftr(m, d));
  v.push_back(fso(2.9, 2.1, 0.8, 3.0));   // strong turbulence
  v.push_back(fso(9.5, 9.5, 0.8, 3.0));   // weak turbulence
  for (double s : {0.6, 0.8, 1.1}) v.push_back(thz(s));
  return v;
}

std::vector<double> draws(const ChannelModel& m, std::size_t n, std::uint64_t seed) {
  Rng rng = make_substream(seed, 0, 0);
  ChannelSampler s(m);
  std::vector<double> v(n);
  for (auto& x : v) x = s(rng);
  std::sort(v.begin(), v.end());
  return v;
}

// |h|^2 / zeta^2 given (xi, theta) is noncentral chi-square with 2 dof and
// noncentrality 2 xi K (1 + Delta cos theta).
double ftr_cdf_oracle(double m, double k, double delta, double gbar, double g) {
  const double zeta2 = 0.5 / (1.0 + k);
  const double x = g / (gbar * zeta2);
  boost::math::quadrature::exp_sinh<double> es;
  auto inner = [&](double th) {
    const double a = k * (1.0 + delta * std::cos(th));
    auto f = [&](double xi) {
      const double dens = boost::math::pdf(boost::math::gamma_distribution<double>(m, 1.0 / m), xi);
      if (dens == 0.0) return 0.0;
      const double lam = 2.0 * xi * a;
      const double c = lam == 0.0 ? -std::expm1(-x / 2.0)
                                  : boost::math::cdf(boost::math::non_central_chi_squared_distribution<double>(2.0, lam), x);
      return dens * c;
    };
    return es.integrate(f, 1e-12);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(inner, 0.0, std::numbers::pi, 8, 1e-11) /
         std::numbers::pi;
}

// I = (psi / alpha) X V, X ~ beta-prime(alpha, beta), V = U^(1/phi).
double fso_cdf_oracle(double alpha, double beta, double s0, double phi, double gbar, double g) {
  const double psi = (beta - 1.0) * s0;
  const double i = std::sqrt(g / gbar);
  auto f = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double x = alpha * i / (psi * v);
    return phi * std::pow(v, phi - 1.0) * boost::math::ibeta(alpha, beta, x / (1.0 + x));
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, 0.0, 1.0, 1e-12);
}

// Direct double integral over the two uniforms of the THz pointing error.
double thz_cdf_oracle(double sigma, double rho, double gbar, double g) {
  const double r = std::sqrt(g / gbar);
  auto inner = [&](double u1) {
    auto f = [&](double u2) {
      const double y = std::pow(u1 * u2, 1.0 / rho);
      if (y <= 0.0) return 1.0;
      return std::erf(r / y / (sigma * std::numbers::sqrt2));
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 12, 1e-12);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(inner, 0.0, 1.0, 12, 1e-12);
}

}  // namespace

TEST(Rayleigh, ClosedForm) {
  const ChannelDistribution d(rayleigh(4.0));
  EXPECT_NEAR(d.cdf(4.0).value, 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(d.cdf(4.0).value, 0.632121, 1e-6);
  EXPECT_EQ(d.cdf(0.0).value, 0.0);
  EXPECT_NEAR(d.pdf(1e-300), 0.25, 1e-15);
  const ChannelDistribution d2(rayleigh(4.0, 2.0));
  EXPECT_NEAR(d2.cdf(1.0).value, 1.0 - std::exp(-0.5), 1e-15);
}

TEST(Rayleigh, TabulationIsExact) {
  const auto grid = make_grid({}, SnrValue(3.0));
  const auto t = tabulate(rayleigh(3.0), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(t.cdf.values()[i], -std::expm1(-grid[i] / 3.0), 1e-12);
    EXPECT_NEAR(t.pdf.values()[i], std::exp(-grid[i] / 3.0) / 3.0, 1e-12);
  }
}

TEST(Rayleigh, SampleMean) {
  const auto v = draws(rayleigh(7.0), 1000000, 3);
  MeanAcc acc;
  for (double x : v) acc.add(x);
  const auto e = acc.estimate();
  EXPECT_LE(std::abs(e.mean - 7.0), 3.0 * e.std_error);
}

TEST(AnyModel, CdfAtZeroIsZero) {
  for (const auto& m : reference_models()) EXPECT_EQ(ChannelDistribution(m).cdf(0.0).value, 0.0);
}

TEST(Ftr, SampleMeanOfGainIsOne) {
  for (double m : {0.5, 3.0, 20.0})
    for (double k : {0.0, 1.0, 10.0})
      for (double d : {0.0, 0.5, 1.0}) {
        const auto v = draws(ftr(m, d, k, 1.0), 1000000, 11);
        MeanAcc acc;
        for (double x : v) acc.add(x);
        const auto e = acc.estimate();
        EXPECT_LE(std::abs(e.mean - 1.0), 3.0 * e.std_error) << m << " " << k << " " << d;
      }
}

TEST(Ftr, KZeroIsRayleigh) {
  const ChannelModel m = ftr(2.0, 0.5, 0.0, 5.0);
  const ChannelDistribution d(m);
  ASSERT_NE(d.ftr_weights(), nullptr);
  const auto& w = *d.ftr_weights();
  EXPECT_EQ(w[0], 1.0);
  for (std::size_t j = 1; j < w.size(); ++j) EXPECT_EQ(w[j], 0.0);
  const auto grid = make_grid({}, SnrValue(5.0));
  const auto t = tabulate(m, grid);
  // j = 0 term: Gamma(1, scale gamma_bar) law.
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(t.cdf.values()[i], -std::expm1(-grid[i] / 5.0), 1e-14);
}

TEST(Ftr, MatchesConditionalNoncentralChiSquare) {
  for (double m : {0.5, 20.0})
    for (double delta : {0.1, 0.9})
      for (double g : {0.01, 0.3, 2.0, 10.0, 40.0}) {
        const double ref = ftr_cdf_oracle(m, 1.0, delta, 10.0, g);
        const double got = ChannelDistribution(ftr(m, delta)).cdf(g).value;
        EXPECT_NEAR(got, ref, 1e-8 + 1e-7 * ref) << m << " " << delta << " " << g;
      }
}

TEST(Ftr, LargeKUnitDeltaNearRician) {
  // m -> infinity, Delta = 0: Rician with factor K.
  const double k = 3.0, gbar = 2.0;
  const ChannelDistribution d(ftr(1e5, 0.0, k, gbar));
  for (double g : {0.1, 1.0, 3.0}) {
    const double zeta2 = 0.5 / (1.0 + k);
    const double ref =
        boost::math::cdf(boost::math::non_central_chi_squared_distribution<double>(2.0, 2.0 * k), g / (gbar * zeta2));
    EXPECT_NEAR(d.cdf(g).value, ref, 2e-5);
  }
}

// Remainder reported with each CDF value: magnitude of the last retained term.
TEST(Ftr, TruncationRemainderAtFiftyTerms) {
  for (double m : {0.5, 20.0})
    for (double delta : {0.1, 0.9}) {
      const ChannelModel model = ftr(m, delta);
      const ChannelDistribution d(model);
      for (double g : make_grid({}, model.gamma_bar)) {
        EXPECT_LT(d.cdf(g).truncation, 1e-8) << "m=" << m << " delta=" << delta << " gamma=" << g;
      }
    }
}

TEST(Ftr, SeriesTailMass) {
  EXPECT_LT(ChannelDistribution(ftr(20.0, 0.1)).series_tail_mass(), 1e-12);
  EXPECT_LT(ChannelDistribution(ftr(20.0, 0.9)).series_tail_mass(), 1e-12);
  EXPECT_LT(ChannelDistribution(ftr(0.5, 0.1)).series_tail_mass(), 1e-9);
  const double t = ChannelDistribution(ftr(0.5, 0.9)).series_tail_mass();
  EXPECT_GT(t, 1e-7);
  EXPECT_LT(t, 5e-7);
}

TEST(Fso, ScaledFHasUnitMean) {
  const auto v = draws(fso(4.0, 3.5, 1.0, 1e9, 1.0), 1000000, 5);
  // gamma = h_f^2 with h_p == 1 almost surely; E[h_f] = 1.
  MeanAcc acc;
  for (double x : v) acc.add(std::sqrt(x));
  const auto e = acc.estimate();
  EXPECT_LE(std::abs(e.mean - 1.0), 3.0 * e.std_error);
}

TEST(Fso, MatchesConditionalBetaOracle) {
  struct P { double a, b, s0, phi; };
  for (const P& p : {P{2.9, 2.1, 0.8, 3.0}, P{9.5, 9.5, 0.8, 3.0}, P{4.0, 1.5, 0.5, 0.7}, P{1.5, 6.0, 1.0, 12.0}}) {
    const ChannelDistribution d(fso(p.a, p.b, p.s0, p.phi));
    for (double g : {1e-3, 0.05, 1.0, 10.0, 200.0, 1e4}) {
      const double ref = fso_cdf_oracle(p.a, p.b, p.s0, p.phi, 10.0, g);
      EXPECT_NEAR(d.cdf(g).value, ref, 1e-9 + 1e-7 * ref) << p.a << " " << p.b << " " << p.phi << " " << g;
    }
  }
}

TEST(Fso, PdfNormalization) {
  for (const auto& m : {fso(2.9, 2.1, 0.8, 3.0), fso(9.5, 9.5, 0.8, 3.0)}) {
    const ChannelDistribution d(m);
    numerics::QuadSpec q;
    q.max_subdivisions = 2000;
    const double mass = numerics::integrate_adaptive([&](double g) { return g > 0.0 ? d.pdf(g) : 0.0; }, 0.0,
                                                     std::numeric_limits<double>::infinity(), q);
    EXPECT_NEAR(mass, 1.0, 1e-4);
  }
}

TEST(Fso, GeometryReferenceOrientation) {
  FsoGeometry g;
  const auto d = derive_pointing_detail(g);
  EXPECT_NEAR(d.chi_y, 0.75, 1e-15);
  EXPECT_NEAR(d.chi_z, 0.5, 1e-15);
  EXPECT_NEAR(d.chi_min, 1.0, 1e-14);
  EXPECT_NEAR(d.chi_max, 4.0, 1e-14);
  EXPECT_GT(d.pointing.s0, 0.0);
  EXPECT_LE(d.pointing.s0, 1.0);
  EXPECT_GT(d.pointing.phi, 0.0);
  // Wider beam at longer range: more pointing tolerance, less captured power.
  FsoGeometry far = g;
  far.distance = 1000.0;
  const auto d2 = derive_pointing_detail(far);
  EXPECT_GT(d2.beam_width, d.beam_width);
  EXPECT_LT(d2.pointing.s0, d.pointing.s0);
  EXPECT_GT(d2.pointing.phi, d.pointing.phi);
}

TEST(Fso, GeometryBeamWidthClosedForm) {
  FsoGeometry g;
  g.distance = 800.0;
  g.cn2 = 5e-15;
  const double k = 2.0 * std::numbers::pi / g.wavelength;
  const double chi = std::pow(0.55 * g.cn2 * k * k * g.distance, -0.6);
  const double z = g.wavelength * g.distance / (std::numbers::pi * g.w0 * g.w0);
  const double w = g.w0 * std::sqrt(1.0 + (1.0 + 2.0 * g.w0 * g.w0 / (chi * chi)) * z * z);
  EXPECT_NEAR(derive_pointing_detail(g).beam_width, w, 1e-12 * w);
}

TEST(Fso, LogVarianceEntryRoundTrips) {
  for (double a : {0.7, 2.9, 9.5}) EXPECT_NEAR(fso_shape_from_log_variance(fso_log_variance_from_shape(a)), a, 1e-12 * a);
  EXPECT_NEAR(fso_shape_from_log_variance(std::log(1.5)), 2.0, 1e-12);
}

TEST(Fso, SamplerKsBelowOnePercentCritical) {
  for (const auto& m : {fso(2.9, 2.1, 0.8, 3.0), fso(9.5, 9.5, 0.8, 3.0)}) {
    const ChannelDistribution d(m);
    const std::size_t n = 1000000;
    const auto v = draws(m, n, 17);
    // Evaluate the analytic CDF on a fine log grid and interpolate between
    // nodes; the interpolation error is far below the KS threshold.
    std::vector<double> grid, f;
    for (double lg = std::log(v.front()) - 1.0; lg < std::log(v.back()) + 1.0; lg += 0.01) {
      grid.push_back(std::exp(lg));
      f.push_back(d.cdf(grid.back()).value);
    }
    const DistCurve c(CurveKind::Cdf, grid, f);
    EXPECT_LT(ks_statistic(v, [&](double x) { return c.at(x); }), ks_critical_1pct(n));
  }
}

TEST(Fso, RejectsBetaAtOrBelowOne) {
  EXPECT_THROW(ChannelDistribution(fso(2.0, 1.0, 0.8, 3.0)), InvalidArgument);
  EXPECT_THROW(ChannelSampler(fso(2.0, 0.8, 0.8, 3.0)), InvalidArgument);
}

TEST(Thz, PointingMean) {
  const double rho = 27.94;
  const double expect = std::pow(rho / (rho + 1.0), 2.0);
  EXPECT_NEAR(expect, 0.9320854959, 1e-10);
  Rng rng = make_substream(9, 0, 0);
  MeanAcc acc;
  for (int i = 0; i < 1000000; ++i)
    acc.add(std::pow(uniform_open0(rng), 1.0 / rho) * std::pow(uniform_open0(rng), 1.0 / rho));
  const auto e = acc.estimate();
  EXPECT_LE(std::abs(e.mean - expect), 3.0 * e.std_error);
}

TEST(Thz, MatchesDoubleIntegralOracle) {
  for (double s : {0.6, 0.8, 1.1})
    for (double g : {1e-3, 0.1, 2.0, 10.0, 50.0}) {
      const double ref = thz_cdf_oracle(s, 27.94, 10.0, g);
      EXPECT_NEAR(ChannelDistribution(thz(s)).cdf(g).value, ref, 1e-9) << s << " " << g;
    }
}

TEST(Thz, UnnormalizedDeficit) {
  const ChannelModel m = thz(0.8, 27.94, false, 0.3);
  const ChannelDistribution d(m);
  const double deficit = numerics::normal_cdf(-0.3 / 0.8);
  EXPECT_NEAR(d.mass_deficit(), deficit, 1e-15);
  EXPECT_NEAR(d.cdf(1e4 * 10.0).value, 1.0 - deficit, 1e-9);
  const ChannelDistribution dn(thz(0.8, 27.94, true, 0.3));
  EXPECT_NEAR(d.cdf(5.0).value, (1.0 - deficit) * dn.cdf(5.0).value, 1e-12);
}

TEST(Thz, SingleComponentDkwTenMillion) {
  const ChannelModel m = thz(0.6);
  const ChannelDistribution d(m);
  const std::size_t n = 10000000;
  const auto v = draws(m, n, 23);
  const double eps = dkw_epsilon(n);
  for (double g : make_grid({}, m.gamma_bar)) EXPECT_LE(std::abs(empirical_cdf(v, g) - d.cdf(g).value), eps) << g;
}

TEST(AllModels, CdfTendsToOne) {
  for (const auto& m : reference_models())
    EXPECT_GE(ChannelDistribution(m).cdf(1e4 * m.gamma_bar.value()).value, 0.999);
}

TEST(AllModels, SamplerMatchesAnalyticOnGrid) {
  std::uint64_t seed = 100;
  for (const auto& m : reference_models()) {
    const ChannelDistribution d(m);
    const std::size_t n = 1000000;
    const auto v = draws(m, n, ++seed);
    for (double g : make_grid({}, m.gamma_bar)) {
      const auto c = d.cdf(g);
      const double f = c.value;
      const double band = 4.0 * std::sqrt(f * (1.0 - f) / static_cast<double>(n)) + 1e-8 + c.truncation;
      EXPECT_LE(std::abs(empirical_cdf(v, g) - f), band) << static_cast<int>(technology(m)) << " gamma=" << g;
    }
  }
}

TEST(AllModels, PdfIsDerivativeOfCdf) {
  for (const auto& m : reference_models()) {
    const ChannelDistribution d(m);
    const auto grid = make_grid({}, m.gamma_bar);
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      const double g = grid[i], h = 1e-4 * g;
      const double fd = (d.cdf(g + h).value - d.cdf(g - h).value) / (2.0 * h);
      const double p = d.pdf(g);
      EXPECT_NEAR(fd, p, 1e-4 * p + 1e-12) << static_cast<int>(technology(m)) << " gamma=" << g;
    }
  }
}

TEST(AllModels, TabulatedPdfMass) {
  for (const auto& m : reference_models()) {
    // Dense log grid from deep in the lower tail to far in the upper tail.
    std::vector<double> grid;
    const double gb = m.gamma_bar.value();
    for (double lg = -12.0; lg <= 6.0; lg += 0.005) grid.push_back(gb * std::pow(10.0, lg));
    const auto t = tabulate(m, grid);
    const double low = t.cdf.values().front();
    const double high = 1.0 - t.cdf.values().back();
    EXPECT_NEAR(t.pdf.mass() + low + high, 1.0, 1e-3) << static_cast<int>(technology(m));
  }
}

TEST(AllModels, MeanFactorsMatchSampler) {
  for (const auto& m : {ftr(0.5, 0.9, 1.0, 1.0), fso(9.5, 9.5, 0.8, 3.0, 1.0), thz(0.8, 27.94, true, 0.0, 1.0),
                        rayleigh(1.0, 2.0)}) {
    const auto v = draws(m, 1000000, 31);
    MeanAcc acc;
    for (double x : v) acc.add(x);
    const auto e = acc.estimate();
    EXPECT_LE(std::abs(e.mean - mean_snr_factor(m)), 4.0 * e.std_error) << static_cast<int>(technology(m));
  }
  EXPECT_TRUE(std::isinf(mean_snr_factor(fso(2.9, 2.0, 0.8, 3.0))));
}

TEST(Validation, RejectsBadParameters) {
  EXPECT_THROW(ChannelSampler(ftr(0.5, 1.5)), InvalidArgument);
  EXPECT_THROW(ChannelSampler(ftr(-1.0, 0.5)), InvalidArgument);
  EXPECT_THROW(ChannelSampler(rayleigh(1.0, 0.0)), InvalidArgument);
  ChannelModel bad = thz(0.6);
  std::get<ThzFading>(bad.fading).components = {{0.5, 0.0, 0.6}, {0.4, 0.0, 0.6}};
  EXPECT_THROW(ChannelDistribution{bad}, InvalidArgument);
  std::get<ThzFading>(bad.fading).components = {{0.5, 0.0, 0.6}, {0.5, 0.0, 0.0}};
  EXPECT_THROW(ChannelDistribution{bad}, InvalidArgument);
  EXPECT_THROW(ChannelDistribution(fso(2.0, 3.0, 1.2, 3.0)), InvalidArgument);
}
