#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "core.hpp"
#include "numerics/gamma.hpp"
#include "numerics/meijer_g.hpp"
#include "numerics/quadrature.hpp"
#include "rng.hpp"

namespace hybrid_bhl {

// ---------------------------------------------------------------- models
//
// SNR mapping used everywhere: mmWave and RF gamma = gamma_bar |h|^2, FSO and
// THz gamma = gamma_bar (h_f h_p)^2.

struct RayleighFading {
  double lambda = 1.0;
  friend bool operator==(const RayleighFading&, const RayleighFading&) = default;
};

// Fluctuating two-ray. zeta^2 = 1 / (2 (1 + K)) so that E|h|^2 = 1.
struct FtrFading {
  double m = 1.0;
  double k = 1.0;
  double delta = 0.5;
  int series_terms = 50;
  friend bool operator==(const FtrFading&, const FtrFading&) = default;
};

struct FsoPointing {
  double s0 = 1.0;
  double phi = 1.0;
  friend bool operator==(const FsoPointing&, const FsoPointing&) = default;
};

// Beam / receiver geometry for the pointing-error parameters. Angles and
// jitter defaults are the reference deployment values; distance, C_n^2 and
// the receiver aperture radius have no default.
struct FsoGeometry {
  double theta = -std::numbers::pi / 4.0;
  double delta = 3.0 * std::numbers::pi / 4.0;
  double sigma0 = 0.1;      // rad
  double sigma_p = 0.05;    // rad
  double d_x = 0.1;
  double w0 = 1e-3;         // beam waist radius, m
  double wavelength = 750e-9;
  double distance = 500.0;  // L_2, m
  double cn2 = 1e-14;       // refractive-index structure parameter, m^(-2/3)
  double aperture_radius = 0.05;  // m
  friend bool operator==(const FsoGeometry&, const FsoGeometry&) = default;
};

struct FsoGeometryDerivation {
  double chi_y, chi_z, chi_yz, chi_min, chi_max;
  double beam_width;  // w(L_2)
  double v_min, v_max, k_min, k_max;
  FsoPointing pointing;
};

inline constexpr double kSpeedOfLight = 299792458.0;

inline FsoGeometryDerivation derive_pointing_detail(const FsoGeometry& g) {
  require_positive(g.w0, "beam waist");
  require_positive(g.wavelength, "wavelength");
  require_positive(g.distance, "FSO distance");
  require_positive(g.cn2, "C_n^2");
  require_positive(g.aperture_radius, "aperture radius");
  require(g.sigma_p >= 0.0 && g.sigma0 >= 0.0, "jitter must be non-negative");
  require(g.sigma_p > 0.0 || (g.sigma0 > 0.0 && g.d_x != 0.0), "pointing jitter must be non-zero");
  FsoGeometryDerivation d{};
  const double ct = std::cos(g.theta), st = std::sin(g.theta);
  d.chi_y = ct * ct + st * st * std::cos(g.delta) * std::cos(g.delta);
  d.chi_z = st * st;
  d.chi_yz = -ct * st * std::sin(g.delta);
  const double root = std::sqrt((d.chi_y - d.chi_z) * (d.chi_y - d.chi_z) + 4.0 * d.chi_yz * d.chi_yz);
  d.chi_min = 2.0 / (d.chi_y + d.chi_z + root);
  d.chi_max = 2.0 / (d.chi_y + d.chi_z - root);
  require(std::isfinite(d.chi_max) && d.chi_max > 0.0, "degenerate FSO orientation");

  const double f = kSpeedOfLight / g.wavelength;
  const double k = 2.0 * std::numbers::pi * f / kSpeedOfLight;
  const double chi_l = std::pow(0.55 * g.cn2 * k * k * g.distance, -0.6);
  const double spread = kSpeedOfLight * g.distance / (std::numbers::pi * f * g.w0 * g.w0);
  d.beam_width = g.w0 * std::sqrt(1.0 + (1.0 + 2.0 * g.w0 * g.w0 / (chi_l * chi_l)) * spread * spread);

  auto v_of = [&](double chi) { return g.aperture_radius / d.beam_width * std::sqrt(std::numbers::pi / (2.0 * chi)); };
  auto k_of = [&](double chi, double v) {
    return std::sqrt(std::numbers::pi) * chi * std::erf(v) / (2.0 * v * std::exp(-v * v));
  };
  d.v_min = v_of(d.chi_min);
  d.v_max = v_of(d.chi_max);
  d.k_min = k_of(d.chi_min, d.v_min);
  d.k_max = k_of(d.chi_max, d.v_max);
  const double k_m = 0.5 * (d.k_min + d.k_max);
  d.pointing.s0 = std::erf(d.v_min) * std::erf(d.v_max);
  d.pointing.phi = k_m * d.beam_width * d.beam_width /
                   (4.0 * g.sigma_p * g.sigma_p + 4.0 * g.d_x * g.d_x * g.sigma0 * g.sigma0);
  return d;
}

inline FsoPointing derive_pointing(const FsoGeometry& g) { return derive_pointing_detail(g).pointing; }

// F-turbulence (alpha: small-scale, beta: large-scale) with pointing error.
struct FsoFading {
  double alpha = 5.0;
  double beta = 3.0;
  FsoPointing pointing;
  friend bool operator==(const FsoFading&, const FsoFading&) = default;
};

inline double fso_shape_from_log_variance(double sigma2) {
  require_positive(sigma2, "log-irradiance variance");
  return 1.0 / std::expm1(sigma2);
}

inline double fso_log_variance_from_shape(double shape) {
  require_positive(shape, "F-turbulence shape");
  return std::log1p(1.0 / shape);
}

// Plane-wave Rytov variance 1.23 C_n^2 k^(7/6) L^(11/6).
inline double rytov_variance(const FsoGeometry& g) {
  require_positive(g.cn2, "C_n^2");
  const double k = 2.0 * std::numbers::pi / g.wavelength;
  return 1.23 * g.cn2 * std::pow(k, 7.0 / 6.0) * std::pow(g.distance, 11.0 / 6.0);
}

// Small- and large-scale log-irradiance variances for a plane wave (point
// receiver), valid from weak to strong turbulence.
struct LogVariances {
  double small = 0.0;
  double large = 0.0;
};

inline LogVariances log_variances_from_rytov(double r2) {
  require_positive(r2, "Rytov variance");
  const double s = std::pow(r2, 1.2);
  return {0.51 * r2 / std::pow(1.0 + 0.69 * s, 5.0 / 6.0), 0.49 * r2 / std::pow(1.0 + 1.11 * s, 7.0 / 6.0)};
}

struct ThzComponent {
  double w = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
  friend bool operator==(const ThzComponent&, const ThzComponent&) = default;
};

// Mixture-Gaussian |h_f| with THz pointing error. With normalized = true the
// mixture is truncated to [0, inf) and renormalised; with normalized = false
// the analytic CDF keeps the raw mixture mass on [0, inf) (deficit reported).
// The sampler always draws from the truncated mixture.
struct ThzFading {
  std::vector<ThzComponent> components{ThzComponent{}};
  double rho = 27.94;
  bool normalized = true;
  friend bool operator==(const ThzFading&, const ThzFading&) = default;
};

using Fading = std::variant<RayleighFading, FtrFading, FsoFading, ThzFading>;

enum class Technology { Rf, MmWave, Fso, Thz };

inline const char* to_string(Technology t) {
  switch (t) {
    case Technology::Rf: return "RF";
    case Technology::MmWave: return "mW";
    case Technology::Fso: return "FSO";
    case Technology::Thz: return "THz";
  }
  return "?";
}

// One link: fading and pointing parameters plus its average SNR parameter.
struct ChannelModel {
  Fading fading;
  SnrValue gamma_bar{1.0};
  friend bool operator==(const ChannelModel&, const ChannelModel&) = default;
};

inline Technology technology(const ChannelModel& m) {
  switch (m.fading.index()) {
    case 0: return Technology::Rf;
    case 1: return Technology::MmWave;
    case 2: return Technology::Fso;
    default: return Technology::Thz;
  }
}

inline void validate(const ChannelModel& m) {
  require_positive(m.gamma_bar.value(), "gamma_bar");
  std::visit(
      [](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, RayleighFading>) {
          require_positive(f.lambda, "Rayleigh lambda");
        } else if constexpr (std::is_same_v<T, FtrFading>) {
          require_positive(f.m, "FTR m");
          require(f.k >= 0.0 && std::isfinite(f.k), "FTR K must be non-negative");
          require(f.delta >= 0.0 && f.delta <= 1.0, "FTR delta must lie in [0, 1]");
          require(f.series_terms >= 1 && f.series_terms <= 10000, "FTR series_terms out of range");
        } else if constexpr (std::is_same_v<T, FsoFading>) {
          require_positive(f.alpha, "FSO alpha");
          require(f.beta > 1.0 && std::isfinite(f.beta), "FSO beta must exceed 1 (psi = (beta - 1) S0 > 0)");
          require(f.pointing.s0 > 0.0 && f.pointing.s0 <= 1.0, "FSO S0 must lie in (0, 1]");
          require_positive(f.pointing.phi, "FSO phi");
        } else {
          require(!f.components.empty(), "THz mixture needs at least one component");
          double sw = 0.0;
          for (const auto& c : f.components) {
            require(c.w >= 0.0 && c.w <= 1.0, "THz weight must lie in [0, 1]");
            require_finite(c.mu, "THz mu");
            require_positive(c.sigma, "THz sigma");
            sw += c.w;
          }
          require(std::abs(sw - 1.0) <= 1e-12, "THz weights must sum to 1");
          require_positive(f.rho, "THz rho");
        }
      },
      m.fading);
}

// ---------------------------------------------------------------- sampling

// Per-model draw state. Holds distribution objects with internal caches, so
// use one sampler per RNG substream.
class ChannelSampler {
 public:
  explicit ChannelSampler(const ChannelModel& m) : gbar_(m.gamma_bar.value()) {
    validate(m);
    std::visit([this](const auto& f) { init(f); }, m.fading);
    kind_ = m.fading.index();
  }

  double operator()(Rng& rng) {
    switch (kind_) {
      case 0: return -gbar_ / lambda_ * std::log(uniform_open0(rng));
      case 1: return gbar_ * ftr_gain2(rng);
      case 2: {
        const double hf = fso_scale_ * gamma_a_(rng) / gamma_b_(rng);
        const double hp = s0_ * std::pow(uniform_open0(rng), 1.0 / phi_);
        const double h = hf * hp;
        return gbar_ * h * h;
      }
      default: {
        const double hf = thz_fading(rng);
        const double hp = std::pow(uniform_open0(rng), inv_rho_) * std::pow(uniform_open0(rng), inv_rho_);
        const double h = hf * hp;
        return gbar_ * h * h;
      }
    }
  }

 private:
  void init(const RayleighFading& f) { lambda_ = f.lambda; }
  void init(const FtrFading& f) {
    const double zeta2 = 0.5 / (1.0 + f.k);
    const double s = 2.0 * zeta2 * f.k;  // V1^2 + V2^2
    const double p = zeta2 * f.k * f.delta;  // V1 V2
    const double a = std::sqrt(s + 2.0 * p), b = std::sqrt(std::max(0.0, s - 2.0 * p));
    v1_ = 0.5 * (a + b);
    v2_ = 0.5 * (a - b);
    xi_ = std::gamma_distribution<double>(f.m, 1.0 / f.m);
    diffuse_ = std::normal_distribution<double>(0.0, std::sqrt(zeta2));
  }
  void init(const FsoFading& f) {
    gamma_a_ = std::gamma_distribution<double>(f.alpha, 1.0);
    gamma_b_ = std::gamma_distribution<double>(f.beta, 1.0);
    fso_scale_ = (f.beta - 1.0) / f.alpha;  // unit-mean F variate
    s0_ = f.pointing.s0;
    phi_ = f.pointing.phi;
  }
  void init(const ThzFading& f) {
    double acc = 0.0;
    for (const auto& c : f.components) {
      acc += c.w;
      cum_w_.push_back(acc);
      mu_.push_back(c.mu);
      sigma_.push_back(c.sigma);
    }
    cum_w_.back() = 1.0;
    inv_rho_ = 1.0 / f.rho;
  }

  double ftr_gain2(Rng& rng) {
    const double sx = std::sqrt(xi_(rng));
    const double p1 = 2.0 * std::numbers::pi * std::generate_canonical<double, 53>(rng);
    const double p2 = 2.0 * std::numbers::pi * std::generate_canonical<double, 53>(rng);
    const double re = sx * (v1_ * std::cos(p1) + v2_ * std::cos(p2)) + diffuse_(rng);
    const double im = sx * (v1_ * std::sin(p1) + v2_ * std::sin(p2)) + diffuse_(rng);
    return re * re + im * im;
  }

  // Component choice and Gaussian draw are both repeated on rejection, so the
  // accepted draw follows the mixture truncated to [0, inf).
  double thz_fading(Rng& rng) {
    for (int tries = 0; tries < 1000000; ++tries) {
      const double u = std::generate_canonical<double, 53>(rng);
      std::size_t i = 0;
      while (i + 1 < cum_w_.size() && u >= cum_w_[i]) ++i;
      const double x = mu_[i] + sigma_[i] * unit_normal_(rng);
      if (x >= 0.0) return x;
    }
    throw NumericFailure("THz mixture: rejection sampler stalled (almost no mass on [0, inf))");
  }

  std::size_t kind_ = 0;
  double gbar_;
  double lambda_ = 1.0;
  double v1_ = 0.0, v2_ = 0.0;
  std::gamma_distribution<double> xi_{1.0, 1.0};
  std::normal_distribution<double> diffuse_{0.0, 1.0};
  std::gamma_distribution<double> gamma_a_{1.0, 1.0}, gamma_b_{1.0, 1.0};
  double fso_scale_ = 1.0, s0_ = 1.0, phi_ = 1.0;
  std::vector<double> cum_w_, mu_, sigma_;
  std::normal_distribution<double> unit_normal_{0.0, 1.0};
  double inv_rho_ = 1.0;
};

inline double sample_snr(const ChannelModel& m, Rng& rng) {
  ChannelSampler s(m);
  return s(rng);
}

// ---------------------------------------------------------------- analytics

struct CdfValue {
  double value = 0.0;
  double truncation = 0.0;  // series truncation indicator (FTR), else 0
};

namespace detail {

struct RayleighDist {
  double lambda, gbar;
  CdfValue cdf(double g) const { return {-std::expm1(-lambda * g / gbar), 0.0}; }
  double pdf(double g) const { return lambda / gbar * std::exp(-lambda * g / gbar); }
};

// Poisson mixture of Gamma(j + 1, 2 zeta^2 gamma_bar) laws:
//   w_j = m^m Gamma(j + m) / (Gamma(m) j!) * (1/pi) int_0^pi a^j (m + a)^-(j + m) dtheta,
//   a = K (1 + Delta cos theta).
struct FtrDist {
  std::vector<double> w;
  std::vector<double> lfact;  // log j!
  double scale;  // 2 zeta^2 gamma_bar
  double tail_mass;

  FtrDist(const FtrFading& f, double gbar) : scale(gbar / (1.0 + f.k)) {
    const int J = f.series_terms;
    w.assign(static_cast<std::size_t>(J), 0.0);
    if (f.k == 0.0) {
      w[0] = 1.0;
      for (int j = 0; j < J; ++j) lfact.push_back(numerics::log_gamma(j + 1.0));
      tail_mass = 0.0;
      return;
    }
    lfact.resize(static_cast<std::size_t>(J));
    std::vector<double> lc(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
      lfact[static_cast<std::size_t>(j)] = numerics::log_gamma(j + 1.0);
      lc[static_cast<std::size_t>(j)] = f.m * std::log(f.m) + numerics::log_gamma(j + f.m) -
                                        numerics::log_gamma(f.m) - lfact[static_cast<std::size_t>(j)];
    }
    // Periodic trapezoid in theta over the full circle, doubled until stable.
    std::vector<double> prev;
    for (int M = 64;; M *= 2) {
      std::vector<double> cur(static_cast<std::size_t>(J), 0.0);
      for (int i = 0; i < M; ++i) {
        const double th = 2.0 * std::numbers::pi * (i + 0.5) / M;
        const double a = f.k * (1.0 + f.delta * std::cos(th));
        const double la = std::log(a), lma = std::log(f.m + a);
        for (int j = 0; j < J; ++j) {
          const double lt = (j == 0 ? 0.0 : j * la) - (j + f.m) * lma;
          cur[static_cast<std::size_t>(j)] += std::exp(lt + lc[static_cast<std::size_t>(j)]);
        }
      }
      for (double& v : cur) v /= M;
      if (!prev.empty()) {
        double diff = 0.0;
        for (int j = 0; j < J; ++j) diff = std::max(diff, std::abs(cur[j] - prev[j]));
        if (diff < 1e-15) {
          w = std::move(cur);
          break;
        }
      }
      prev = std::move(cur);
      if (M >= 65536) throw NumericFailure("FTR weights: angular quadrature did not converge");
    }
    double s = 0.0;
    for (double v : w) s += v;
    if (!std::isfinite(s)) throw NumericFailure("FTR weights are not finite");
    tail_mass = std::max(0.0, 1.0 - s);
  }

  // P(j + 1, x) for j = 0..J-1 via downward recursion from P(J, x):
  //   P(j, x) = P(j + 1, x) + x^j e^-x / j!
  // Also returns the Poisson terms t_j = x^j e^-x / j!.
  void incomplete(double x, std::vector<double>& p, std::vector<double>& t) const {
    const int J = static_cast<int>(w.size());
    p.assign(static_cast<std::size_t>(J), 0.0);
    t.assign(static_cast<std::size_t>(J), 0.0);
    const double lx = std::log(x);
    for (int j = 0; j < J; ++j)
      t[static_cast<std::size_t>(j)] = std::exp(j * lx - x - lfact[static_cast<std::size_t>(j)]);
    double pj = numerics::regularized_lower_gamma(static_cast<double>(J), x);  // P(J, x)
    for (int j = J - 1; j >= 0; --j) {
      // P(j + 1, x) is needed; pj currently holds P(j + 1, x).
      p[static_cast<std::size_t>(j)] = pj;
      pj += t[static_cast<std::size_t>(j)];
    }
  }

  CdfValue cdf(double g) const {
    if (g <= 0.0) return {0.0, 0.0};
    const double x = g / scale;
    std::vector<double> p, t;
    incomplete(x, p, t);
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * p[j];
    const double last = w.back() * p.back();
    return {std::min(1.0, s), std::abs(last)};
  }

  double pdf(double g) const {
    if (g < 0.0) return 0.0;
    const double x = g / scale;
    if (x == 0.0) return w[0] / scale;
    std::vector<double> p, t;
    incomplete(x, p, t);
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * t[j];
    return s / scale;
  }
};

// I = h_f h_p, gamma = gamma_bar I^2, z = alpha I / psi, psi = (beta - 1) S0.
//   f_I(I) = phi / (I Gamma(alpha) Gamma(beta)) G^{2,1}_{2,2}(z | 1 - beta, 1 + phi; alpha, phi)
//   F_I(I) = phi / (Gamma(alpha) Gamma(beta)) G^{2,2}_{3,3}(z | 1, 1 - beta, 1 + phi; alpha, phi, 0)
struct FsoDist {
  double alpha, beta, phi, psi, gbar, log_norm;
  numerics::MeijerGTable cdf_g, pdf_g;

  static numerics::ContourSpec contour() {
    numerics::ContourSpec cs;
    cs.placement = numerics::ContourPlacement::ZAdaptive;
    return cs;
  }

  FsoDist(const FsoFading& f, double gbar_)
      : alpha(f.alpha),
        beta(f.beta),
        phi(f.pointing.phi),
        psi((f.beta - 1.0) * f.pointing.s0),
        gbar(gbar_),
        log_norm(std::log(f.pointing.phi) - numerics::log_gamma(f.alpha) - numerics::log_gamma(f.beta)),
        cdf_g({{1.0, 1.0 - f.beta, 1.0 + f.pointing.phi}, 2, {f.alpha, f.pointing.phi, 0.0}, 2}, contour()),
        pdf_g({{1.0 - f.beta, 1.0 + f.pointing.phi}, 1, {f.alpha, f.pointing.phi}, 2}, contour()) {}

  CdfValue cdf(double g) const {
    if (g <= 0.0) return {0.0, 0.0};
    const double z = alpha * std::sqrt(g / gbar) / psi;
    const double v = std::exp(log_norm) * cdf_g(z);
    return {std::clamp(v, 0.0, 1.0), 0.0};
  }

  double pdf(double g) const {
    if (g <= 0.0) return 0.0;
    const double i = std::sqrt(g / gbar);
    const double z = alpha * i / psi;
    const double fi = std::exp(log_norm) / i * pdf_g(z);
    return std::max(0.0, fi / (2.0 * std::sqrt(g * gbar)));
  }
};

// gamma = gamma_bar (h_f h_p)^2 with h_p = U1^(1/rho) U2^(1/rho), whose
// density is -rho^2 ln(y) y^(rho - 1) on (0, 1). Conditioning on h_p = y:
//   F(gamma) = int_0^1 -rho^2 ln(y) y^(rho-1) F_hf(r / y) dy,  r = sqrt(gamma / gamma_bar)
// evaluated with y = e^-u, where the weight becomes the Gamma(2, rate rho) density.
struct ThzDist {
  std::vector<ThzComponent> comp;
  double rho, gbar, mass;  // mass: retained mixture mass on [0, inf)
  bool normalized;

  ThzDist(const ThzFading& f, double gbar_) : comp(f.components), rho(f.rho), gbar(gbar_), normalized(f.normalized) {
    mass = 0.0;
    for (const auto& c : comp) mass += c.w * numerics::normal_cdf(c.mu / c.sigma);
    if (!(mass > 1e-300)) throw InvalidArgument("THz mixture has no mass on [0, inf)");
  }

  double denom() const { return normalized ? mass : 1.0; }

  double hf_cdf(double x) const {
    double s = 0.0;
    for (const auto& c : comp) s += c.w * numerics::normal_interval(-c.mu / c.sigma, (x - c.mu) / c.sigma);
    return s / denom();
  }

  double hf_pdf(double x) const {
    double s = 0.0;
    for (const auto& c : comp) s += c.w * numerics::normal_pdf((x - c.mu) / c.sigma) / c.sigma;
    return s / denom();
  }

  double upper_u() const { return 60.0 / rho; }

  static numerics::QuadSpec quad() {
    numerics::QuadSpec q;
    q.abs_tol = 1e-15;
    q.rel_tol = 1e-11;
    q.max_subdivisions = 2000;
    return q;
  }

  CdfValue cdf(double g) const {
    if (g <= 0.0) return {0.0, 0.0};
    const double r = std::sqrt(g / gbar);
    const double r2 = rho * rho;
    auto f = [&](double u) { return r2 * u * std::exp(-rho * u) * hf_cdf(r * std::exp(u)); };
    const double v = numerics::integrate_adaptive(f, 0.0, upper_u(), quad());
    return {std::clamp(v, 0.0, 1.0), 0.0};
  }

  // f_R(r) = int f_hp(y) f_hf(r / y) / y dy, f_gamma = f_R(r) / (2 sqrt(gamma gamma_bar))
  double pdf(double g) const {
    if (g <= 0.0) return 0.0;
    const double r = std::sqrt(g / gbar);
    const double r2 = rho * rho;
    auto f = [&](double u) { return r2 * u * std::exp(-rho * u + u) * hf_pdf(r * std::exp(u)); };
    const double fr = numerics::integrate_adaptive(f, 0.0, upper_u(), quad());
    return fr / (2.0 * std::sqrt(g * gbar));
  }

  // E|h_f|^2 of the truncated mixture (the sampler's law).
  double hf_second_moment() const {
    double s = 0.0;
    for (const auto& c : comp) {
      const double t = c.mu / c.sigma;
      s += c.w * ((c.mu * c.mu + c.sigma * c.sigma) * numerics::normal_cdf(t) + c.mu * c.sigma * numerics::normal_pdf(t));
    }
    return s / mass;
  }
};

}  // namespace detail

// Analytic evaluator with per-model precomputation (FTR weights, Meijer-G
// contour nodes). Immutable after construction.
class ChannelDistribution {
 public:
  explicit ChannelDistribution(const ChannelModel& m) : model_(m) {
    validate(m);
    const double gb = m.gamma_bar.value();
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, RayleighFading>) impl_.emplace<detail::RayleighDist>(detail::RayleighDist{f.lambda, gb});
          else if constexpr (std::is_same_v<T, FtrFading>) impl_.emplace<detail::FtrDist>(f, gb);
          else if constexpr (std::is_same_v<T, FsoFading>) impl_.emplace<detail::FsoDist>(f, gb);
          else impl_.emplace<detail::ThzDist>(f, gb);
        },
        m.fading);
  }

  const ChannelModel& model() const { return model_; }

  CdfValue cdf(double g) const {
    require(g >= 0.0 && !std::isnan(g), "cdf needs gamma >= 0");
    if (g == 0.0) return {0.0, 0.0};
    if (std::isinf(g)) return {1.0 - mass_deficit(), 0.0};
    return std::visit(
        [&](const auto& d) -> CdfValue {
          if constexpr (std::is_same_v<std::decay_t<decltype(d)>, std::monostate>) return {};
          else return d.cdf(g);
        },
        impl_);
  }

  double pdf(double g) const {
    require(g > 0.0 && std::isfinite(g), "pdf needs gamma > 0");
    return std::visit(
        [&](const auto& d) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(d)>, std::monostate>) return 0.0;
          else return d.pdf(g);
        },
        impl_);
  }

  // Probability mass missing from the analytic law (THz, normalized = false).
  double mass_deficit() const {
    if (const auto* t = std::get_if<detail::ThzDist>(&impl_)) return t->normalized ? 0.0 : 1.0 - t->mass;
    return 0.0;
  }

  // FTR: sum of the weights beyond the retained series terms.
  double series_tail_mass() const {
    if (const auto* t = std::get_if<detail::FtrDist>(&impl_)) return t->tail_mass;
    return 0.0;
  }

  const std::vector<double>* ftr_weights() const {
    if (const auto* t = std::get_if<detail::FtrDist>(&impl_)) return &t->w;
    return nullptr;
  }

 private:
  ChannelModel model_;
  std::variant<std::monostate, detail::RayleighDist, detail::FtrDist, detail::FsoDist, detail::ThzDist> impl_;
};

inline CdfValue cdf_snr(const ChannelModel& m, SnrValue g) { return ChannelDistribution(m).cdf(g.value()); }
inline double pdf_snr(const ChannelModel& m, SnrValue g) { return ChannelDistribution(m).pdf(g.value()); }

// E[gamma] / gamma_bar for the sampled law; +inf when the mean does not exist.
inline double mean_snr_factor(const ChannelModel& m) {
  validate(m);
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, RayleighFading>) return 1.0 / f.lambda;
        else if constexpr (std::is_same_v<T, FtrFading>) return 1.0;
        else if constexpr (std::is_same_v<T, FsoFading>) {
          if (f.beta <= 2.0) return std::numeric_limits<double>::infinity();
          const double hf2 = (f.beta - 1.0) * (f.alpha + 1.0) / (f.alpha * (f.beta - 2.0));
          const double hp2 = f.pointing.s0 * f.pointing.s0 * f.pointing.phi / (f.pointing.phi + 2.0);
          return hf2 * hp2;
        } else {
          const detail::ThzDist d(f, 1.0);
          const double hp2 = std::pow(f.rho / (f.rho + 2.0), 2.0);
          return d.hf_second_moment() * hp2;
        }
      },
      m.fading);
}

// Exact lower-tail exponent d of the SNR law, F(gamma) ~ c gamma^d as gamma -> 0.
inline double tail_exponent(const ChannelModel& m) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, RayleighFading> || std::is_same_v<T, FtrFading>) return 1.0;
        else if constexpr (std::is_same_v<T, FsoFading>) return 0.5 * std::min(f.alpha, f.pointing.phi);
        else return 0.5 * std::min(1.0, f.rho);
      },
      m.fading);
}

struct Tabulation {
  DistCurve cdf;
  DistCurve pdf;
};

// Element-wise CDF and PDF on a grid of positive SNRs. A CDF that decreases by
// more than 1e-9 between points is reported, not clamped.
inline Tabulation tabulate(const ChannelModel& m, const std::vector<double>& grid) {
  const ChannelDistribution d(m);
  std::vector<double> c(grid.size()), p(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      c[i] = d.cdf(grid[i]).value;
      p[i] = d.pdf(grid[i]);
    } catch (const NumericFailure& e) {
      throw NumericFailure(std::string(e.what()) + " at grid point " + std::to_string(i) + " (gamma = " +
                               std::to_string(grid[i]) + ")",
                           e.best_estimate(), e.error_bound());
    }
    if (i > 0 && c[i] < c[i - 1] - 1e-9) {
      throw NumericFailure("tabulated CDF decreases at grid point " + std::to_string(i) + " (gamma = " +
                           std::to_string(grid[i]) + ")");
    }
  }
  const double mass = 1.0 - d.mass_deficit();
  return {DistCurve(CurveKind::Cdf, grid, std::move(c), mass), DistCurve(CurveKind::Pdf, grid, std::move(p), mass)};
}

}  // namespace hybrid_bhl
