#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hybrid_bhl {

// Rejected configuration or argument. Maps to CLI exit code 1.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical kernel did not meet its tolerance. Carries the best value seen.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what,
                          double best_estimate = std::numeric_limits<double>::quiet_NaN(),
                          double error_bound = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), best_(best_estimate), err_(error_bound) {}
  double best_estimate() const { return best_; }
  double error_bound() const { return err_; }

 private:
  double best_;
  double err_;
};

// Monte Carlo run produced too few events for the requested estimate.
class UnderSampled : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

inline void require_finite(double x, const char* name) {
  if (!std::isfinite(x)) throw InvalidArgument(std::string(name) + " must be finite");
}

inline void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw InvalidArgument(std::string(name) + " must be positive and finite");
}

// ---------------------------------------------------------------- SNR units

struct SnrDb {
  double db = 0.0;
  friend bool operator==(const SnrDb&, const SnrDb&) = default;
};

class SnrValue {
 public:
  SnrValue() = default;
  explicit SnrValue(double linear) : v_(linear) {
    if (!(linear >= 0.0) || !std::isfinite(linear))
      throw InvalidArgument("SNR must be finite and non-negative");
  }
  double value() const { return v_; }
  friend bool operator==(const SnrValue&, const SnrValue&) = default;

 private:
  double v_ = 0.0;
};

inline SnrValue to_linear(SnrDb x) {
  require_finite(x.db, "SNR in dB");
  return SnrValue(std::pow(10.0, x.db / 10.0));
}

// 0 maps to -inf dB.
inline SnrDb to_db(SnrValue x) { return SnrDb{10.0 * std::log10(x.value())}; }

inline double db_to_linear(double db) { return to_linear(SnrDb{db}).value(); }
inline double linear_to_db(double lin) { return to_db(SnrValue(lin)).db; }

// ---------------------------------------------------------------- estimates

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t trials = 0;

  static Estimate proportion(std::uint64_t events, std::uint64_t trials) {
    require(trials > 0, "estimate needs at least one trial");
    const double p = static_cast<double>(events) / static_cast<double>(trials);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials)), trials};
  }

  static Estimate sample_mean(double sum, double sum_sq, std::uint64_t n) {
    require(n > 0, "estimate needs at least one trial");
    const double dn = static_cast<double>(n);
    const double m = sum / dn;
    double var = n > 1 ? (sum_sq - dn * m * m) / (dn - 1.0) : 0.0;
    if (var < 0.0) var = 0.0;
    return {m, std::sqrt(var / dn), n};
  }
};

// |analytic - mc| <= 4 stderr + analytic tolerance
inline bool agrees(double analytic, double tolerance, const Estimate& mc, double sigmas = 4.0) {
  return std::abs(analytic - mc.mean) <= sigmas * mc.std_error + tolerance;
}

// Same test for a probability, with the binomial stderr at the analytic value
// (the sample stderr is zero when no events were seen).
inline bool agrees_proportion(double analytic, double tolerance, const Estimate& mc, double sigmas = 4.0) {
  const double p = std::clamp(analytic, 0.0, 1.0);
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(mc.trials));
  return std::abs(analytic - mc.mean) <= sigmas * std::max(se, mc.std_error) + tolerance;
}

// Dvoretzky-Kiefer-Wolfowitz half-width: P(sup |F_n - F| > eps) <= miss.
// miss = 0.0027 is the two-sided 3-sigma level.
inline double dkw_epsilon(std::uint64_t n, double miss = 0.0027) {
  require(n > 0 && miss > 0.0 && miss < 1.0, "dkw_epsilon: bad arguments");
  return std::sqrt(std::log(2.0 / miss) / (2.0 * static_cast<double>(n)));
}

// Fraction of sorted samples <= x.
inline double empirical_cdf(const std::vector<double>& sorted, double x) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

// Kolmogorov-Smirnov distance between sorted samples and a CDF.
template <class Cdf>
double ks_statistic(const std::vector<double>& sorted, Cdf&& cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic one-sample KS critical value at the 1% level.
inline double ks_critical_1pct(std::uint64_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

// ---------------------------------------------------------------- curves

enum class CurveKind { Cdf, Pdf };

class DistCurve {
 public:
  DistCurve(CurveKind kind, std::vector<double> grid, std::vector<double> values,
            double target_mass = 1.0)
      : kind_(kind), grid_(std::move(grid)), values_(std::move(values)), target_mass_(target_mass) {
    require(grid_.size() >= 2, "curve needs at least two grid points");
    require(grid_.size() == values_.size(), "curve grid and values differ in length");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      require_finite(grid_[i], "curve grid point");
      require_finite(values_[i], "curve value");
      if (i > 0) require(grid_[i] > grid_[i - 1], "curve grid must be strictly increasing");
    }
  }

  CurveKind kind() const { return kind_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return grid_.size(); }
  double target_mass() const { return target_mass_; }

  // Linear interpolation. Below the grid both kinds read 0; above it a CDF is
  // held at its last value and a PDF reads 0.
  double at(double x) const {
    if (x <= grid_.front()) return x == grid_.front() ? values_.front() : 0.0;
    if (x >= grid_.back()) {
      if (kind_ == CurveKind::Pdf) return x == grid_.back() ? values_.back() : 0.0;
      return values_.back();
    }
    auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid_.begin());
    const double t = (x - grid_[i - 1]) / (grid_[i] - grid_[i - 1]);
    return values_[i - 1] + t * (values_[i] - values_[i - 1]);
  }

  // Trapezoid integral of the tabulated values.
  double mass() const {
    double s = 0.0;
    for (std::size_t i = 1; i < grid_.size(); ++i)
      s += 0.5 * (values_[i] + values_[i - 1]) * (grid_[i] - grid_[i - 1]);
    return s;
  }

  // Running trapezoid integral of a PDF, returned as a CDF curve.
  DistCurve cumulative() const {
    require(kind_ == CurveKind::Pdf, "cumulative() needs a PDF curve");
    std::vector<double> c(values_.size(), 0.0);
    for (std::size_t i = 1; i < grid_.size(); ++i)
      c[i] = c[i - 1] + 0.5 * (values_[i] + values_[i - 1]) * (grid_[i] - grid_[i - 1]);
    return DistCurve(CurveKind::Cdf, grid_, std::move(c), target_mass_);
  }

  // Returns an empty string when the curve satisfies its invariants.
  std::string violation(double tol = 1e-3) const {
    if (kind_ == CurveKind::Cdf) {
      for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] < -tol || values_[i] > 1.0 + tol) return "CDF value outside [0,1]";
        if (i > 0 && values_[i] < values_[i - 1] - tol) return "CDF decreases";
      }
      return {};
    }
    for (double v : values_)
      if (v < 0.0) return "negative density";
    if (std::abs(mass() - target_mass_) > tol) return "density mass off target";
    return {};
  }

 private:
  CurveKind kind_;
  std::vector<double> grid_;
  std::vector<double> values_;
  double target_mass_;
};

// ---------------------------------------------------------------- grids

enum class GridSpacing { Log, Linear };

struct GridSpec {
  double min_factor = 1e-3;  // in units of gamma_bar
  double max_factor = 1e2;
  std::size_t points = 16;
  GridSpacing spacing = GridSpacing::Log;
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline std::vector<double> make_grid(const GridSpec& spec, SnrValue gamma_bar) {
  require_positive(spec.min_factor, "grid min");
  require_positive(spec.max_factor, "grid max");
  require_positive(gamma_bar.value(), "grid gamma_bar");
  require(spec.max_factor > spec.min_factor, "grid max must exceed min");
  require(spec.points >= 2, "grid needs at least two points");
  const double lo = spec.min_factor * gamma_bar.value();
  const double hi = spec.max_factor * gamma_bar.value();
  const std::size_t n = spec.points;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    if (spec.spacing == GridSpacing::Log)
      g[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    else
      g[i] = lo + t * (hi - lo);
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

// ---------------------------------------------------------------- modulation

struct ModulationParams {
  double p = 1.0;
  double q = 1.0;

  ModulationParams() = default;
  ModulationParams(double p_, double q_) : p(p_), q(q_) {
    require_positive(p, "modulation p");
    require_positive(q, "modulation q");
  }
  static ModulationParams bpsk() { return {0.5, 1.0}; }
  static ModulationParams dpsk() { return {1.0, 1.0}; }
  static ModulationParams bfsk() { return {0.5, 0.5}; }
  friend bool operator==(const ModulationParams&, const ModulationParams&) = default;
};

enum class Combiner { Mrc, Osc };

inline const char* to_string(Combiner c) { return c == Combiner::Mrc ? "mrc" : "osc"; }

}  // namespace hybrid_bhl
