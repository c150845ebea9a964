#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "numerics/gamma.hpp"
#include "numerics/quadrature.hpp"
#include "rng.hpp"

namespace hybrid_bhl {

// N devices with i.i.d. Rayleigh links to the UAV; the aggregate node is the
// device with the largest SNR.
struct AccessSpec {
  unsigned n_devices = 1;
  double lambda = 1.0;
  SnrValue gamma_bar{1.0};
  friend bool operator==(const AccessSpec&, const AccessSpec&) = default;
};

inline void validate(const AccessSpec& s) {
  require(s.n_devices >= 1, "access needs at least one device");
  require_positive(s.lambda, "access lambda");
  require_positive(s.gamma_bar.value(), "access gamma_bar");
}

// (1 - e^(-lambda gamma / gamma_bar))^N
inline double cdf_access(const AccessSpec& s, double g) {
  validate(s);
  require(g >= 0.0 && !std::isnan(g), "cdf_access needs gamma >= 0");
  const double one = -std::expm1(-s.lambda * g / s.gamma_bar.value());
  return std::pow(one, static_cast<double>(s.n_devices));
}

// sum_k C(N, k) (-e^(-lambda gamma / gamma_bar))^k, alternating, in long double.
inline double cdf_access_binomial(const AccessSpec& s, double g) {
  validate(s);
  require(g >= 0.0 && !std::isnan(g), "cdf_access needs gamma >= 0");
  const long double e = std::exp(-static_cast<long double>(s.lambda) * g / s.gamma_bar.value());
  long double term = 1.0L, sum = 1.0L;
  for (unsigned k = 1; k <= s.n_devices; ++k) {
    term *= -e * static_cast<long double>(s.n_devices - k + 1) / static_cast<long double>(k);
    sum += term;
  }
  return static_cast<double>(sum);
}

inline double pdf_access(const AccessSpec& s, double g) {
  validate(s);
  const double c = s.lambda / s.gamma_bar.value();
  const double e = std::exp(-c * g);
  return s.n_devices * c * e * std::pow(-std::expm1(-c * g), static_cast<double>(s.n_devices) - 1.0);
}

// Back-off time: the per-device SNR density at the device's own SNR. Strictly
// decreasing in gamma, so the first timer to expire belongs to the best device.
inline double backoff_time(const AccessSpec& s, double g) {
  const double c = s.lambda / s.gamma_bar.value();
  return c * std::exp(-c * g);
}

struct ProtocolRun {
  std::vector<double> snrs;
  std::vector<double> backoffs;
  std::size_t winner = 0;
  double latency = 0.0;
};

// Timers from the given SNRs; the smallest timer wins, ties to the lowest index.
inline ProtocolRun select_aggregate_node(const AccessSpec& s, std::vector<double> snrs) {
  validate(s);
  require(snrs.size() == s.n_devices, "one SNR per device");
  ProtocolRun r;
  r.snrs = std::move(snrs);
  r.backoffs.reserve(r.snrs.size());
  for (double g : r.snrs) {
    require(g >= 0.0, "SNR must be non-negative");
    r.backoffs.push_back(backoff_time(s, g));
  }
  for (std::size_t i = 1; i < r.backoffs.size(); ++i)
    if (r.backoffs[i] < r.backoffs[r.winner]) r.winner = i;
  r.latency = r.backoffs[r.winner];
  return r;
}

inline std::vector<double> draw_device_snrs(const AccessSpec& s, Rng& rng) {
  std::vector<double> v(s.n_devices);
  const double scale = s.gamma_bar.value() / s.lambda;
  for (auto& g : v) g = -scale * std::log(uniform_open0(rng));
  return v;
}

inline ProtocolRun run_an_selection(const AccessSpec& s, Rng& rng) {
  validate(s);
  return select_aggregate_node(s, draw_device_snrs(s, rng));
}

// Max of N draws without the protocol bookkeeping (same draw sequence).
inline double sample_access_snr(const AccessSpec& s, Rng& rng) {
  const double scale = s.gamma_bar.value() / s.lambda;
  double best = 0.0;
  for (unsigned i = 0; i < s.n_devices; ++i) best = std::max(best, -scale * std::log(uniform_open0(rng)));
  return best;
}

// E[latency] = int backoff(gamma) f_max(gamma) dgamma, by quadrature.
inline double expected_latency(const AccessSpec& s) {
  validate(s);
  return numerics::integrate_adaptive([&](double g) { return backoff_time(s, g) * pdf_access(s, g); }, 0.0,
                                      std::numeric_limits<double>::infinity());
}

inline std::string protocol_csv_header() { return "run_id,winner,winner_snr_db,latency"; }

inline std::string protocol_csv_row(std::uint64_t run_id, const ProtocolRun& r) {
  std::ostringstream os;
  os << std::setprecision(17) << run_id << ',' << r.winner << ',' << 10.0 * std::log10(r.snrs[r.winner]) << ','
     << r.latency;
  return os.str();
}

// ---------------------------------------------------------------- packets

struct PacketPlan {
  double throughput = 0.0;      // bits/s, min of the two link throughputs
  double coherence = 0.0;       // s
  unsigned devices = 1;
  double per_device_bits = 0.0;
  double aggregate_bits = 0.0;
};

inline PacketPlan plan_packets(double r_bhl, double r_iot, double t_coh, unsigned n) {
  require_positive(r_bhl, "backhaul throughput");
  require_positive(r_iot, "access throughput");
  require_positive(t_coh, "coherence time");
  require(n >= 1, "packet plan needs at least one device");
  PacketPlan p;
  p.throughput = std::min(r_bhl, r_iot);
  p.coherence = t_coh;
  p.devices = n;
  p.aggregate_bits = p.throughput * t_coh;
  p.per_device_bits = p.aggregate_bits / n;
  return p;
}

// ---------------------------------------------------------------- BER

// Average BER over the max-of-N Rayleigh law, closed form:
//   (q^p / 2) sum_k C(N, k) (-1)^k (q + k lambda / gamma_bar)^(-p)
// The alternating sum is evaluated in long double; rounding_bound() gives the
// size of the cancellation error.
struct AccessBer {
  double value = 0.0;
  double rounding_bound = 0.0;
};

inline AccessBer access_ber_closed_form(const AccessSpec& s, const ModulationParams& mod) {
  validate(s);
  using LD = long double;
  const LD c = static_cast<LD>(s.lambda) / s.gamma_bar.value();
  const LD q = mod.q, p = mod.p;
  LD binom = 1.0L, sum = 0.0L, mag = 0.0L;
  for (unsigned k = 0; k <= s.n_devices; ++k) {
    if (k > 0) binom *= static_cast<LD>(s.n_devices - k + 1) / static_cast<LD>(k);
    const LD t = binom * std::pow(q / (q + k * c), p);
    sum += (k % 2 == 0) ? t : -t;
    mag += t;
  }
  return {static_cast<double>(0.5L * sum),
          static_cast<double>(0.5L * mag * 8.0L * std::numeric_limits<LD>::epsilon() * (s.n_devices + 1))};
}

// q^p / (2 Gamma(p)) int e^(-q gamma) gamma^(p-1) F(gamma) dgamma, any CDF.
// Integrated in t = q gamma; the substitution t = s^2 removes the t^(p-1)
// endpoint singularity for p < 1.
template <class Cdf>
double ber_from_cdf(Cdf&& cdf, const ModulationParams& mod, const numerics::QuadSpec& spec = {}) {
  const double p = mod.p, q = mod.q;
  const double lg = numerics::log_gamma(p);
  auto f = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double t = s * s;
    const double v = cdf(t / q);
    if (v == 0.0) return 0.0;
    return 2.0 * std::exp(-t + (2.0 * p - 1.0) * std::log(s) - lg) * v;
  };
  return 0.5 * numerics::integrate_adaptive(f, 0.0, std::numeric_limits<double>::infinity(), spec);
}

inline double access_ber_quadrature(const AccessSpec& s, const ModulationParams& mod) {
  numerics::QuadSpec q;
  q.abs_tol = 0.0;
  q.rel_tol = 1e-10;
  q.max_subdivisions = 5000;
  return ber_from_cdf([&](double g) { return cdf_access(s, g); }, mod, q);
}

}  // namespace hybrid_bhl
