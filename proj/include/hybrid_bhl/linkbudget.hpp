#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "channels.hpp"
#include "core.hpp"

namespace hybrid_bhl {

inline constexpr double kTenLog10E = 4.3429448190325182;  // 10 log10(e)

// Physical budget of one link. psi (FSO attenuation, 1/m) and kappa (THz
// absorption, 1/m) are only read for their technology.
struct LinkBudget {
  Technology technology = Technology::MmWave;
  double tx_power_dbm = 0.0;
  double tx_gain_dbi = 0.0;
  double rx_gain_dbi = 0.0;
  double noise_dbm = -131.0;
  double carrier_hz = 50e9;
  double distance_m = 500.0;
  double psi = 0.0;
  double kappa = 0.0;
  friend bool operator==(const LinkBudget&, const LinkBudget&) = default;
};

inline void validate(const LinkBudget& b) {
  require_positive(b.distance_m, "link distance");
  require_positive(b.carrier_hz, "carrier frequency");
  for (double x : {b.tx_power_dbm, b.tx_gain_dbi, b.rx_gain_dbi, b.noise_dbm}) require_finite(x, "budget term");
  if (b.technology == Technology::Fso) require(b.psi >= 0.0 && std::isfinite(b.psi), "FSO psi must be >= 0");
  if (b.technology == Technology::Thz) require(b.kappa >= 0.0 && std::isfinite(b.kappa), "THz kappa must be >= 0");
}

// 3GPP-style close-in model, d in m and f in Hz.
inline double pl_3gpp_db(double d, double f) { return 32.4 + 17.3 * std::log10(d) + 20.0 * std::log10(1e-9 * f); }

inline double fspl_db(double d, double f) {
  return 20.0 * std::log10(4.0 * std::numbers::pi * d * f / kSpeedOfLight);
}

// exp(-psi d) as a power loss.
inline double fso_attenuation_db(double psi, double d) { return kTenLog10E * psi * d; }

// exp(-kappa d / 2) as a power loss.
inline double thz_absorption_db(double kappa, double d) { return 0.5 * kTenLog10E * kappa * d; }

// kappa such that spreading plus absorption equals total_db at distance d.
inline double thz_kappa_for(double total_db, double d, double f) {
  const double k = (total_db - fspl_db(d, f)) / (0.5 * kTenLog10E * d);
  require(k >= 0.0, "THz target loss is below free-space spreading");
  return k;
}

inline double fso_psi_for(double loss_db, double d) { return loss_db / (kTenLog10E * d); }

inline double path_loss_db(const LinkBudget& b) {
  validate(b);
  switch (b.technology) {
    case Technology::Rf:
    case Technology::MmWave: return pl_3gpp_db(b.distance_m, b.carrier_hz);
    case Technology::Fso: return fso_attenuation_db(b.psi, b.distance_m);
    case Technology::Thz: return fspl_db(b.distance_m, b.carrier_hz) + thz_absorption_db(b.kappa, b.distance_m);
  }
  throw InvalidArgument("unknown technology");
}

inline double snr_chain_db(double pt_dbm, double gt, double gr, double pl, double pn_dbm) {
  return pt_dbm + gt + gr - pl - pn_dbm;
}

inline SnrDb average_snr_db(const LinkBudget& b) {
  return SnrDb{snr_chain_db(b.tx_power_dbm, b.tx_gain_dbi, b.rx_gain_dbi, path_loss_db(b), b.noise_dbm)};
}

// Every term of the chain, and the distance to a claimed operating SNR when
// one is given.
struct BudgetReport {
  LinkBudget budget;
  double path_loss_db = 0.0;
  double snr_db = 0.0;
  std::optional<double> claimed_db;
  std::optional<double> gap_db;  // chain minus claim
};

inline BudgetReport budget_report(const LinkBudget& b, std::optional<double> claimed_db = std::nullopt) {
  BudgetReport r;
  r.budget = b;
  r.path_loss_db = path_loss_db(b);
  r.snr_db = snr_chain_db(b.tx_power_dbm, b.tx_gain_dbi, b.rx_gain_dbi, r.path_loss_db, b.noise_dbm);
  r.claimed_db = claimed_db;
  if (claimed_db) r.gap_db = r.snr_db - *claimed_db;
  return r;
}

}  // namespace hybrid_bhl
