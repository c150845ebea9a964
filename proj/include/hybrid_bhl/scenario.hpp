#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "backhaul.hpp"
#include "channels.hpp"
#include "core.hpp"
#include "integrated.hpp"
#include "linkbudget.hpp"

namespace hybrid_bhl {

// How a dB setting maps onto a link. Parameter: the value is the gamma_bar
// of the fading law. Mean: the value is the mean SNR, so gamma_bar is scaled
// by the law's mean factor (for the access hop, the mean of the winner).
enum class SnrReference { Parameter, Mean };

struct LinkConfig {
  Fading fading;
  double offset_db = 0.0;  // added to the sweep value
  friend bool operator==(const LinkConfig&, const LinkConfig&) = default;
};

struct SweepSpec {
  double lo_db = 0.0;
  double hi_db = 30.0;
  std::size_t steps = 7;
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

inline std::vector<double> sweep_points(const SweepSpec& s) {
  require(std::isfinite(s.lo_db) && std::isfinite(s.hi_db), "sweep bounds must be finite");
  require(s.steps >= 1, "sweep needs at least one step");
  if (s.steps == 1) {
    require(s.lo_db == s.hi_db, "a one-step sweep needs lo == hi");
    return {s.lo_db};
  }
  require(s.hi_db > s.lo_db, "sweep hi must exceed lo");
  std::vector<double> v(s.steps);
  for (std::size_t i = 0; i < s.steps; ++i)
    v[i] = s.lo_db + (s.hi_db - s.lo_db) * static_cast<double>(i) / static_cast<double>(s.steps - 1);
  v.back() = s.hi_db;
  return v;
}

// "lo:hi:steps"
inline SweepSpec parse_sweep(const std::string& text) {
  SweepSpec s;
  std::istringstream is(text);
  char c1 = 0, c2 = 0;
  long steps = 0;
  const bool ok = static_cast<bool>(is >> s.lo_db >> c1 >> s.hi_db >> c2 >> steps) && c1 == ':' && c2 == ':';
  if (!ok || !(is >> std::ws).eof())
    throw InvalidArgument("sweep must be lo:hi:steps, got '" + text + "'");
  require(steps >= 1, "sweep steps must be positive");
  s.steps = static_cast<std::size_t>(steps);
  sweep_points(s);
  return s;
}

// Type-1 / Type-2 channel sets and SNR points for the technology comparison.
struct CompareSpec {
  std::vector<double> snr_points_db{5.0, 15.0, 30.0};
  std::vector<Fading> mw, fso, thz;  // index 0 is Type-1
  friend bool operator==(const CompareSpec&, const CompareSpec&) = default;
};

struct NamedBudget {
  std::string name;
  LinkBudget budget;
  std::optional<double> claimed_snr_db;
  friend bool operator==(const NamedBudget&, const NamedBudget&) = default;
};

struct Scenario {
  std::string name;
  unsigned n_devices = 1;
  double access_lambda = 1.0;
  double access_offset_db = 0.0;
  std::vector<LinkConfig> backhaul;
  Combiner combiner = Combiner::Mrc;
  SnrReference snr_reference = SnrReference::Parameter;
  double gamma_th_db = 0.0;
  ModulationParams modulation = ModulationParams::bpsk();
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  std::uint64_t chunk_size = 65536;
  GridSpec grid;
  SweepSpec sweep;
  std::optional<CompareSpec> compare;
  std::vector<NamedBudget> budgets;
  friend bool operator==(const Scenario&, const Scenario&) = default;

  double gamma_th() const { return db_to_linear(gamma_th_db); }
};

inline void validate(const Scenario& s) {
  require(s.n_devices >= 1, "n_devices must be >= 1");
  require_positive(s.access_lambda, "access lambda");
  require(!s.backhaul.empty() && s.backhaul.size() <= 3, "backhaul needs 1 to 3 links");
  require(std::isfinite(s.gamma_th_db), "gamma_th_db must be finite");
  require(s.trials > 0 && s.chunk_size > 0, "trials and chunk_size must be positive");
  for (const auto& l : s.backhaul) validate(ChannelModel{l.fading, SnrValue(1.0)});
  sweep_points(s.sweep);
  make_grid(s.grid, SnrValue(1.0));
  if (s.compare) {
    const auto& c = *s.compare;
    require(c.mw.size() == 2 && c.fso.size() == 2 && c.thz.size() == 2, "compare needs Type-1 and Type-2 for each technology");
    require(!c.snr_points_db.empty(), "compare needs SNR points");
  }
  for (const auto& b : s.budgets) validate(b.budget);
}

inline double harmonic_number(unsigned n) {
  double h = 0.0;
  for (unsigned k = n; k >= 1; --k) h += 1.0 / k;
  return h;
}

inline ChannelModel link_at(const Fading& f, double db, SnrReference ref) {
  ChannelModel m{f, SnrValue(db_to_linear(db))};
  if (ref == SnrReference::Mean) {
    const double k = mean_snr_factor(m);
    require(std::isfinite(k) && k > 0.0, "mean SNR reference needs a finite mean (FSO beta > 2)");
    m.gamma_bar = SnrValue(m.gamma_bar.value() / k);
  }
  return m;
}

inline AccessSpec access_at(const Scenario& s, double db) {
  double g = db_to_linear(db + s.access_offset_db);
  if (s.snr_reference == SnrReference::Mean) g *= s.access_lambda / harmonic_number(s.n_devices);
  return {s.n_devices, s.access_lambda, SnrValue(g)};
}

inline BackhaulSpec backhaul_at(const Scenario& s, double db) {
  BackhaulSpec b{{}, s.combiner};
  for (const auto& l : s.backhaul) b.links.push_back(link_at(l.fading, db + l.offset_db, s.snr_reference));
  return b;
}

inline IntegratedSpec integrated_at(const Scenario& s, double db) {
  return {access_at(s, db), backhaul_at(s, db), SnrDb{db}};
}

inline McConfig mc_config(const Scenario& s, std::uint64_t stream = 0) {
  McConfig c;
  c.trials = s.trials;
  c.seed = s.seed;
  c.stream = stream;
  c.chunk_size = s.chunk_size;
  return c;
}

// ---------------------------------------------------------------- JSON

namespace scenario_json {

using nlohmann::json;

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  require(j.is_object(), where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw InvalidArgument("unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  require(j.contains(key), "missing key '" + std::string(key) + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument("bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

inline FsoGeometry geometry_from(const json& j, const std::string& where) {
  only_keys(j, {"theta", "delta", "sigma0", "sigma_p", "d_x", "w0", "wavelength", "distance", "cn2", "aperture_radius"},
            where);
  FsoGeometry g;
  g.theta = get_or(j, "theta", g.theta, where);
  g.delta = get_or(j, "delta", g.delta, where);
  g.sigma0 = get_or(j, "sigma0", g.sigma0, where);
  g.sigma_p = get_or(j, "sigma_p", g.sigma_p, where);
  g.d_x = get_or(j, "d_x", g.d_x, where);
  g.w0 = get_or(j, "w0", g.w0, where);
  g.wavelength = get_or(j, "wavelength", g.wavelength, where);
  g.distance = get<double>(j, "distance", where);
  g.cn2 = get<double>(j, "cn2", where);
  g.aperture_radius = get<double>(j, "aperture_radius", where);
  return g;
}

// Turbulence: alpha/beta, or the two log-irradiance variances, or a Rytov
// variance, or (failing all) the Rytov variance of the geometry. Pointing:
// s0/phi, or the geometry. Where two styles are given they must agree.
inline FsoFading fso_from(const json& j, const std::string& where) {
  only_keys(j, {"type", "alpha", "beta", "sigma2_ln_s", "sigma2_ln_l", "rytov_variance", "s0", "phi", "geometry",
                "offset_db"},
            where);
  FsoFading f;
  std::optional<FsoGeometry> geo;
  if (j.contains("geometry")) geo = geometry_from(j.at("geometry"), where + ".geometry");

  std::optional<std::pair<double, double>> shapes;  // alpha, beta
  auto add_shapes = [&](double a, double b, const char* style) {
    if (shapes && (rel_diff(shapes->first, a) > 1e-6 || rel_diff(shapes->second, b) > 1e-6))
      throw InvalidArgument(where + ": turbulence given as " + style + " disagrees with alpha/beta");
    if (!shapes) shapes = {a, b};
  };
  if (j.contains("alpha") || j.contains("beta"))
    add_shapes(get<double>(j, "alpha", where), get<double>(j, "beta", where), "alpha/beta");
  if (j.contains("sigma2_ln_s") || j.contains("sigma2_ln_l"))
    add_shapes(fso_shape_from_log_variance(get<double>(j, "sigma2_ln_s", where)),
               fso_shape_from_log_variance(get<double>(j, "sigma2_ln_l", where)), "log variances");
  auto from_rytov = [&](double r2, const char* style) {
    const auto v = log_variances_from_rytov(r2);
    add_shapes(fso_shape_from_log_variance(v.small), fso_shape_from_log_variance(v.large), style);
  };
  if (j.contains("rytov_variance")) from_rytov(get<double>(j, "rytov_variance", where), "rytov_variance");
  if (!shapes && geo) from_rytov(rytov_variance(*geo), "geometry");
  require(shapes.has_value(), where + ": FSO turbulence not given");
  f.alpha = shapes->first;
  f.beta = shapes->second;

  const bool direct = j.contains("s0") || j.contains("phi");
  if (direct) f.pointing = {get<double>(j, "s0", where), get<double>(j, "phi", where)};
  if (geo) {
    const auto p = derive_pointing(*geo);
    if (direct && (rel_diff(p.s0, f.pointing.s0) > 1e-6 || rel_diff(p.phi, f.pointing.phi) > 1e-6))
      throw InvalidArgument(where + ": s0/phi disagree with the geometry");
    f.pointing = p;
  }
  require(direct || geo, where + ": FSO pointing not given");
  return f;
}

inline Fading fading_from(const json& j, const std::string& where) {
  const auto type = get<std::string>(j, "type", where);
  if (type == "rayleigh") {
    only_keys(j, {"type", "lambda", "offset_db"}, where);
    return RayleighFading{get_or(j, "lambda", 1.0, where)};
  }
  if (type == "ftr") {
    only_keys(j, {"type", "m", "k", "delta", "series_terms", "offset_db"}, where);
    return FtrFading{get<double>(j, "m", where), get<double>(j, "k", where), get<double>(j, "delta", where),
                     get_or<int>(j, "series_terms", 50, where)};
  }
  if (type == "fso") return fso_from(j, where);
  if (type == "thz") {
    only_keys(j, {"type", "components", "rho", "normalized", "offset_db"}, where);
    ThzFading t;
    t.components.clear();
    const auto& cs = j.at("components");
    require(cs.is_array() && !cs.empty(), where + ".components must be a non-empty array");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::string w = where + ".components[" + std::to_string(i) + "]";
      only_keys(cs[i], {"w", "mu", "sigma"}, w);
      t.components.push_back({get_or(cs[i], "w", 1.0, w), get_or(cs[i], "mu", 0.0, w), get<double>(cs[i], "sigma", w)});
    }
    t.rho = get<double>(j, "rho", where);
    t.normalized = get_or(j, "normalized", true, where);
    return t;
  }
  throw InvalidArgument(where + ": unknown link type '" + type + "'");
}

inline json to_json(const Fading& f) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, RayleighFading>) return {{"type", "rayleigh"}, {"lambda", x.lambda}};
        else if constexpr (std::is_same_v<T, FtrFading>)
          return {{"type", "ftr"}, {"m", x.m}, {"k", x.k}, {"delta", x.delta}, {"series_terms", x.series_terms}};
        else if constexpr (std::is_same_v<T, FsoFading>)
          return {{"type", "fso"}, {"alpha", x.alpha}, {"beta", x.beta}, {"s0", x.pointing.s0}, {"phi", x.pointing.phi}};
        else {
          json cs = json::array();
          for (const auto& c : x.components) cs.push_back({{"w", c.w}, {"mu", c.mu}, {"sigma", c.sigma}});
          return {{"type", "thz"}, {"components", cs}, {"rho", x.rho}, {"normalized", x.normalized}};
        }
      },
      f);
}

inline Technology parse_technology(const std::string& s, const std::string& where) {
  if (s == "mW") return Technology::MmWave;
  if (s == "FSO") return Technology::Fso;
  if (s == "THz") return Technology::Thz;
  if (s == "RF") return Technology::Rf;
  throw InvalidArgument(where + ": unknown technology '" + s + "'");
}

inline ModulationParams modulation_from(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "bpsk") return ModulationParams::bpsk();
    if (s == "dpsk") return ModulationParams::dpsk();
    if (s == "bfsk") return ModulationParams::bfsk();
    throw InvalidArgument(where + ": unknown modulation '" + s + "'");
  }
  only_keys(j, {"p", "q"}, where);
  return {get<double>(j, "p", where), get<double>(j, "q", where)};
}

}  // namespace scenario_json

inline Scenario parse_scenario(const nlohmann::json& j) {
  using namespace scenario_json;
  only_keys(j,
            {"name", "n_devices", "access", "backhaul", "snr_reference", "gamma_th_db", "modulation", "trials", "seed",
             "chunk_size", "grid", "sweep", "compare", "budgets"},
            "scenario");
  Scenario s;
  s.name = get_or<std::string>(j, "name", "", "scenario");
  s.n_devices = get<unsigned>(j, "n_devices", "scenario");
  if (j.contains("access")) {
    const auto& a = j.at("access");
    only_keys(a, {"lambda", "offset_db"}, "access");
    s.access_lambda = get_or(a, "lambda", 1.0, "access");
    s.access_offset_db = get_or(a, "offset_db", 0.0, "access");
  }
  const auto& b = j.at("backhaul");
  only_keys(b, {"combiner", "links"}, "backhaul");
  const auto comb = get<std::string>(b, "combiner", "backhaul");
  require(comb == "mrc" || comb == "osc", "backhaul.combiner must be mrc or osc");
  s.combiner = comb == "mrc" ? Combiner::Mrc : Combiner::Osc;
  const auto& links = b.at("links");
  require(links.is_array(), "backhaul.links must be an array");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string w = "backhaul.links[" + std::to_string(i) + "]";
    s.backhaul.push_back({fading_from(links[i], w), get_or(links[i], "offset_db", 0.0, w)});
  }
  const auto ref = get_or<std::string>(j, "snr_reference", "parameter", "scenario");
  require(ref == "parameter" || ref == "mean", "snr_reference must be parameter or mean");
  s.snr_reference = ref == "mean" ? SnrReference::Mean : SnrReference::Parameter;
  s.gamma_th_db = get<double>(j, "gamma_th_db", "scenario");
  if (j.contains("modulation")) s.modulation = modulation_from(j.at("modulation"), "modulation");
  s.trials = get_or<std::uint64_t>(j, "trials", s.trials, "scenario");
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed, "scenario");
  s.chunk_size = get_or<std::uint64_t>(j, "chunk_size", s.chunk_size, "scenario");
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    only_keys(g, {"min_factor", "max_factor", "points", "spacing"}, "grid");
    s.grid.min_factor = get_or(g, "min_factor", s.grid.min_factor, "grid");
    s.grid.max_factor = get_or(g, "max_factor", s.grid.max_factor, "grid");
    s.grid.points = get_or<std::size_t>(g, "points", s.grid.points, "grid");
    const auto sp = get_or<std::string>(g, "spacing", "log", "grid");
    require(sp == "log" || sp == "linear", "grid.spacing must be log or linear");
    s.grid.spacing = sp == "log" ? GridSpacing::Log : GridSpacing::Linear;
  }
  if (j.contains("sweep")) {
    const auto& w = j.at("sweep");
    only_keys(w, {"lo_db", "hi_db", "steps"}, "sweep");
    s.sweep = {get<double>(w, "lo_db", "sweep"), get<double>(w, "hi_db", "sweep"), get<std::size_t>(w, "steps", "sweep")};
  }
  if (j.contains("compare")) {
    const auto& c = j.at("compare");
    only_keys(c, {"snr_points_db", "mw", "fso", "thz"}, "compare");
    CompareSpec cs;
    cs.snr_points_db = get_or(c, "snr_points_db", cs.snr_points_db, "compare");
    auto types = [&](const char* key, std::vector<Fading>& out) {
      const auto& a = c.at(key);
      require(a.is_array(), std::string("compare.") + key + " must be an array");
      for (std::size_t i = 0; i < a.size(); ++i)
        out.push_back(fading_from(a[i], std::string("compare.") + key + "[" + std::to_string(i) + "]"));
    };
    types("mw", cs.mw);
    types("fso", cs.fso);
    types("thz", cs.thz);
    s.compare = cs;
  }
  if (j.contains("budgets")) {
    const auto& bs = j.at("budgets");
    require(bs.is_array(), "budgets must be an array");
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const std::string w = "budgets[" + std::to_string(i) + "]";
      const auto& x = bs[i];
      only_keys(x,
                {"name", "technology", "tx_power_dbm", "tx_gain_dbi", "rx_gain_dbi", "noise_dbm", "carrier_hz",
                 "distance_m", "psi", "kappa", "claimed_snr_db"},
                w);
      NamedBudget nb;
      nb.name = get_or<std::string>(x, "name", "", w);
      auto& lb = nb.budget;
      lb.technology = parse_technology(get<std::string>(x, "technology", w), w);
      lb.tx_power_dbm = get<double>(x, "tx_power_dbm", w);
      lb.tx_gain_dbi = get_or(x, "tx_gain_dbi", 0.0, w);
      lb.rx_gain_dbi = get_or(x, "rx_gain_dbi", 0.0, w);
      lb.noise_dbm = get<double>(x, "noise_dbm", w);
      lb.carrier_hz = get<double>(x, "carrier_hz", w);
      lb.distance_m = get<double>(x, "distance_m", w);
      lb.psi = get_or(x, "psi", 0.0, w);
      lb.kappa = get_or(x, "kappa", 0.0, w);
      if (x.contains("claimed_snr_db")) nb.claimed_snr_db = get<double>(x, "claimed_snr_db", w);
      s.budgets.push_back(nb);
    }
  }
  validate(s);
  return s;
}

inline nlohmann::json to_json(const Scenario& s) {
  using nlohmann::json;
  using scenario_json::to_json;
  json links = json::array();
  for (const auto& l : s.backhaul) {
    json x = to_json(l.fading);
    x["offset_db"] = l.offset_db;
    links.push_back(x);
  }
  json j = {
      {"name", s.name},
      {"n_devices", s.n_devices},
      {"access", {{"lambda", s.access_lambda}, {"offset_db", s.access_offset_db}}},
      {"backhaul", {{"combiner", to_string(s.combiner)}, {"links", links}}},
      {"snr_reference", s.snr_reference == SnrReference::Mean ? "mean" : "parameter"},
      {"gamma_th_db", s.gamma_th_db},
      {"modulation", {{"p", s.modulation.p}, {"q", s.modulation.q}}},
      {"trials", s.trials},
      {"seed", s.seed},
      {"chunk_size", s.chunk_size},
      {"grid",
       {{"min_factor", s.grid.min_factor},
        {"max_factor", s.grid.max_factor},
        {"points", s.grid.points},
        {"spacing", s.grid.spacing == GridSpacing::Log ? "log" : "linear"}}},
      {"sweep", {{"lo_db", s.sweep.lo_db}, {"hi_db", s.sweep.hi_db}, {"steps", s.sweep.steps}}},
  };
  if (s.compare) {
    auto arr = [](const std::vector<Fading>& v) {
      json a = json::array();
      for (const auto& f : v) a.push_back(to_json(f));
      return a;
    };
    j["compare"] = {{"snr_points_db", s.compare->snr_points_db},
                    {"mw", arr(s.compare->mw)},
                    {"fso", arr(s.compare->fso)},
                    {"thz", arr(s.compare->thz)}};
  }
  if (!s.budgets.empty()) {
    json bs = json::array();
    for (const auto& nb : s.budgets) {
      const auto& b = nb.budget;
      json x = {{"name", nb.name},           {"technology", to_string(b.technology)},
                {"tx_power_dbm", b.tx_power_dbm}, {"tx_gain_dbi", b.tx_gain_dbi},
                {"rx_gain_dbi", b.rx_gain_dbi},   {"noise_dbm", b.noise_dbm},
                {"carrier_hz", b.carrier_hz},     {"distance_m", b.distance_m},
                {"psi", b.psi},                   {"kappa", b.kappa}};
      if (nb.claimed_snr_db) x["claimed_snr_db"] = *nb.claimed_snr_db;
      bs.push_back(x);
    }
    j["budgets"] = bs;
  }
  return j;
}

inline std::string render_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

inline Scenario parse_scenario_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(j);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

// FNV-1a over the canonical rendering, as 16 hex digits.
inline std::string scenario_hash(const Scenario& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : to_json(s).dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace hybrid_bhl
