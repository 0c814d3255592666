#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eplx/units.hpp"

namespace eplx {

enum class CouplingMode { fixed_per_layer, fixed_total };
enum class PhononSampling { wigner, classical };
enum class ConstrainMode { positions, full };

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// All physical and numerical parameters. Every dimensional field is stored
// in Hartree atomic units; conversion happens only at the I/O boundary.
struct SimParams {
  int n_sites = 1024;
  int n_layers = 1;
  double a = to_atomic_units(1.2, Unit::nm);
  double a_z = to_atomic_units(4.0, Unit::nm);
  double L = to_atomic_units(1000.0, Unit::angstrom);
  double eta = 2.4;
  double eps0 = to_atomic_units(3.2, Unit::eV);
  double tau = to_atomic_units(400.0, Unit::wavenumber);
  double omega_phn = to_atomic_units(1440.0, Unit::wavenumber);
  double gamma_rel = 1.0;  // in units of gamma0(omega_phn)
  double omega0_coupling = to_atomic_units(480.0, Unit::meV);
  double t_c = std::numeric_limits<double>::infinity();
  double kT = to_atomic_units(300.0, Unit::kelvin);
  CouplingMode coupling_mode = CouplingMode::fixed_total;
  bool constrained_sampling = false;
  ConstrainMode constrain = ConstrainMode::full;
  PhononSampling sampling = PhononSampling::wigner;
  double dt = to_atomic_units(0.1, Unit::fs);
  double t_max = to_atomic_units(1000.0, Unit::fs);
  int n_traj = 100;
  std::uint64_t seed = 1;
  double E0 = to_atomic_units(2.64, Unit::eV);
  double dE = to_atomic_units(25.0, Unit::meV);
  double x_c = 512.0;  // site index
  double sigma_E = to_atomic_units(12.5, Unit::meV);
  double record_stride = to_atomic_units(5.0, Unit::fs);
  double snapshot_interval = to_atomic_units(25.0, Unit::fs);
  bool renormalize_forces = false;
  bool record_layers = false;
  bool purity = true;

  double gamma() const { return gamma_rel * gamma0(omega_phn); }
  bool lossy() const { return std::isfinite(t_c); }
  std::size_t n_exciton() const {
    return static_cast<std::size_t>(n_sites) * static_cast<std::size_t>(n_layers);
  }

  void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline double parse_real(const std::string& key, const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "Inf") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError(key, "expected a number, got '" + text + "'");
  return value;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
  long long value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + text + "'");
}

inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void SimParams::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(n_sites >= 2 && n_sites % 2 == 0, "n_sites", "must be even and >= 2");
  require(n_layers >= 1, "n_layers", "must be >= 1");
  require(std::isfinite(a) && a > 0.0, "a", "must be positive");
  require(std::isfinite(a_z) && a_z >= 0.0, "a_z", "must be non-negative");
  require(std::isfinite(L) && L > 0.0, "L", "must be positive");
  require(std::isfinite(eta) && eta > 0.0, "eta", "must be positive");
  require(std::isfinite(eps0) && eps0 >= 0.0, "eps0", "must be non-negative");
  require(std::isfinite(tau) && tau >= 0.0, "tau", "must be non-negative");
  require(std::isfinite(omega_phn) && omega_phn > 0.0, "omega_phn", "must be positive");
  require(std::isfinite(gamma_rel) && gamma_rel >= 0.0, "gamma", "must be non-negative");
  require(std::isfinite(omega0_coupling) && omega0_coupling >= 0.0, "omega0_coupling",
          "must be non-negative");
  require(t_c > 0.0, "t_c", "must be positive (inf disables loss)");
  require(std::isfinite(kT) && kT >= 0.0, "temperature", "must be non-negative");
  require(std::isfinite(dt) && dt > 0.0, "dt", "must be positive");
  require(std::isfinite(t_max) && (t_max == 0.0 || t_max >= dt), "t_max", "must be 0 or >= dt");
  require(n_traj >= 1, "n_traj", "must be >= 1");
  require(std::isfinite(E0), "E0", "must be finite");
  require(std::isfinite(dE) && dE > 0.0, "dE", "must be positive");
  require(std::isfinite(x_c) && x_c >= 0.0 && x_c < n_sites, "x_c", "must lie inside the lattice");
  require(std::isfinite(sigma_E) && sigma_E > 0.0, "sigma_E", "must be positive");
  require(std::isfinite(record_stride) && record_stride > 0.0, "record_stride", "must be positive");
  require(std::isfinite(snapshot_interval) && snapshot_interval > 0.0, "snapshot_interval",
          "must be positive");
  require((n_layers - 1) * a_z < L, "n_layers", "layers do not fit inside the cavity ((M-1)*a_z >= L)");
}

// Reads `key = value` lines; `#` starts a comment. Later duplicates win.
inline ConfigMap read_config_map(std::string_view text) {
  ConfigMap map;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto body = detail::trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    auto key = detail::trim(std::string_view(body).substr(0, eq));
    auto value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
    map[key] = value;
  }
  return map;
}

// Builds validated parameters from human-unit key/value pairs. Keys that
// are absent keep the baseline defaults.
inline SimParams params_from_map(const ConfigMap& map) {
  using detail::parse_bool;
  using detail::parse_integer;
  using detail::parse_real;
  SimParams p;
  bool have_xc = false;
  bool have_sigma = false;
  for (const auto& [key, value] : map) {
    auto real_au = [&](Unit u) {
      const double v = parse_real(key, value);
      if (std::isinf(v)) return v;
      return to_atomic_units(v, u);
    };
    auto finite_real = [&](Unit u) {
      const double v = parse_real(key, value);
      if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
      return to_atomic_units(v, u);
    };
    if (key == "n_sites") {
      p.n_sites = static_cast<int>(parse_integer(key, value));
    } else if (key == "n_layers") {
      p.n_layers = static_cast<int>(parse_integer(key, value));
    } else if (key == "a") {
      p.a = finite_real(Unit::nm);
    } else if (key == "a_z") {
      p.a_z = finite_real(Unit::nm);
    } else if (key == "L") {
      p.L = finite_real(Unit::angstrom);
    } else if (key == "eta") {
      p.eta = parse_real(key, value);
    } else if (key == "eps0") {
      p.eps0 = finite_real(Unit::eV);
    } else if (key == "tau") {
      p.tau = finite_real(Unit::wavenumber);
    } else if (key == "omega_phn") {
      p.omega_phn = finite_real(Unit::wavenumber);
    } else if (key == "gamma") {
      p.gamma_rel = parse_real(key, value);
    } else if (key == "omega0_coupling") {
      p.omega0_coupling = finite_real(Unit::meV);
    } else if (key == "t_c") {
      p.t_c = real_au(Unit::fs);
    } else if (key == "temperature") {
      p.kT = finite_real(Unit::kelvin);
    } else if (key == "coupling_mode") {
      if (value == "fixed-per-layer") p.coupling_mode = CouplingMode::fixed_per_layer;
      else if (value == "fixed-total") p.coupling_mode = CouplingMode::fixed_total;
      else throw ConfigError(key, "expected fixed-per-layer or fixed-total, got '" + value + "'");
    } else if (key == "constrained_sampling") {
      p.constrained_sampling = parse_bool(key, value);
    } else if (key == "constrain") {
      if (value == "positions") p.constrain = ConstrainMode::positions;
      else if (value == "full") p.constrain = ConstrainMode::full;
      else throw ConfigError(key, "expected positions or full, got '" + value + "'");
    } else if (key == "sampling") {
      if (value == "wigner") p.sampling = PhononSampling::wigner;
      else if (value == "classical") p.sampling = PhononSampling::classical;
      else throw ConfigError(key, "expected wigner or classical, got '" + value + "'");
    } else if (key == "dt") {
      p.dt = finite_real(Unit::fs);
    } else if (key == "t_max") {
      p.t_max = finite_real(Unit::fs);
    } else if (key == "n_traj") {
      p.n_traj = static_cast<int>(parse_integer(key, value));
    } else if (key == "seed") {
      const long long s = parse_integer(key, value);
      if (s < 0) throw ConfigError(key, "must be non-negative");
      p.seed = static_cast<std::uint64_t>(s);
    } else if (key == "E0") {
      p.E0 = finite_real(Unit::eV);
    } else if (key == "dE") {
      p.dE = finite_real(Unit::meV);
    } else if (key == "x_c") {
      p.x_c = parse_real(key, value);
      have_xc = true;
    } else if (key == "sigma_E") {
      p.sigma_E = finite_real(Unit::meV);
      have_sigma = true;
    } else if (key == "record_stride") {
      p.record_stride = finite_real(Unit::fs);
    } else if (key == "snapshot_interval") {
      p.snapshot_interval = finite_real(Unit::fs);
    } else if (key == "renormalize_forces") {
      p.renormalize_forces = parse_bool(key, value);
    } else if (key == "record_layers") {
      p.record_layers = parse_bool(key, value);
    } else if (key == "purity") {
      p.purity = parse_bool(key, value);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  if (!have_xc) p.x_c = 0.5 * p.n_sites;
  if (!have_sigma) p.sigma_E = 0.5 * p.dE;
  p.validate();
  return p;
}

inline SimParams parse_config(std::string_view text) { return params_from_map(read_config_map(text)); }

// Canonical human-unit rendering; parse_config(to_config_text(p)) reproduces p.
inline std::string to_config_text(const SimParams& p) {
  using detail::format_real;
  std::ostringstream out;
  auto kv = [&](const char* key, const std::string& v) { out << key << " = " << v << '\n'; };
  auto real = [&](const char* key, double au, Unit u) {
    kv(key, format_real(std::isinf(au) ? au : from_atomic_units(au, u)));
  };
  kv("n_sites", std::to_string(p.n_sites));
  kv("n_layers", std::to_string(p.n_layers));
  real("a", p.a, Unit::nm);
  real("a_z", p.a_z, Unit::nm);
  real("L", p.L, Unit::angstrom);
  kv("eta", format_real(p.eta));
  real("eps0", p.eps0, Unit::eV);
  real("tau", p.tau, Unit::wavenumber);
  real("omega_phn", p.omega_phn, Unit::wavenumber);
  kv("gamma", format_real(p.gamma_rel));
  real("omega0_coupling", p.omega0_coupling, Unit::meV);
  real("t_c", p.t_c, Unit::fs);
  real("temperature", p.kT, Unit::kelvin);
  kv("coupling_mode", p.coupling_mode == CouplingMode::fixed_total ? "fixed-total" : "fixed-per-layer");
  kv("constrained_sampling", p.constrained_sampling ? "true" : "false");
  kv("constrain", p.constrain == ConstrainMode::full ? "full" : "positions");
  kv("sampling", p.sampling == PhononSampling::wigner ? "wigner" : "classical");
  real("dt", p.dt, Unit::fs);
  real("t_max", p.t_max, Unit::fs);
  kv("n_traj", std::to_string(p.n_traj));
  kv("seed", std::to_string(p.seed));
  real("E0", p.E0, Unit::eV);
  real("dE", p.dE, Unit::meV);
  kv("x_c", format_real(p.x_c));
  real("sigma_E", p.sigma_E, Unit::meV);
  real("record_stride", p.record_stride, Unit::fs);
  real("snapshot_interval", p.snapshot_interval, Unit::fs);
  kv("renormalize_forces", p.renormalize_forces ? "true" : "false");
  kv("record_layers", p.record_layers ? "true" : "false");
  kv("purity", p.purity ? "true" : "false");
  return out.str();
}

inline ConfigMap to_config_map(const SimParams& p) { return read_config_map(to_config_text(p)); }

// FNV-1a over the canonical text.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t params_hash(const SimParams& p) { return fnv1a64(to_config_text(p)); }

}  // namespace eplx
