#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eplx {

// Hartree atomic units, CODATA 2018.
namespace constants {
inline constexpr double hartree_in_ev = 27.211386245988;
inline constexpr double hartree_in_wavenumber = 219474.6313632;  // cm^-1
inline constexpr double bohr_in_nm = 0.0529177210903;
inline constexpr double au_time_in_fs = 2.4188843265857e-2;
inline constexpr double boltzmann_hartree_per_kelvin = 3.166811563455e-6;
inline constexpr double speed_of_light = 137.035999084;
inline constexpr double pi = 3.14159265358979323846;
}  // namespace constants

enum class Unit { eV, meV, wavenumber, nm, angstrom, fs, kelvin };

// Multiplier taking one `unit` into atomic units. Kelvin converts to k_B*T.
constexpr double unit_factor(Unit unit) {
  using namespace constants;
  switch (unit) {
    case Unit::eV: return 1.0 / hartree_in_ev;
    case Unit::meV: return 1e-3 / hartree_in_ev;
    case Unit::wavenumber: return 1.0 / hartree_in_wavenumber;
    case Unit::nm: return 1.0 / bohr_in_nm;
    case Unit::angstrom: return 0.1 / bohr_in_nm;
    case Unit::fs: return 1.0 / au_time_in_fs;
    case Unit::kelvin: return boltzmann_hartree_per_kelvin;
  }
  return 0.0;
}

inline Unit parse_unit(std::string_view tag) {
  if (tag == "eV") return Unit::eV;
  if (tag == "meV") return Unit::meV;
  if (tag == "cm-1" || tag == "cm^-1" || tag == "cm⁻¹") return Unit::wavenumber;
  if (tag == "nm") return Unit::nm;
  if (tag == "A" || tag == "Å" || tag == "angstrom") return Unit::angstrom;
  if (tag == "fs") return Unit::fs;
  if (tag == "K") return Unit::kelvin;
  throw std::invalid_argument("unknown unit tag '" + std::string(tag) + "'");
}

inline double to_atomic_units(double value, Unit unit) {
  if (!std::isfinite(value)) throw std::invalid_argument("to_atomic_units: non-finite value");
  return value * unit_factor(unit);
}

inline double to_atomic_units(double value, std::string_view unit) {
  return to_atomic_units(value, parse_unit(unit));
}

inline double from_atomic_units(double value, Unit unit) { return value / unit_factor(unit); }

inline double from_atomic_units(double value, std::string_view unit) {
  return from_atomic_units(value, parse_unit(unit));
}

// Reference exciton-phonon coupling scale, gamma0 = 1.1 * omega^(3/2).
inline double gamma0(double omega_phn) {
  if (!(omega_phn >= 0.0)) throw std::invalid_argument("gamma0: negative phonon frequency");
  return 1.1 * omega_phn * std::sqrt(omega_phn);
}

}  // namespace eplx
