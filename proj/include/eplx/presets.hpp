#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eplx/params.hpp"

namespace eplx {

struct Preset {
  std::string name;
  std::string description;
  ConfigMap overrides;  // human units, applied over the defaults
};

// Named figure configurations. Transport presets use 16384 sites so the
// 50 meV excitation window spans enough k-points for a localized packet.
inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"fig2d", "group velocity, M = 25 vs M = 1 at fixed total Rabi splitting",
       {{"n_sites", "16384"}, {"n_layers", "25"}, {"gamma", "2"}, {"coupling_mode", "fixed-total"},
        {"t_max", "300"}, {"purity", "false"}}},
      {"fig3", "exciton density maps, M = 25, gamma = 2 gamma0, E0 = 2.64 eV",
       {{"n_sites", "16384"}, {"n_layers", "25"}, {"gamma", "2"}, {"E0", "2.64"}, {"t_max", "900"},
        {"record_layers", "true"}, {"snapshot_interval", "100"}, {"purity", "false"}}},
      {"fig4", "MSD and purity, M = 25, gamma = 2 gamma0, E0 = 2.64 eV",
       {{"n_sites", "2048"}, {"n_layers", "25"}, {"gamma", "2"}, {"E0", "2.64"}, {"t_max", "1000"}}},
      {"fig5a", "low phonon frequency omega = 720 cm^-1",
       {{"n_sites", "16384"}, {"n_layers", "25"}, {"gamma", "2"}, {"omega_phn", "720"}, {"t_max", "700"},
        {"purity", "false"}}},
      {"fig5c", "weak light-matter coupling Omega0 = 240 meV",
       {{"n_sites", "16384"}, {"n_layers", "25"}, {"gamma", "2"}, {"omega0_coupling", "240"},
        {"t_max", "700"}, {"purity", "false"}}},
  };
  return table;
}

inline const Preset& find_preset(std::string_view name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

inline SimParams preset_params(std::string_view name) { return params_from_map(find_preset(name).overrides); }

}  // namespace eplx
