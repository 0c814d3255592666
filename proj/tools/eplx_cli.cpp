// eplx command-line driver: run, spectrum, sweep-layers, analyze, presets.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "eplx/ensemble.hpp"
#include "eplx/io.hpp"
#include "eplx/model.hpp"
#include "eplx/observables.hpp"
#include "eplx/params.hpp"
#include "eplx/presets.hpp"
#include "eplx/spectrum.hpp"

namespace fs = std::filesystem;
using namespace eplx;

namespace {

// Flags that mirror config keys; values are kept as text and merged into
// the config map so they go through the same parser.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::map<std::string, std::string> values;
  bool constrained = false;
  std::string out_dir = "eplx_out";

  void attach(CLI::App* app) {
    app->add_option("config", config, "config file (key = value lines)");
    app->add_option("--preset", preset, "start from a named preset");
    struct Flag {
      const char* name;
      const char* key;
      const char* help;
    };
    static const Flag flags[] = {
        {"--n-sites", "n_sites", "lattice sites N"},
        {"--n-layers", "n_layers", "layers M"},
        {"--gamma", "gamma", "exciton-phonon coupling in units of gamma0"},
        {"--coupling-mode", "coupling_mode", "fixed-total | fixed-per-layer"},
        {"--t-c", "t_c", "photon lifetime, fs (inf = no loss)"},
        {"--e0", "E0", "excitation energy, eV"},
        {"--dt", "dt", "time step, fs"},
        {"--t-max", "t_max", "final time, fs"},
        {"--n-traj", "n_traj", "trajectories"},
        {"--seed", "seed", "base seed"},
    };
    for (const auto& f : flags) {
      std::string key = f.key;
      app->add_option_function<std::string>(
          f.name, [this, key](const std::string& v) { values[key] = v; }, f.help);
    }
    app->add_flag("--constrained", constrained, "constrained phonon sampling across layers");
    app->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
  }

  SimParams resolve() const {
    ConfigMap map;
    if (preset) map = find_preset(*preset).overrides;
    if (config) {
      if (!fs::exists(*config)) throw std::runtime_error("config file not found: " + *config);
      for (const auto& [k, v] : read_config_map(read_file(*config))) map[k] = v;
    }
    for (const auto& [k, v] : values) map[k] = v;
    if (constrained) map["constrained_sampling"] = "true";
    return params_from_map(map);
  }
};

double fs_to_au(double t) { return to_atomic_units(t, Unit::fs); }

std::string snapshot_name(long step, std::size_t traj) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%09ld_t%06zu.eplx", step, traj);
  return buf;
}

void write_model_tables(OutputDir& out, const SimParams& p) {
  const auto table = build_kgrid(p);
  out.put("dispersion.csv", group_velocity_csv(table));
  const auto values = ep_eigenvalues(p, table);
  out.put("dos.csv", dos_csv(make_histogram(values, freedman_diaconis_bins(values))));
}

int cmd_run(const Overrides& ov, bool snapshots) {
  const auto p = ov.resolve();
  OutputDir out(ov.out_dir);
  out.manifest.started = utc_timestamp();
  EnsembleOptions opt;
  const fs::path dir = out.path() / "snapshots";
  if (snapshots) {
    fs::create_directories(dir);
    opt.on_snapshot = [&](long step, std::size_t traj, const Trajectory& t) {
      write_snapshot(dir / snapshot_name(step, traj), {static_cast<double>(step) * p.dt, t.state, t.phonons});
    };
  }
  const auto obs = run_ensemble(p, opt);
  write_ensemble_outputs(out, p, obs);
  write_model_tables(out, p);
  out.finish();
  std::cout << "wrote " << out.path().string() << " (" << p.n_traj << " trajectories, N = " << p.n_sites
            << ", M = " << p.n_layers << ")\n";
  return 0;
}

int cmd_spectrum(const Overrides& ov, std::vector<int> k_index, std::optional<double> e_min,
                 std::optional<double> e_max, std::size_t n_e) {
  auto p = ov.resolve();
  p.purity = false;
  const auto table = build_kgrid(p);
  if (k_index.empty()) throw std::invalid_argument("spectrum: empty k list (use --k-index)");
  std::vector<std::size_t> rows;
  double lo = 1e300, hi = -1e300;
  for (int n : k_index) {
    const long row = static_cast<long>(n) + p.n_sites / 2;
    if (row < 0 || row >= p.n_sites) throw std::invalid_argument("spectrum: k index out of range");
    rows.push_back(static_cast<std::size_t>(row));
    lo = std::min(lo, table[row].mode.omega_minus);
    hi = std::max(hi, table[row].mode.omega_plus);
  }
  const double pad = to_atomic_units(0.3, Unit::eV);
  SpectrumGrid grid{e_min ? to_atomic_units(*e_min, Unit::eV) : lo - pad,
                    e_max ? to_atomic_units(*e_max, Unit::eV) : hi + pad, n_e};
  OutputDir out(ov.out_dir);
  out.manifest.started = utc_timestamp();
  out.manifest.params_hash = params_hash(p);
  out.manifest.seed = p.seed;
  out.manifest.n_traj = p.n_traj;
  const auto s = compute_spectrum(p, rows, grid);
  out.put("config.txt", to_config_text(p));
  out.put("spectrum.csv", spectrum_csv(s));
  out.finish();
  for (std::size_t i = 0; i < s.k.size(); ++i) {
    std::cout << "k = " << s.k[i] << " peaks (eV):";
    for (const auto& pk : find_peaks(s.energies, s.A[i], 0.05))
      std::cout << ' ' << from_atomic_units(pk.energy, Unit::eV);
    std::cout << '\n';
  }
  return 0;
}

int cmd_sweep(const Overrides& ov, std::vector<int> layers, double vg_begin, double vg_end) {
  if (layers.empty()) throw std::invalid_argument("sweep-layers: empty layer list");
  std::set<int> unique(layers.begin(), layers.end());
  const auto base = ov.resolve();
  OutputDir out(ov.out_dir);
  out.manifest.started = utc_timestamp();
  out.manifest.params_hash = params_hash(base);
  out.manifest.seed = base.seed;
  out.manifest.n_traj = base.n_traj;
  VelocityOptions vo;
  vo.t_begin = fs_to_au(vg_begin);
  vo.t_end = fs_to_au(vg_end);
  std::vector<LayerSweepRow> rows;
  for (int M : unique) {
    auto p = base;
    p.n_layers = M;
    p.validate();
    const auto obs = run_ensemble(p);
    OutputDir sub(out.path() / ("M" + std::to_string(M)));
    sub.manifest.started = out.manifest.started;
    write_ensemble_outputs(sub, p, obs);
    sub.finish();
    const auto v = ensemble_group_velocity(obs, vo);
    rows.push_back({M, v.mean, v.std_error});
    std::cout << "M = " << M << "  v_g = " << v.mean << " +- " << v.std_error << " a.u.\n";
  }
  out.put("vg_vs_layers.csv", vg_vs_layers_csv(rows));
  out.finish();
  return 0;
}

// Recomputes MSD and purity from the snapshot files of a `run --snapshots`
// output directory, plus the final-time MSD for growing trajectory subsets.
int cmd_analyze(const std::string& run_dir) {
  const fs::path dir(run_dir);
  SimParams p = fs::exists(dir / "config.txt") ? parse_config(read_file(dir / "config.txt")) : SimParams{};
  std::map<long, std::map<std::size_t, fs::path>> files;
  if (!fs::is_directory(dir / "snapshots")) throw std::runtime_error("no snapshots/ directory in " + run_dir);
  for (const auto& e : fs::directory_iterator(dir / "snapshots")) {
    long step = 0;
    std::size_t traj = 0;
    if (std::sscanf(e.path().filename().string().c_str(), "s%ld_t%zu.eplx", &step, &traj) == 2)
      files[step][traj] = e.path();
  }
  if (files.empty()) throw std::runtime_error("no snapshot files found");

  std::string series = "t_fs,msd,norm2,photon_pop,purity_ep,purity_ground,purity_total\n";
  std::vector<std::vector<double>> last_densities;
  for (const auto& [step, by_traj] : files) {
    std::vector<QuantumState> states;
    double time = 0.0;
    for (const auto& [traj, path] : by_traj) {
      auto s = read_snapshot(path);
      time = s.time;
      states.push_back(std::move(s.state));
    }
    std::vector<double> P(states[0].n_sites, 0.0);
    std::vector<std::vector<double>> per;
    double n2 = 0.0, ph = 0.0;
    for (const auto& st : states) {
      auto d = exciton_density(st);
      for (std::size_t n = 0; n < P.size(); ++n) P[n] += d.per_site[n] / states.size();
      per.push_back(std::move(d.per_site));
      n2 += st.norm2() / states.size();
      ph += st.photon_population() / states.size();
    }
    double total = 0.0;
    for (double v : P) total += v;
    for (double& v : P) v /= total;
    const auto pur = total_purity(std::span<const QuantumState>(states));
    detail::append_row(series, from_atomic_units(time, Unit::fs), msd(P, p.a), n2, ph, pur.ep, pur.ground, pur.total);
    last_densities = std::move(per);
  }

  std::string conv = "n_traj,msd_final\n";
  const std::size_t T = last_densities.size();
  for (std::size_t n = 1;; n = std::min(2 * n, T)) {
    std::vector<double> P(last_densities[0].size(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < P.size(); ++j) P[j] += last_densities[i][j];
    double total = 0.0;
    for (double v : P) total += v;
    for (double& v : P) v /= total;
    detail::append_row(conv, n, msd(P, p.a));
    if (n == T) break;
  }
  write_file(dir / "analysis.csv", series);
  write_file(dir / "msd_convergence.csv", conv);
  std::cout << conv;
  return 0;
}

int cmd_presets(const std::optional<std::string>& name) {
  if (!name) {
    for (const auto& p : presets()) std::cout << p.name << "  " << p.description << '\n';
    return 0;
  }
  std::cout << to_config_text(preset_params(*name));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eplx: exciton-polariton multilayer dynamics"};
  app.require_subcommand(1);

  Overrides run_ov, spec_ov, sweep_ov;
  bool snapshots = false;
  auto* run = app.add_subcommand("run", "run a trajectory ensemble");
  run_ov.attach(run);
  run->add_flag("--snapshots", snapshots, "write snapshot files at snapshot times");

  std::vector<int> k_index;
  std::optional<double> e_min, e_max;
  std::size_t n_e = 2001;
  auto* spec = app.add_subcommand("spectrum", "per-k photon autocorrelation spectrum");
  spec_ov.attach(spec);
  spec->add_option("--k-index", k_index, "grid integers n (k = 2 pi n / N a)")->delimiter(',');
  spec->add_option("--e-min", e_min, "lowest energy, eV");
  spec->add_option("--e-max", e_max, "highest energy, eV");
  spec->add_option("--n-e", n_e, "energy grid points")->capture_default_str();

  std::vector<int> layers{1, 5, 15, 25};
  double vg_begin = 50.0, vg_end = 300.0;
  auto* sweep = app.add_subcommand("sweep-layers", "group velocity vs number of layers");
  sweep_ov.attach(sweep);
  sweep->add_option("--layers", layers, "layer counts")->delimiter(',')->capture_default_str();
  sweep->add_option("--vg-begin", vg_begin, "fit window start, fs")->capture_default_str();
  sweep->add_option("--vg-end", vg_end, "fit window end, fs")->capture_default_str();

  std::string run_dir;
  auto* analyze = app.add_subcommand("analyze", "recompute observables from snapshot files");
  analyze->add_option("run_dir", run_dir, "output directory of `run --snapshots`")->required();

  std::optional<std::string> preset_name;
  auto* list = app.add_subcommand("presets", "list presets or print one as a config");
  list->add_option("name", preset_name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(run_ov, snapshots);
    if (*spec) return cmd_spectrum(spec_ov, k_index, e_min, e_max, n_e);
    if (*sweep) return cmd_sweep(sweep_ov, layers, vg_begin, vg_end);
    if (*analyze) return cmd_analyze(run_dir);
    if (*list) return cmd_presets(preset_name);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
