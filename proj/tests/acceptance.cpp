// Acceptance checks 1-11: one PASS/FAIL line per criterion.
//
// Environment:
//   EPLX_ACCEPT_TRAJ  trajectories for the long N = 16384 ensembles (default 8)
//   EPLX_ACCEPT_ONLY  comma-separated criterion numbers to run (default all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "eplx/ensemble.hpp"
#include "eplx/observables.hpp"
#include "eplx/presets.hpp"
#include "eplx/spectrum.hpp"
#include "oracle.hpp"

using namespace eplx;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double fs(double t) { return to_atomic_units(t, Unit::fs); }
double to_fs(double t) { return from_atomic_units(t, Unit::fs); }
double sites_per_fs(double v) { return v / SimParams{}.a * to_atomic_units(1.0, Unit::fs); }

int env_int(const char* name, int fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::atoi(v) : fallback;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SimParams small(int N, int M, double gamma_rel) {
  SimParams p;
  p.n_sites = N;
  p.n_layers = M;
  p.x_c = N / 2;
  p.gamma_rel = gamma_rel;
  p.n_traj = 1;
  p.purity = false;
  return p;
}

// 1. Split-operator vs dense exponential with frozen thermal phonons.
Outcome oracle_propagation() {
  auto p = small(8, 2, 1.0);
  p.dt = fs(0.01);
  const auto prof = bright_profile(p);
  const auto table = build_kgrid(p, prof);
  auto rng = trajectory_stream(p.seed, 0);
  auto ph = sample_phonons(p, rng);
  std::mt19937_64 gen(7);
  auto st = oracle::random_state(8, 2, gen);
  const auto psi0 = oracle::to_vector(st);
  Propagator prop(p, table, prof);
  prop.set_frozen_phonons(true);
  const long n = std::lround(fs(10.0) / p.dt);
  prop.advance(st, ph, n);
  const auto ref = oracle::propagate(oracle::hamiltonian(p, ph.q), psi0, n * p.dt);
  const double err = (oracle::to_vector(st) - ref).cwiseAbs().maxCoeff();

  // same check without site disorder
  auto p0 = p;
  p0.gamma_rel = 0.0;
  auto st0 = oracle::from_vector(psi0, 8, 2);
  Propagator prop0(p0, table, prof);
  prop0.set_frozen_phonons(true);
  prop0.advance(st0, ph, n);
  const auto ref0 = oracle::propagate(oracle::hamiltonian(p0, ph.q), psi0, n * p.dt);
  const double err0 = (oracle::to_vector(st0) - ref0).cwiseAbs().maxCoeff();
  return {err <= 1e-8, fmt("max |dpsi| = %.3e at gamma = gamma0 (limit 1e-8); %.3e at gamma = 0", err, err0)};
}

// 2. Norm conservation without loss; photon decay with Omega0 = 0.
Outcome unitarity_and_loss() {
  auto p = small(256, 3, 1.0);
  const auto prof = bright_profile(p);
  const auto table = build_kgrid(p, prof);
  auto rng = trajectory_stream(p.seed, 0);
  auto ph = sample_phonons(p, rng);
  auto st = prepare_wavepacket(p, table, prof);
  Propagator prop(p, table, prof);
  double drift = 0.0;
  for (int block = 0; block < 100; ++block) {
    prop.advance(st, ph, 100);
    drift = std::max(drift, std::abs(st.norm2() - 1.0));
  }

  auto q = small(256, 3, 1.0);
  q.omega0_coupling = 0.0;
  q.t_c = fs(263.0);
  const auto qprof = bright_profile(q);
  const auto qtable = build_kgrid(q, qprof);
  auto qrng = trajectory_stream(q.seed, 0);
  auto qph = sample_phonons(q, qrng);
  QuantumState photon(256, 3);
  photon.c[140] = 1.0;
  Propagator qprop(q, qtable, qprof);
  double rel = 0.0;
  long steps = 0;
  for (int block = 0; block < 100; ++block) {
    qprop.advance(photon, qph, 100);
    steps += 100;
    const double expect = std::exp(-steps * q.dt / q.t_c);
    rel = std::max(rel, std::abs(photon.photon_population() / expect - 1.0));
  }
  const bool ok = drift <= 1e-8 && rel <= 1e-6;
  return {ok, fmt("norm drift %.2e over 1e4 steps; photon decay rel. error %.2e over %.0f fs", drift, rel,
                  to_fs(steps * q.dt))};
}

// 3. Ballistic spreading at gamma = 0.
Outcome ballistic_baseline() {
  auto p = small(32768, 1, 0.0);
  p.t_max = fs(300.0);
  p.record_stride = fs(2.0);
  const auto obs = run_ensemble(p);
  std::vector<double> spread(obs.msd.size());
  for (std::size_t i = 0; i < spread.size(); ++i) spread[i] = obs.msd[i] - obs.msd[0];
  const auto fit = power_law_fit(obs.times, spread, 0.0, p.t_max);
  VelocityOptions vo;
  vo.t_begin = fs(50.0);
  vo.t_end = p.t_max;
  const double v = group_velocity(obs.times, obs.msd, vo);

  const auto table = build_kgrid(p);
  const auto vt = theoretical_group_velocity(table);
  std::size_t centre = 0;
  double best = 1e300;
  for (auto i : excitation_window(p, table))
    if (table[i].k > 0 && std::abs(table[i].mode.omega_minus - p.E0) < best) {
      best = std::abs(table[i].mode.omega_minus - p.E0);
      centre = i;
    }
  const double v_theory = std::abs(vt[centre]);
  const double dev = std::abs(v / v_theory - 1.0);
  const bool ok = std::abs(fit.exponent - 2.0) <= 0.05 && dev <= 0.05;
  return {ok, fmt("N = %d: exponent %.4f; v_g %.3f vs d(omega-)/dk %.3f sites/fs (%.2f%%)", p.n_sites, fit.exponent,
                  sites_per_fs(v), sites_per_fs(v_theory), 100 * dev)};
}

// 4. Rabi splitting at the resonant k for M = 1 and M = 25.
Outcome rabi_splitting() {
  std::vector<double> lo_peak, hi_peak;
  std::ostringstream detail;
  bool ok = true;
  double bin = 0.0;
  for (int M : {1, 25}) {
    auto p = small(1024, M, 0.0);
    p.t_max = fs(400.0);
    bin = 2 * constants::pi / p.t_max;
    const auto table = build_kgrid(p);
    std::size_t row = table.size() / 2;
    for (std::size_t i = table.size() / 2; i < table.size(); ++i)
      if (std::abs(table[i].omega_k - table[i].eps_k) < std::abs(table[row].omega_k - table[row].eps_k)) row = i;
    const auto& r = table[row];
    const double pad = to_atomic_units(0.3, Unit::eV);
    const std::size_t n_e = static_cast<std::size_t>((r.mode.omega_plus - r.mode.omega_minus + 2 * pad) / (bin / 8));
    const auto s = compute_spectrum(p, {row}, {r.mode.omega_minus - pad, r.mode.omega_plus + pad, n_e});
    const auto peaks = find_peaks(s.energies, s.A[0], 0.05);
    if (peaks.size() != 2) {
      detail << "M = " << M << ": " << peaks.size() << " peaks; ";
      ok = false;
      continue;
    }
    const double split = peaks[1].energy - peaks[0].energy;
    const double expect = 2.0 * std::sqrt(table.S) * r.Omega_k_eff;
    ok = ok && std::abs(split - expect) <= bin;
    lo_peak.push_back(peaks[0].energy);
    hi_peak.push_back(peaks[1].energy);
    detail << fmt("M = %d (n = %d): split %.4f eV vs 2 sqrt(S) Omega %.4f eV; ", M, r.n,
                  from_atomic_units(split, Unit::eV), from_atomic_units(expect, Unit::eV));
  }
  if (lo_peak.size() == 2) {
    const double d = std::max(std::abs(lo_peak[0] - lo_peak[1]), std::abs(hi_peak[0] - hi_peak[1]));
    ok = ok && d <= bin;
    detail << fmt("M = 1 vs 25 peak shift %.2e eV; bin %.4f eV", from_atomic_units(d, Unit::eV),
                  from_atomic_units(bin, Unit::eV));
  }
  return {ok, detail.str()};
}

// Shared N = 16384 ensembles for 5 and 6.
struct VgCache {
  int n_traj;
  std::map<std::tuple<int, double, bool>, VelocityEstimate> done;

  VelocityEstimate get(int M, double gamma_rel, bool constrained) {
    const auto key = std::make_tuple(M, gamma_rel, constrained);
    if (auto it = done.find(key); it != done.end()) return it->second;
    auto p = preset_params("fig2d");
    p.n_layers = M;
    p.gamma_rel = gamma_rel;
    p.constrained_sampling = constrained;
    p.n_traj = n_traj;
    const auto obs = run_ensemble(p);
    VelocityOptions vo;
    vo.t_begin = fs(50.0);
    vo.t_end = fs(300.0);
    return done[key] = ensemble_group_velocity(obs, vo);
  }
};

// 5. Constrained M = 25 reproduces the single layer.
Outcome constrained_equivalence(VgCache& cache) {
  bool ok = true;
  std::string detail = fmt("T = %d: ", cache.n_traj);
  for (double g : {1.0, 2.0}) {
    const auto one = cache.get(1, g, false), many = cache.get(25, g, true);
    const double dev = std::abs(many.mean / one.mean - 1.0);
    ok = ok && dev <= 0.05;
    detail += fmt("gamma = %g gamma0: v(M=25, constrained) %.3f vs v(M=1) %.3f sites/fs (%.2f%%); ", g,
                  sites_per_fs(many.mean), sites_per_fs(one.mean), 100 * dev);
  }
  return {ok, detail};
}

// 6. Velocity enhancement with layer number.
Outcome multilayer_enhancement(VgCache& cache) {
  const int layers[] = {1, 5, 15, 25};
  std::vector<VelocityEstimate> v;
  std::string detail = fmt("T = %d: ", cache.n_traj);
  for (int M : layers) {
    v.push_back(cache.get(M, 2.0, false));
    detail += fmt("M=%d %.3f+-%.3f; ", M, sites_per_fs(v.back().mean), sites_per_fs(v.back().std_error));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < v.size(); ++i)
    monotone = monotone && v[i].mean + v[i].std_error >= v[i - 1].mean - v[i - 1].std_error;
  const double ratio = v.back().mean / v.front().mean;
  detail += fmt("ratio %.3f, monotone within errors: %s", ratio, monotone ? "yes" : "no");
  return {ratio >= 1.2 && monotone, detail};
}

// 7. Purity protection by multiple layers.
Outcome purity_protection() {
  auto base = preset_params("fig4");
  base.E0 = to_atomic_units(2.58, Unit::eV);
  base.t_max = fs(600.0);
  base.n_traj = env_int("EPLX_ACCEPT_PURITY_TRAJ", 100);
  double purity[2] = {0, 0};
  const int layers[2] = {1, 15};
  for (int i = 0; i < 2; ++i) {
    auto p = base;
    p.n_layers = layers[i];
    purity[i] = run_ensemble(p).purity.back().ep;
  }
  auto single = base;
  single.n_layers = 15;
  single.n_traj = 1;
  const auto obs = run_ensemble(single);
  double worst = 0.0;
  for (const auto& parts : obs.purity) worst = std::max(worst, std::abs(parts.ep - 1.0));
  const double ratio = purity[1] / purity[0];
  return {ratio >= 2.0 && worst <= 1e-12,
          fmt("T = %d: purity(600 fs) M=15 %.4f, M=1 %.4f, ratio %.3f; single-trajectory |P-1| <= %.1e", base.n_traj,
              purity[1], purity[0], ratio, worst)};
}

// 8. Total purity with cavity loss; additivity against the dense density matrix.
Outcome purity_with_loss() {
  std::string detail;
  bool ok = true;
  for (int M : {1, 15}) {
    auto p = preset_params("fig4");
    p.n_layers = M;
    p.t_c = fs(263.0);
    p.t_max = fs(2000.0);
    p.snapshot_interval = fs(50.0);
    p.record_stride = fs(50.0);
    p.n_traj = 16;
    const auto obs = run_ensemble(p);
    std::size_t imin = 0;
    for (std::size_t i = 0; i < obs.purity.size(); ++i)
      if (obs.purity[i].total < obs.purity[imin].total) imin = i;
    const auto& first = obs.purity.front();
    const auto& last = obs.purity.back();
    // after the minimum the total purity climbs with the ground-state weight
    bool rising = true, bounded = true;
    for (std::size_t i = imin + 1; i < obs.purity.size(); ++i) {
      rising = rising && obs.purity[i].ground >= obs.purity[i - 1].ground;
      rising = rising && obs.purity[i].total <= last.total + 1e-12;
    }
    for (const auto& parts : obs.purity) bounded = bounded && parts.total >= parts.ground && parts.total <= 1.0 + 1e-12;
    const bool case_ok = obs.purity[imin].total < first.total - 0.05 && imin + 1 < obs.purity.size() && rising &&
                         bounded && last.total > 2.0 * obs.purity[imin].total;
    ok = ok && case_ok;
    detail += fmt("M = %d: total %.3f -> min %.3f at %.0f fs -> %.4f at %.0f fs (rho_gg %.4f); ", M, first.total,
                  obs.purity[imin].total, to_fs(obs.purity_times[imin]), last.total, to_fs(obs.purity_times.back()),
                  std::sqrt(last.ground));
  }

  auto q = small(8, 2, 1.0);
  q.t_c = fs(263.0);
  const auto prof = bright_profile(q);
  const auto table = build_kgrid(q, prof);
  std::vector<QuantumState> states;
  std::vector<oracle::Vec> vecs;
  std::mt19937_64 gen(11);
  for (int i = 0; i < 6; ++i) {
    auto rng = trajectory_stream(q.seed, i);
    auto ph = sample_phonons(q, rng);
    auto st = oracle::random_state(8, 2, gen);
    Propagator prop(q, table, prof);
    prop.advance(st, ph, 1000 * (i + 1));
    vecs.push_back(oracle::to_vector(st));
    states.push_back(std::move(st));
  }
  const auto parts = total_purity(states);
  const double err = std::max(std::abs(parts.total - oracle::total_purity(vecs)),
                              std::abs(parts.total - (oracle::purity(vecs) + parts.ground)));
  ok = ok && err <= 1e-10;
  detail += fmt("dense additivity error %.1e", err);
  return {ok, detail};
}

// 9. Variance ratio of the collective vs single-layer site energies.
Outcome synchronization() {
  bool ok = true;
  std::string detail;
  for (int M : {5, 25}) {
    auto p = small(4096, M, 1.0);
    const auto prof = bright_profile(p);
    std::vector<PhononField> samples;
    for (int i = 0; i < 10; ++i) {
      auto rng = trajectory_stream(17, i);
      samples.push_back(sample_phonons(p, rng));
    }
    const auto h = onsite_energy_hist(samples, prof, p.gamma(), p.eps0);
    const double ratio = sample_variance(h.collective) / sample_variance(h.single);
    const double expect = synchronization_ratio(prof);
    const double dev = std::abs(ratio / expect - 1.0);
    ok = ok && dev <= 0.03;
    detail += fmt("M = %d: sampled %.5f vs closed form %.5f (%.2f%%); ", M, ratio, expect, 100 * dev);
  }
  return {ok, detail};
}

// 10. Time-step convergence of the MSD.
Outcome trotter_convergence(int n_traj) {
  double final_msd[2];
  const double steps[2] = {0.1, 0.05};
  for (int i = 0; i < 2; ++i) {
    auto p = preset_params("fig2d");
    p.n_layers = 1;
    p.t_max = fs(600.0);
    p.dt = fs(steps[i]);
    p.n_traj = n_traj;
    final_msd[i] = run_ensemble(p).msd.back();
  }
  const double change = std::abs(final_msd[1] / final_msd[0] - 1.0);
  return {change < 0.01, fmt("T = %d: MSD(600 fs) %.6e vs %.6e bohr^2, change %.3f%%", n_traj, final_msd[0],
                             final_msd[1], 100 * change)};
}

// 11. Gram purity against the dense density matrix.
Outcome gram_purity() {
  std::mt19937_64 gen(21);
  std::vector<QuantumState> states;
  std::vector<oracle::Vec> vecs;
  for (int i = 0; i < 10; ++i) {
    states.push_back(oracle::random_state(8, 2, gen));
    vecs.push_back(oracle::to_vector(states.back()));
  }
  const double err = std::abs(purity_gram(states) - oracle::purity(vecs));
  std::vector<QuantumState> basis;
  for (int i = 0; i < 24; ++i) {
    QuantumState st(8, 2);
    if (i < 8) st.c[i] = 1.0;
    else st.b[i - 8] = 1.0;
    basis.push_back(st);
  }
  bool exact = true;
  for (std::size_t T = 1; T <= basis.size(); ++T)
    exact = exact && purity_gram(std::span<const QuantumState>(basis.data(), T)) == 1.0 / static_cast<double>(T);
  return {err <= 1e-10 && exact,
          fmt("dim 24, 10 states: |gram - dense| = %.1e; orthonormal sets give 1/T exactly: %s", err,
              exact ? "yes" : "no")};
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* v = std::getenv("EPLX_ACCEPT_ONLY")) {
    std::stringstream in(v);
    std::string item;
    while (std::getline(in, item, ','))
      if (!item.empty()) only.insert(std::stoi(item));
  }
  VgCache cache{std::max(2, env_int("EPLX_ACCEPT_TRAJ", 8)), {}};
  const std::vector<std::function<Outcome()>> criteria = {
      oracle_propagation,
      unitarity_and_loss,
      ballistic_baseline,
      rabi_splitting,
      [&] { return constrained_equivalence(cache); },
      [&] { return multilayer_enhancement(cache); },
      purity_protection,
      purity_with_loss,
      synchronization,
      [&] { return trotter_convergence(cache.n_traj); },
      gram_purity,
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i]();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !r.pass;
    std::printf("criterion %2d: %s  %s [%.1f s]\n", id, r.pass ? "PASS" : "FAIL", r.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
