#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "eplx/model.hpp"
#include "eplx/observables.hpp"
#include "eplx/params.hpp"
#include "eplx/propagator.hpp"
#include "eplx/state.hpp"

namespace eplx {

// Worker count from EPLX_WORKERS, falling back to the hardware count.
inline unsigned worker_count_from_env() {
  if (const char* env = std::getenv("EPLX_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1u;
}

class TrajectoryFailure : public std::runtime_error {
 public:
  TrajectoryFailure(std::size_t index, const std::string& what)
      : std::runtime_error("trajectory " + std::to_string(index) + " failed: " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Runs body(i) for i in [0, count) on up to `workers` threads. The first
// failure is rethrown as TrajectoryFailure(i) after all workers stop.
inline void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::size_t err_index = 0;
  std::string err_what;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        body(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mutex);
        if (!failed.exchange(true)) {
          err_index = i;
          err_what = e.what();
        }
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (failed) throw TrajectoryFailure(err_index, err_what);
}

// Integer step schedule shared by trajectories and the ensemble driver.
struct Schedule {
  long total_steps = 0;
  long record_every = 1;
  long snapshot_every = 1;
  std::vector<long> stops;  // sorted union of record and snapshot steps, starts at 0

  bool is_record(long s) const { return s % record_every == 0 || s == total_steps; }
  bool is_snapshot(long s) const { return s % snapshot_every == 0 || s == total_steps; }
};

inline Schedule make_schedule(const SimParams& p) {
  Schedule sc;
  sc.total_steps = std::lround(p.t_max / p.dt);
  sc.record_every = std::max(1L, std::lround(p.record_stride / p.dt));
  sc.snapshot_every = std::max(1L, std::lround(p.snapshot_interval / p.dt));
  for (long s = 0; s <= sc.total_steps; ++s)
    if (sc.is_record(s) || sc.is_snapshot(s)) sc.stops.push_back(s);
  return sc;
}

// One mean-field trajectory: its state, classical phonons and workspace.
struct Trajectory {
  QuantumState state;
  PhononField phonons;
  Propagator propagator;
  long step = 0;

  Trajectory(const SimParams& p, const KTable& table, const BrightProfile& profile, RandomStream& rng)
      : phonons(sample_phonons(p, rng)), propagator(p, table, profile) {
    state = prepare_wavepacket(p, table, profile);
  }

  void advance_to(long target) {
    if (target > step) propagator.advance(state, phonons, target - step);
    step = std::max(step, target);
  }
};

struct TrajectorySeries {
  std::vector<double> times;
  std::vector<double> norm2;
  std::vector<double> photon_pop;
  std::vector<double> msd;
  std::vector<std::vector<double>> density;  // normalized P_n per record
  std::vector<double> snapshot_times;
  std::vector<QuantumState> snapshots;
};

// Drives a single trajectory to t_max. `observer` (optional) sees every
// stop of the schedule.
using TrajectoryObserver = std::function<void(double t, const QuantumState&, const PhononField&)>;

inline TrajectorySeries run_trajectory(const SimParams& p, const KTable& table, const BrightProfile& profile,
                                       RandomStream& rng, const TrajectoryObserver& observer = {}) {
  const auto sc = make_schedule(p);
  Trajectory traj(p, table, profile, rng);
  TrajectorySeries out;
  for (long s : sc.stops) {
    traj.advance_to(s);
    const double t = static_cast<double>(s) * p.dt;
    if (observer) observer(t, traj.state, traj.phonons);
    if (sc.is_record(s)) {
      out.times.push_back(t);
      out.norm2.push_back(traj.state.norm2());
      out.photon_pop.push_back(traj.state.photon_population());
      auto d = exciton_density(traj.state);
      out.msd.push_back(msd(d.per_site, p.a));
      out.density.push_back(std::move(d.per_site));
    }
    if (sc.is_snapshot(s)) {
      out.snapshot_times.push_back(t);
      out.snapshots.push_back(traj.state);
    }
  }
  return out;
}

struct EnsembleObservables {
  std::size_t n_sites = 0;
  std::size_t n_layers = 0;
  double a = 0.0;
  std::vector<double> times;             // record times, a.u.
  std::vector<std::vector<double>> P_n;  // ensemble-averaged normalized density
  std::vector<double> msd;               // from the averaged P_n
  std::vector<double> norm2;
  std::vector<double> photon_pop;
  std::vector<std::vector<double>> traj_msd;  // [trajectory][record]

  std::vector<double> layer_times;              // snapshot times with layer densities
  std::vector<std::vector<double>> P_nm;        // averaged |b_nm|^2 / N_exc, layout m * N + n
  std::vector<double> purity_times;
  std::vector<PurityParts> purity;

  std::uint64_t params_hash = 0;
  std::size_t n_traj = 0;
};

struct EnsembleOptions {
  unsigned workers = 0;  // 0: EPLX_WORKERS / hardware
  // Called with (step, trajectory index, trajectory) at every snapshot stop,
  // in trajectory order.
  std::function<void(long, std::size_t, const Trajectory&)> on_snapshot;
};

// Runs n_traj trajectories and reduces their observables in trajectory
// index order, so the result does not depend on the worker count. With
// purity enabled all trajectories advance in lockstep so that snapshot
// states are available together for the Gram purity.
inline EnsembleObservables run_ensemble(const SimParams& p, const EnsembleOptions& opt = {}) {
  p.validate();
  const auto profile = bright_profile(p);
  const auto table = build_kgrid(p, profile);
  const auto sc = make_schedule(p);
  const unsigned workers = opt.workers ? opt.workers : worker_count_from_env();
  const std::size_t T = static_cast<std::size_t>(p.n_traj);
  const std::size_t N = p.n_sites;
  const std::size_t M = p.n_layers;
  const std::size_t batch = p.purity ? T : std::min<std::size_t>(T, std::max(1u, workers));

  EnsembleObservables obs;
  obs.n_sites = N;
  obs.n_layers = M;
  obs.a = p.a;
  obs.params_hash = params_hash(p);
  obs.n_traj = T;
  for (long s : sc.stops) {
    if (sc.is_record(s)) obs.times.push_back(static_cast<double>(s) * p.dt);
    if (sc.is_snapshot(s)) {
      if (p.record_layers) obs.layer_times.push_back(static_cast<double>(s) * p.dt);
      if (p.purity) obs.purity_times.push_back(static_cast<double>(s) * p.dt);
    }
  }
  const std::size_t n_rec = obs.times.size();
  obs.P_n.assign(n_rec, std::vector<double>(N, 0.0));
  obs.msd.assign(n_rec, 0.0);
  obs.norm2.assign(n_rec, 0.0);
  obs.photon_pop.assign(n_rec, 0.0);
  obs.traj_msd.assign(T, std::vector<double>(n_rec, 0.0));
  if (p.record_layers) obs.P_nm.assign(obs.layer_times.size(), std::vector<double>(N * M, 0.0));

  std::vector<double> scratch(N);
  for (std::size_t first = 0; first < T; first += batch) {
    const std::size_t count = std::min(batch, T - first);
    std::vector<std::unique_ptr<Trajectory>> live(count);
    parallel_for(count, workers, [&](std::size_t j) {
      auto rng = trajectory_stream(p.seed, first + j);
      live[j] = std::make_unique<Trajectory>(p, table, profile, rng);
    });
    std::size_t rec = 0, layer_rec = 0, pur_rec = 0;
    for (long s : sc.stops) {
      parallel_for(count, workers, [&](std::size_t j) { live[j]->advance_to(s); });
      if (sc.is_record(s)) {
        for (std::size_t j = 0; j < count; ++j) {
          const auto& st = live[j]->state;
          double total = 0.0;
          std::fill(scratch.begin(), scratch.end(), 0.0);
          for (std::size_t m = 0; m < M; ++m)
            for (std::size_t n = 0; n < N; ++n) scratch[n] += std::norm(st.b[m * N + n]);
          for (double v : scratch) total += v;
          if (total > 0.0) {
            for (double& v : scratch) v /= total;
            auto& acc = obs.P_n[rec];
            for (std::size_t n = 0; n < N; ++n) acc[n] += scratch[n];
            obs.traj_msd[first + j][rec] = msd(scratch, p.a);
          } else {
            obs.traj_msd[first + j][rec] = std::nan("");
          }
          obs.norm2[rec] += st.norm2();
          obs.photon_pop[rec] += st.photon_population();
        }
        ++rec;
      }
      if (sc.is_snapshot(s)) {
        if (p.record_layers) {
          auto& acc = obs.P_nm[layer_rec++];
          for (std::size_t j = 0; j < count; ++j) {
            const auto& st = live[j]->state;
            const double total = st.exciton_population();
            if (total > 0.0)
              for (std::size_t i = 0; i < N * M; ++i) acc[i] += std::norm(st.b[i]) / total;
          }
        }
        if (p.purity) {
          std::vector<const QuantumState*> ptrs;
          for (const auto& t : live) ptrs.push_back(&t->state);
          obs.purity.push_back(total_purity(ptrs));
          ++pur_rec;
        }
        if (opt.on_snapshot)
          for (std::size_t j = 0; j < count; ++j) opt.on_snapshot(s, first + j, *live[j]);
      }
    }
  }

  const double inv_t = 1.0 / static_cast<double>(T);
  for (std::size_t r = 0; r < n_rec; ++r) {
    double total = 0.0;
    for (double& v : obs.P_n[r]) {
      v *= inv_t;
      total += v;
    }
    obs.norm2[r] *= inv_t;
    obs.photon_pop[r] *= inv_t;
    obs.msd[r] = total > 0.0 ? msd(obs.P_n[r], p.a) : std::nan("");
  }
  for (auto& layer : obs.P_nm)
    for (double& v : layer) v *= inv_t;
  return obs;
}

struct VelocityEstimate {
  double mean = 0.0;        // from the ensemble-averaged MSD
  double std_error = 0.0;   // across per-trajectory estimates
};

inline VelocityEstimate ensemble_group_velocity(const EnsembleObservables& obs, const VelocityOptions& opt) {
  VelocityEstimate v;
  v.mean = group_velocity(obs.times, obs.msd, opt);
  const std::size_t T = obs.traj_msd.size();
  if (T > 1) {
    std::vector<double> per;
    for (const auto& series : obs.traj_msd) per.push_back(group_velocity(obs.times, series, opt));
    v.std_error = std::sqrt(sample_variance(per) / static_cast<double>(T));
  }
  return v;
}

}  // namespace eplx
