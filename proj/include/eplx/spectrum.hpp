#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "eplx/ensemble.hpp"
#include "eplx/model.hpp"
#include "eplx/params.hpp"
#include "eplx/propagator.hpp"
#include "eplx/state.hpp"

namespace eplx {

struct SpectrumGrid {
  double e_min = 0.0;
  double e_max = 0.0;
  std::size_t n_energies = 0;

  double energy(std::size_t i) const {
    return n_energies < 2 ? e_min : e_min + (e_max - e_min) * static_cast<double>(i) / (n_energies - 1);
  }
};

struct Spectrum {
  std::vector<std::size_t> rows;                  // KTable rows
  std::vector<double> k;
  std::vector<double> energies;
  std::vector<std::vector<double>> A;             // [k][E], unit peak per k
  std::vector<double> times;
  std::vector<std::vector<cplx>> correlation;     // <C_k(t)>, [k][t]
};

inline double hann_window(double t, double t_max) {
  const double c = std::cos(0.5 * constants::pi * t / t_max);
  return c * c;
}

// Photon autocorrelation C_k(t) = <1_k|Psi(t)> for one phonon realization,
// sampled every step.
inline std::vector<cplx> photon_autocorrelation(const SimParams& p, const KTable& table, const BrightProfile& profile,
                                                std::size_t row, RandomStream& rng) {
  auto ph = sample_phonons(p, rng);
  QuantumState st(table.size(), profile.n_layers());
  st.c[row] = 1.0;
  Propagator prop(p, table, profile);
  const long n_steps = std::lround(p.t_max / p.dt);
  std::vector<cplx> C(n_steps + 1);
  C[0] = st.c[row];
  for (long s = 1; s <= n_steps; ++s) {
    prop.advance(st, ph, 1);
    C[s] = st.c[row];
  }
  return C;
}

// A(E) = (1/pi) Re int_0^tmax e^{iEt} W(t) C(t) dt by the trapezoid rule.
inline std::vector<double> lineshape(const std::vector<cplx>& C, double dt, const std::vector<double>& energies) {
  if (C.size() < 2) throw std::invalid_argument("lineshape: need at least two samples");
  const double t_max = dt * static_cast<double>(C.size() - 1);
  std::vector<cplx> wc(C.size());
  for (std::size_t s = 0; s < C.size(); ++s) {
    const double wt = (s == 0 || s + 1 == C.size()) ? 0.5 : 1.0;
    wc[s] = wt * hann_window(dt * static_cast<double>(s), t_max) * C[s];
  }
  std::vector<double> A(energies.size());
  for (std::size_t i = 0; i < energies.size(); ++i) {
    // phase recurrence e^{iE s dt}
    const cplx step = std::polar(1.0, energies[i] * dt);
    cplx ph = 1.0, acc{};
    for (std::size_t s = 0; s < wc.size(); ++s) {
      acc += ph * wc[s];
      ph *= step;
      if ((s & 1023) == 1023) ph /= std::abs(ph);
    }
    A[i] = acc.real() * dt / constants::pi;
  }
  return A;
}

// Per-k photon autocorrelation spectrum averaged over n_traj phonon
// realizations, each k normalized to unit peak.
inline Spectrum compute_spectrum(const SimParams& p, const std::vector<std::size_t>& rows, const SpectrumGrid& grid,
                                 unsigned workers = 0) {
  if (rows.empty()) throw std::invalid_argument("spectrum: empty k list");
  if (grid.n_energies == 0 || !(grid.e_max >= grid.e_min)) throw std::invalid_argument("spectrum: bad energy grid");
  p.validate();
  if (!(p.t_max > 0.0)) throw std::invalid_argument("spectrum: t_max must be positive");
  if (std::max(std::abs(grid.e_min), std::abs(grid.e_max)) * p.dt >= constants::pi)
    throw std::invalid_argument("spectrum: energy grid exceeds the sampling limit pi/dt");
  const auto profile = bright_profile(p);
  const auto table = build_kgrid(p, profile);
  for (auto r : rows)
    if (r >= table.size()) throw std::invalid_argument("spectrum: k row out of range");
  if (!workers) workers = worker_count_from_env();

  const std::size_t K = rows.size();
  const std::size_t T = static_cast<std::size_t>(p.n_traj);
  std::vector<std::vector<cplx>> runs(K * T);
  parallel_for(K * T, workers, [&](std::size_t job) {
    const std::size_t ki = job / T, traj = job % T;
    auto rng = trajectory_stream(p.seed, traj);
    runs[job] = photon_autocorrelation(p, table, profile, rows[ki], rng);
  });

  Spectrum out;
  out.rows = rows;
  for (std::size_t i = 0; i < grid.n_energies; ++i) out.energies.push_back(grid.energy(i));
  const std::size_t n_t = runs[0].size();
  for (std::size_t s = 0; s < n_t; ++s) out.times.push_back(p.dt * static_cast<double>(s));
  for (std::size_t ki = 0; ki < K; ++ki) {
    out.k.push_back(table[rows[ki]].k);
    std::vector<cplx> mean(n_t);
    for (std::size_t traj = 0; traj < T; ++traj)
      for (std::size_t s = 0; s < n_t; ++s) mean[s] += runs[ki * T + traj][s];
    for (auto& x : mean) x /= static_cast<double>(T);
    auto A = lineshape(mean, p.dt, out.energies);
    double peak = 0.0;
    for (double v : A) peak = std::max(peak, v);
    if (peak > 0.0)
      for (double& v : A) v /= peak;
    out.A.push_back(std::move(A));
    out.correlation.push_back(std::move(mean));
  }
  return out;
}

struct Peak {
  double energy = 0.0;
  double height = 0.0;
};

// Local maxima above `threshold` (relative to the largest value), refined
// by a parabola through the three neighbouring samples; sorted by energy.
inline std::vector<Peak> find_peaks(const std::vector<double>& energies, const std::vector<double>& A,
                                    double threshold = 0.05) {
  if (energies.size() != A.size()) throw std::invalid_argument("find_peaks: size mismatch");
  std::vector<Peak> peaks;
  double top = 0.0;
  for (double v : A) top = std::max(top, v);
  for (std::size_t i = 1; i + 1 < A.size(); ++i) {
    if (!(A[i] > A[i - 1] && A[i] >= A[i + 1]) || A[i] < threshold * top) continue;
    const double denom = A[i - 1] - 2.0 * A[i] + A[i + 1];
    double shift = denom != 0.0 ? 0.5 * (A[i - 1] - A[i + 1]) / denom : 0.0;
    shift = std::clamp(shift, -0.5, 0.5);
    const double h = energies[i + 1] - energies[i];
    peaks.push_back({energies[i] + shift * h, A[i] - 0.25 * (A[i - 1] - A[i + 1]) * shift});
  }
  return peaks;
}

}  // namespace eplx
