#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "eplx/fft.hpp"
#include "eplx/model.hpp"
#include "eplx/params.hpp"

namespace eplx {

using cplx = std::complex<double>;

// Single-excitation amplitudes. Photon amplitudes follow KTable row order
// (n = -N/2 ... N/2-1); exciton amplitudes are site-space, b[m * N + n].
struct QuantumState {
  std::size_t n_sites = 0;
  std::size_t n_layers = 0;
  std::vector<cplx> c;
  std::vector<cplx> b;

  QuantumState() = default;
  QuantumState(std::size_t N, std::size_t M) : n_sites(N), n_layers(M), c(N), b(N * M) {}

  cplx& exciton(std::size_t n, std::size_t m) { return b[m * n_sites + n]; }
  const cplx& exciton(std::size_t n, std::size_t m) const { return b[m * n_sites + n]; }

  std::size_t dimension() const { return c.size() + b.size(); }

  double photon_population() const {
    double s = 0.0;
    for (const auto& x : c) s += std::norm(x);
    return s;
  }
  double exciton_population() const {
    double s = 0.0;
    for (const auto& x : b) s += std::norm(x);
    return s;
  }
  double norm2() const { return photon_population() + exciton_population(); }
};

// <lhs|rhs> over the full photon + exciton space.
inline cplx inner_product(const QuantumState& lhs, const QuantumState& rhs) {
  if (lhs.c.size() != rhs.c.size() || lhs.b.size() != rhs.b.size())
    throw std::invalid_argument("inner_product: dimension mismatch");
  cplx s{};
  for (std::size_t i = 0; i < lhs.c.size(); ++i) s += std::conj(lhs.c[i]) * rhs.c[i];
  for (std::size_t i = 0; i < lhs.b.size(); ++i) s += std::conj(lhs.b[i]) * rhs.b[i];
  return s;
}

// Classical phonon coordinates, same layout as QuantumState::b.
struct PhononField {
  std::size_t n_sites = 0;
  std::size_t n_layers = 0;
  std::vector<double> q;
  std::vector<double> p;

  PhononField() = default;
  PhononField(std::size_t N, std::size_t M) : n_sites(N), n_layers(M), q(N * M, 0.0), p(N * M, 0.0) {}
};

using RandomStream = std::mt19937_64;

// Independent stream per trajectory derived only from (seed, index), so a
// trajectory's numbers do not depend on scheduling.
inline RandomStream trajectory_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x45504c58u};
  return RandomStream(seq);
}

struct ThermalWidths {
  double sigma_q = 0.0;
  double sigma_p = 0.0;
};

inline ThermalWidths thermal_widths(double omega, double kT, PhononSampling sampling) {
  if (!(kT >= 0.0)) throw std::invalid_argument("thermal_widths: negative temperature");
  if (!(omega > 0.0)) throw std::invalid_argument("thermal_widths: non-positive frequency");
  ThermalWidths w;
  if (sampling == PhononSampling::classical) {
    w.sigma_q = std::sqrt(kT) / omega;
    w.sigma_p = std::sqrt(kT);
    return w;
  }
  const double coth = kT == 0.0 ? 1.0 : 1.0 / std::tanh(0.5 * omega / kT);
  w.sigma_q = std::sqrt(coth / (2.0 * omega));
  w.sigma_p = std::sqrt(0.5 * omega * coth);
  return w;
}

// Draw order: layer 0 (q, p per site) first, then the remaining layers, so
// the layer-0 marginals do not depend on the constraint mode.
inline PhononField sample_phonons(const SimParams& params, RandomStream& rng) {
  if (!(params.kT >= 0.0)) throw std::invalid_argument("sample_phonons: negative temperature");
  const std::size_t N = params.n_sites;
  const std::size_t M = params.n_layers;
  const auto w = thermal_widths(params.omega_phn, params.kT, params.sampling);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PhononField f(N, M);
  for (std::size_t n = 0; n < N; ++n) {
    f.q[n] = w.sigma_q * gauss(rng);
    f.p[n] = w.sigma_p * gauss(rng);
  }
  const bool copy_q = params.constrained_sampling;
  const bool copy_p = params.constrained_sampling && params.constrain == ConstrainMode::full;
  for (std::size_t m = 1; m < M; ++m) {
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t i = m * N + n;
      if (copy_q) {
        f.q[i] = f.q[n];
      } else {
        f.q[i] = w.sigma_q * gauss(rng);
      }
      if (copy_p) {
        f.p[i] = f.p[n];
      } else {
        f.p[i] = w.sigma_p * gauss(rng);
      }
    }
  }
  return f;
}

// Rows of the lower-polariton band inside [E0 - dE, E0 + dE].
inline std::vector<std::size_t> excitation_window(const SimParams& params, const KTable& table) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < table.size(); ++i)
    if (std::abs(table[i].mode.omega_minus - params.E0) <= params.dE) rows.push_back(i);
  return rows;
}

// Builds a state from polariton-basis amplitudes per KTable row:
// alpha_plus[i], alpha_minus[i] (either span may be empty).
inline QuantumState assemble_from_polaritons(const KTable& table, const BrightProfile& profile,
                                             const std::vector<cplx>& alpha_plus,
                                             const std::vector<cplx>& alpha_minus) {
  const std::size_t N = table.size();
  const std::size_t M = profile.n_layers();
  QuantumState st(N, M);
  for (std::size_t i = 0; i < N; ++i) {
    const auto& R = table[i].mode.rotation;
    const cplx ap = alpha_plus.empty() ? cplx{} : alpha_plus[i];
    const cplx am = alpha_minus.empty() ? cplx{} : alpha_minus[i];
    st.c[i] = R[0][0] * ap + R[0][1] * am;
    const cplx bright = R[1][0] * ap + R[1][1] * am;
    const std::size_t bin = table.fft_bin(i);
    for (std::size_t m = 0; m < M; ++m) st.b[m * N + bin] = profile.s[m] * bright;
  }
  BatchedFft fft(N, M);
  fft.backward(st.b);
  return st;
}

// Lower-polariton wavepacket: Gaussian energy envelope inside the window,
// linear phase e^{-i k x_c} placing the packet at site x_c.
inline QuantumState prepare_wavepacket(const SimParams& params, const KTable& table, const BrightProfile& profile) {
  if (!(params.x_c >= 0.0 && params.x_c < static_cast<double>(table.size())))
    throw std::invalid_argument("prepare_wavepacket: x_c outside the lattice");
  const auto rows = excitation_window(params, table);
  if (rows.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.size(); ++i)
      if (std::abs(table[i].mode.omega_minus - params.E0) < std::abs(table[best].mode.omega_minus - params.E0))
        best = i;
    std::ostringstream msg;
    msg.precision(6);
    msg << "prepare_wavepacket: no lower-polariton state within " << from_atomic_units(params.dE, Unit::meV)
        << " meV of E0 = " << from_atomic_units(params.E0, Unit::eV) << " eV; nearest band energy is "
        << from_atomic_units(table[best].mode.omega_minus, Unit::eV) << " eV (k = " << table[best].k << ")";
    throw std::invalid_argument(msg.str());
  }
  const double x0 = params.x_c * params.a;
  std::vector<cplx> alpha(table.size());
  double norm2 = 0.0;
  for (auto i : rows) {
    const double detune = table[i].mode.omega_minus - params.E0;
    const double w = std::exp(-detune * detune / (2.0 * params.sigma_E * params.sigma_E));
    alpha[i] = std::polar(w, -table[i].k * x0);
    norm2 += w * w;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : alpha) x *= inv;
  return assemble_from_polaritons(table, profile, {}, alpha);
}

}  // namespace eplx
