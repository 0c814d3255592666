#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "eplx/params.hpp"

namespace eplx {

// Layer geometry and the normalized bright-layer weights s_m.
struct BrightProfile {
  double k_y = 0.0;
  std::vector<double> layer_positions;  // y_m, bohr
  std::vector<double> sin_weights;      // sin(k_y y_m)
  std::vector<double> s;                // sin(k_y y_m) / sqrt(S)
  double S = 0.0;

  std::size_t n_layers() const { return s.size(); }
};

inline BrightProfile bright_profile(const SimParams& p) {
  const int M = p.n_layers;
  if ((M - 1) * p.a_z >= p.L) throw std::invalid_argument("bright_profile: layers do not fit inside the cavity");
  BrightProfile b;
  b.k_y = constants::pi / p.L;
  b.layer_positions.resize(M);
  b.sin_weights.resize(M);
  b.s.resize(M);
  for (int m = 0; m < M; ++m) {
    const double y = 0.5 * p.L + (m + 1 - 0.5 * (M + 1)) * p.a_z;
    if (!(y > 0.0 && y < p.L)) throw std::invalid_argument("bright_profile: layer outside (0, L)");
    b.layer_positions[m] = y;
    b.sin_weights[m] = std::sin(b.k_y * y);
    b.S += b.sin_weights[m] * b.sin_weights[m];
  }
  if (!(b.S > 0.0)) throw std::invalid_argument("bright_profile: all layers sit on cavity nodes");
  const double inv = 1.0 / std::sqrt(b.S);
  for (int m = 0; m < M; ++m) b.s[m] = b.sin_weights[m] * inv;
  return b;
}

// Diagonalized photon/bright-exciton block at one k. Rotation columns are
// the polariton vectors in the (photon, bright) basis:
//   P+ = (sin theta, cos theta),  P- = (cos theta, -sin theta).
struct PolaritonMode {
  double theta = 0.0;
  double omega_plus = 0.0;
  double omega_minus = 0.0;
  // rotation[row][col], col 0 = P+, col 1 = P-
  std::array<std::array<double, 2>, 2> rotation{};
};

// `coupling` is the full bright-photon matrix element sqrt(S) * Omega_k.
inline PolaritonMode polariton_eigensystem(double omega_k, double eps_k, double coupling) {
  if (!(coupling >= 0.0)) throw std::invalid_argument("polariton_eigensystem: negative coupling");
  PolaritonMode mode;
  // tan(2 theta) = 2 g / (eps - omega) keeps P+/P- eigenvectors for g > 0
  mode.theta = 0.5 * std::atan2(2.0 * coupling, eps_k - omega_k);
  const double mean = 0.5 * (omega_k + eps_k);
  const double half_split = 0.5 * std::hypot(eps_k - omega_k, 2.0 * coupling);
  mode.omega_plus = mean + half_split;
  mode.omega_minus = mean - half_split;
  const double s = std::sin(mode.theta);
  const double c = std::cos(mode.theta);
  mode.rotation = {{{s, c}, {c, -s}}};
  return mode;
}

struct KRow {
  int n = 0;  // grid integer, k = 2 pi n / (N a)
  double k = 0.0;
  double omega_k = 0.0;
  double eps_k = 0.0;
  double Omega_k_eff = 0.0;  // per-layer coupling
  double coupling = 0.0;     // sqrt(S) * Omega_k_eff
  PolaritonMode mode;
};

// Rows ordered by n = -N/2 ... N/2 - 1.
struct KTable {
  std::vector<KRow> rows;
  double S = 1.0;
  double a = 0.0;

  std::size_t size() const { return rows.size(); }
  const KRow& operator[](std::size_t i) const { return rows[i]; }
  // Position of grid row i in an unshifted DFT output.
  std::size_t fft_bin(std::size_t i) const {
    const auto N = rows.size();
    return (i + N / 2) % N;
  }
  // Row whose k is closest to the given wavevector.
  std::size_t nearest(double k) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (std::abs(rows[i].k - k) < std::abs(rows[best].k - k)) best = i;
    return best;
  }
};

inline double photon_frequency(const SimParams& p, double k) {
  const double k_y = constants::pi / p.L;
  return constants::speed_of_light / p.eta * std::hypot(k_y, k);
}

inline double exciton_band(const SimParams& p, double k) { return p.eps0 - 2.0 * p.tau * std::cos(k * p.a); }

inline KTable build_kgrid(const SimParams& p, const BrightProfile& profile) {
  const int N = p.n_sites;
  KTable t;
  t.S = profile.S;
  t.a = p.a;
  t.rows.resize(N);
  const double omega_ref = photon_frequency(p, 0.0);
  const double sqrtS = std::sqrt(profile.S);
  for (int i = 0; i < N; ++i) {
    KRow& r = t.rows[i];
    r.n = i - N / 2;
    r.k = 2.0 * constants::pi * r.n / (N * p.a);
    r.omega_k = photon_frequency(p, r.k);
    r.eps_k = exciton_band(p, r.k);
    const double omega_k_bare = std::sqrt(omega_ref / r.omega_k) * p.omega0_coupling;
    r.Omega_k_eff = p.coupling_mode == CouplingMode::fixed_total ? omega_k_bare / sqrtS : omega_k_bare;
    r.coupling = sqrtS * r.Omega_k_eff;
    r.mode = polariton_eigensystem(r.omega_k, r.eps_k, r.coupling);
  }
  return t;
}

inline KTable build_kgrid(const SimParams& p) { return build_kgrid(p, bright_profile(p)); }

struct Histogram {
  std::vector<double> edges;   // size n_bins + 1
  std::vector<double> counts;  // size n_bins

  std::size_t n_bins() const { return counts.size(); }
  double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
  double total() const {
    double s = 0.0;
    for (double c : counts) s += c;
    return s;
  }
};

// Equal-width histogram over [lo, hi]; values outside are clamped to the
// end bins.
inline Histogram make_histogram(const std::vector<double>& values, std::size_t n_bins, double lo, double hi) {
  if (n_bins == 0) throw std::invalid_argument("histogram: n_bins must be >= 1");
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(n_bins + 1);
  h.counts.assign(n_bins, 0.0);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i <= n_bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  for (double v : values) {
    auto bin = static_cast<long long>(std::floor((v - lo) / width));
    bin = std::clamp<long long>(bin, 0, static_cast<long long>(n_bins) - 1);
    h.counts[static_cast<std::size_t>(bin)] += 1.0;
  }
  return h;
}

inline Histogram make_histogram(const std::vector<double>& values, std::size_t n_bins) {
  if (values.empty()) throw std::invalid_argument("histogram: no values");
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return make_histogram(values, n_bins, *lo, *hi);
}

// All single-excitation eigenvalues of H_EP: two polariton branches per k
// plus (M - 1) degenerate dark states at eps_k.
inline std::vector<double> ep_eigenvalues(const SimParams& p, const KTable& table) {
  std::vector<double> values;
  values.reserve(table.size() * static_cast<std::size_t>(p.n_layers + 1));
  for (const auto& r : table.rows) {
    values.push_back(r.mode.omega_plus);
    values.push_back(r.mode.omega_minus);
    for (int d = 0; d + 1 < p.n_layers; ++d) values.push_back(r.eps_k);
  }
  return values;
}

inline Histogram dos(const SimParams& p, std::size_t n_bins) {
  if (n_bins == 0) throw std::invalid_argument("dos: n_bins must be >= 1");
  return make_histogram(ep_eigenvalues(p, build_kgrid(p)), n_bins);
}

// d omega_-/dk by centered differences along the grid; one-sided at the ends.
inline std::vector<double> theoretical_group_velocity(const KTable& table) {
  const std::size_t N = table.size();
  std::vector<double> v(N, 0.0);
  if (N < 2) return v;
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == N ? N - 1 : i + 1;
    v[i] = (table[hi].mode.omega_minus - table[lo].mode.omega_minus) / (table[hi].k - table[lo].k);
  }
  return v;
}

}  // namespace eplx
