#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "eplx/model.hpp"
#include "eplx/state.hpp"

namespace eplx {

struct ExcitonDensity {
  std::vector<double> per_layer;  // |b_{n,m}|^2, layout m * N + n
  std::vector<double> per_site;   // sum_m |b_{n,m}|^2 / total
  double total = 0.0;             // exciton population (the normalization)
};

inline ExcitonDensity exciton_density(const QuantumState& st) {
  const std::size_t N = st.n_sites;
  const std::size_t M = st.n_layers;
  ExcitonDensity d;
  d.per_layer.resize(N * M);
  d.per_site.assign(N, 0.0);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t n = 0; n < N; ++n) {
      const double v = std::norm(st.b[m * N + n]);
      d.per_layer[m * N + n] = v;
      d.per_site[n] += v;
    }
  for (double v : d.per_site) d.total += v;
  if (!(d.total > 0.0)) throw std::domain_error("exciton_density: no exciton population");
  for (double& v : d.per_site) v /= d.total;
  return d;
}

// a^2 (<n^2> - <n>^2) of a normalized site distribution.
inline double msd(std::span<const double> P, double a) {
  double total = 0.0;
  for (double v : P) total += v;
  if (std::abs(total - 1.0) > 1e-10) throw std::invalid_argument("msd: distribution is not normalized");
  // Centered second moment; shift by the mean first to limit cancellation.
  double mean = 0.0;
  for (std::size_t n = 0; n < P.size(); ++n) mean += static_cast<double>(n) * P[n];
  double var = 0.0;
  for (std::size_t n = 0; n < P.size(); ++n) {
    const double d = static_cast<double>(n) - mean;
    var += d * d * P[n];
  }
  return a * a * var;
}

// Least-squares slope of y over x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

struct VelocityOptions {
  double t_begin = 0.0;
  double t_end = 0.0;
  // Fit sqrt(MSD(t) - MSD(0)) instead of sqrt(MSD(t)), removing the
  // initial packet width from the displacement.
  bool subtract_initial = true;
  std::size_t min_samples = 10;
};

// Slope of the RMS displacement sqrt(MSD) over [t_begin, t_end].
inline double group_velocity(std::span<const double> times, std::span<const double> msd_series,
                             const VelocityOptions& opt) {
  if (times.size() != msd_series.size() || times.empty())
    throw std::invalid_argument("group_velocity: series size mismatch");
  if (!(opt.t_end > opt.t_begin)) throw std::invalid_argument("group_velocity: empty window");
  const double base = opt.subtract_initial ? msd_series[0] : 0.0;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < opt.t_begin - 1e-9 * std::abs(opt.t_begin) || times[i] > opt.t_end * (1 + 1e-12)) continue;
    x.push_back(times[i]);
    y.push_back(std::sqrt(std::max(0.0, msd_series[i] - base)));
  }
  if (x.size() < opt.min_samples) throw std::invalid_argument("group_velocity: too few samples in window");
  return ls_slope(x, y);
}

struct PowerLawFit {
  double prefactor = 0.0;
  double exponent = 0.0;
};

// y = alpha t^beta by linear least squares in log-log space over
// (t_begin, t_end]; non-positive points are skipped.
inline PowerLawFit power_law_fit(std::span<const double> t, std::span<const double> y, double t_begin,
                                 double t_end) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0 || t[i] < t_begin || t[i] > t_end * (1 + 1e-12) || y[i] <= 0.0) continue;
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 2) throw std::invalid_argument("power_law_fit: too few points");
  PowerLawFit fit;
  fit.exponent = ls_slope(lx, ly);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  fit.prefactor = std::exp(my / lx.size() - fit.exponent * mx / lx.size());
  return fit;
}

// Tr[rho^2] of rho = (1/T) sum_i |Psi_i><Psi_i| via the Gram identity
//   Tr[rho^2] = (1/T^2) sum_{ij} |<Psi_i|Psi_j>|^2.
inline double purity_gram(std::span<const QuantumState* const> states) {
  const std::size_t T = states.size();
  if (T == 0) throw std::invalid_argument("purity_gram: no states");
  for (const auto* s : states)
    if (s->c.size() != states[0]->c.size() || s->b.size() != states[0]->b.size())
      throw std::invalid_argument("purity_gram: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < T; ++i) {
    sum += std::pow(states[i]->norm2(), 2);
    for (std::size_t j = i + 1; j < T; ++j) sum += 2.0 * std::norm(inner_product(*states[i], *states[j]));
  }
  return sum / (static_cast<double>(T) * static_cast<double>(T));
}

inline double purity_gram(std::span<const QuantumState> states) {
  std::vector<const QuantumState*> ptrs;
  ptrs.reserve(states.size());
  for (const auto& s : states) ptrs.push_back(&s);
  return purity_gram(std::span<const QuantumState* const>(ptrs));
}

struct PurityParts {
  double total = 0.0;
  double ep = 0.0;      // Tr[rho_EP^2]
  double ground = 0.0;  // rho_gg^2
};

// Purity of the full density matrix including the ground state fed by loss.
inline PurityParts total_purity(std::span<const QuantumState* const> states) {
  PurityParts parts;
  parts.ep = purity_gram(states);
  double rho_gg = 0.0;
  for (const auto* s : states) rho_gg += 1.0 - s->norm2();
  rho_gg /= static_cast<double>(states.size());
  parts.ground = rho_gg * rho_gg;
  parts.total = parts.ep + parts.ground;
  return parts;
}

inline PurityParts total_purity(std::span<const QuantumState> states) {
  std::vector<const QuantumState*> ptrs;
  for (const auto& s : states) ptrs.push_back(&s);
  return total_purity(std::span<const QuantumState* const>(ptrs));
}

// Freedman-Diaconis bin count, at least one bin.
inline std::size_t freedman_diaconis_bins(std::vector<double> values) {
  if (values.size() < 2) return 1;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double f) {
    const double pos = f * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double range = values.back() - values.front();
  if (!(iqr > 0.0) || !(range > 0.0)) return 1;
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(values.size()));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(range / width)));
}

struct OnsiteEnergyStats {
  std::vector<double> single;      // eps0 + gamma q_{n,1}
  std::vector<double> collective;  // eps0 + gamma q~_n
  Histogram single_hist;
  Histogram collective_hist;
};

inline double sample_variance(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

// Closed-form Var(q~)/Var(q) for i.i.d. layers: sum_m sin^4 / S^2.
inline double synchronization_ratio(const BrightProfile& profile) {
  double s4 = 0.0;
  for (double w : profile.sin_weights) s4 += w * w * w * w;
  return s4 / (profile.S * profile.S);
}

// Site energies seen by a single layer vs. the collective bright layer,
// q~_n = (1/S) sum_m q_{n,m} sin^2(k_y y_m). n_bins = 0 selects
// Freedman-Diaconis; both histograms share one range.
inline OnsiteEnergyStats onsite_energy_hist(std::span<const PhononField> samples, const BrightProfile& profile,
                                            double gamma, double eps0, std::size_t n_bins = 0) {
  OnsiteEnergyStats out;
  for (const auto& f : samples) {
    if (f.n_layers != profile.n_layers()) throw std::invalid_argument("onsite_energy_hist: layer count mismatch");
    for (std::size_t n = 0; n < f.n_sites; ++n) {
      out.single.push_back(eps0 + gamma * f.q[n]);
      double qt = 0.0;
      for (std::size_t m = 0; m < f.n_layers; ++m)
        qt += f.q[m * f.n_sites + n] * profile.sin_weights[m] * profile.sin_weights[m];
      out.collective.push_back(eps0 + gamma * qt / profile.S);
    }
  }
  if (out.single.empty()) throw std::invalid_argument("onsite_energy_hist: no samples");
  const std::size_t bins = n_bins ? n_bins : freedman_diaconis_bins(out.single);
  auto [lo, hi] = std::minmax_element(out.single.begin(), out.single.end());
  out.single_hist = make_histogram(out.single, bins, *lo, *hi);
  out.collective_hist = make_histogram(out.collective, bins, *lo, *hi);
  return out;
}

}  // namespace eplx
