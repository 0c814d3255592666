#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "eplx/fft.hpp"
#include "eplx/model.hpp"
#include "eplx/params.hpp"
#include "eplx/state.hpp"

namespace eplx {

// Per-trajectory propagation workspace for one time step dt.
//
// One step is the symmetric splitting
//   env(dt/2, q(t)) . EP(dt) . env(dt/2, q(t+dt))
// where EP is applied exactly in the polariton/dark basis (per-layer FFT,
// bright projection, 2x2 rotation) and env is diagonal in the site basis
// (phonon phase on excitons, loss on photons). The phonons follow velocity
// Verlet on the Ehrenfest force.
class Propagator {
 public:
  Propagator(const SimParams& params, const KTable& table, const BrightProfile& profile)
      : N_(table.size()),
        M_(profile.n_layers()),
        gamma_(params.gamma()),
        omega2_(params.omega_phn * params.omega_phn),
        t_c_(params.t_c),
        renormalize_forces_(params.renormalize_forces),
        s_(profile.s),
        fft_(table.size(), profile.n_layers()),
        bright_(table.size()),
        delta_(table.size()),
        force_(table.size() * profile.n_layers()) {
    if (static_cast<std::size_t>(params.n_sites) != N_ || static_cast<std::size_t>(params.n_layers) != M_)
      throw std::invalid_argument("Propagator: params/table/profile shape mismatch");
    row_of_bin_.resize(N_);
    sin_.resize(N_);
    cos_.resize(N_);
    omega_plus_.resize(N_);
    omega_minus_.resize(N_);
    eps_.resize(N_);
    omega_k_.resize(N_);
    coupling_.resize(N_);
    for (std::size_t i = 0; i < N_; ++i) {
      const std::size_t bin = table.fft_bin(i);
      row_of_bin_[bin] = i;
      sin_[bin] = std::sin(table[i].mode.theta);
      cos_[bin] = std::cos(table[i].mode.theta);
      omega_plus_[bin] = table[i].mode.omega_plus;
      omega_minus_[bin] = table[i].mode.omega_minus;
      eps_[bin] = table[i].eps_k;
      omega_k_[bin] = table[i].omega_k;
      coupling_[bin] = table[i].coupling;
    }
    set_dt(params.dt);
  }

  std::size_t n_sites() const { return N_; }
  // Frozen phonons keep q, p fixed; only the static site energies act.
  void set_frozen_phonons(bool frozen) { frozen_ = frozen; }
  bool frozen_phonons() const { return frozen_; }
  std::size_t n_layers() const { return M_; }
  double dt() const { return dt_; }

  void set_dt(double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("Propagator: dt must be positive");
    if (dt == dt_) return;
    dt_ = dt;
    phase_plus_.resize(N_);
    phase_minus_.resize(N_);
    phase_dark_.resize(N_);
    for (std::size_t j = 0; j < N_; ++j) {
      phase_plus_[j] = std::polar(1.0, -omega_plus_[j] * dt);
      phase_minus_[j] = std::polar(1.0, -omega_minus_[j] * dt);
      phase_dark_[j] = std::polar(1.0, -eps_[j] * dt);
    }
  }

  // Per-half-step photon amplitude decay from the non-Hermitian loss term.
  double loss_factor(double h) const { return std::isfinite(t_c_) ? std::exp(-h / (2.0 * t_c_)) : 1.0; }

  // b <- b exp(-i gamma q h);  c <- c exp(-h / (2 t_c)).
  void apply_env(QuantumState& st, const PhononField& ph, double h) const {
    check_shape(st, ph);
    const double g = gamma_ * h;
    if (g != 0.0)
      for (std::size_t i = 0; i < st.b.size(); ++i) st.b[i] *= std::polar(1.0, -g * ph.q[i]);
    const double f = loss_factor(h);
    if (f != 1.0)
      for (auto& x : st.c) x *= f;
  }

  // exp(-i H_EP dt), exact up to roundoff.
  void apply_ep(QuantumState& st) {
    check_shape(st);
    fft_.forward_unscaled(st.b);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(N_));
    const double inv_n = 1.0 / static_cast<double>(N_);

    std::fill(bright_.begin(), bright_.end(), cplx{});
    for (std::size_t m = 0; m < M_; ++m) {
      const double sm = s_[m];
      const cplx* bm = st.b.data() + m * N_;
      for (std::size_t j = 0; j < N_; ++j) bright_[j] += sm * bm[j];
    }
    for (std::size_t j = 0; j < N_; ++j) {
      const std::size_t row = row_of_bin_[j];
      const cplx B = bright_[j] * inv_sqrt_n;
      const cplx c = st.c[row];
      const double s = sin_[j];
      const double co = cos_[j];
      const cplx up = (s * c + co * B) * phase_plus_[j];
      const cplx lo = (co * c - s * B) * phase_minus_[j];
      st.c[row] = s * up + co * lo;
      const cplx B_new = co * up - s * lo;
      // b_m <- phase_dark * b_m + s_m (B_new - phase_dark * B), in FFT scaling
      delta_[j] = (B_new - phase_dark_[j] * B) * inv_sqrt_n;
    }
    for (std::size_t m = 0; m < M_; ++m) {
      const double sm = s_[m];
      cplx* bm = st.b.data() + m * N_;
      for (std::size_t j = 0; j < N_; ++j) bm[j] = (phase_dark_[j] * inv_n) * bm[j] + sm * delta_[j];
    }
    fft_.backward_unscaled(st.b);
  }

  // F = -omega^2 q - gamma |b|^2 (optionally |b|^2 / <Psi|Psi>).
  void forces(const QuantumState& st, const PhononField& ph, std::span<double> out) const {
    check_shape(st, ph);
    if (out.size() != ph.q.size()) throw std::invalid_argument("forces: output size mismatch");
    const double w = population_weight(st);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -omega2_ * ph.q[i] - w * std::norm(st.b[i]);
  }

  std::vector<double> forces(const QuantumState& st, const PhononField& ph) const {
    std::vector<double> f(ph.q.size());
    forces(st, ph, f);
    return f;
  }

  // One full step of the coupled quantum-classical dynamics.
  void step(QuantumState& st, PhononField& ph) { advance(st, ph, 1); }

  // n_steps consecutive steps. Adjacent env half-steps share q and are
  // fused into one full env step.
  void advance(QuantumState& st, PhononField& ph, long n_steps) {
    check_shape(st, ph);
    if (n_steps <= 0) return;
    forces(st, ph, force_);
    apply_env(st, ph, 0.5 * dt_);
    const double half = 0.5 * dt_;
    const double full_loss = loss_factor(dt_);
    const double half_loss = loss_factor(half);
    for (long s = 0; s < n_steps; ++s) {
      apply_ep(st);
      const bool last = s + 1 == n_steps;
      const double h = last ? half : dt_;
      const double w = population_weight(st);
      const double g = gamma_ * h;
      double* q = ph.q.data();
      double* p = ph.p.data();
      double* F = force_.data();
      cplx* b = st.b.data();
      const std::size_t n = ph.q.size();
      if (frozen_) {
        if (g != 0.0)
          for (std::size_t i = 0; i < n; ++i) b[i] *= std::polar(1.0, -g * q[i]);
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          p[i] += half * F[i];
          q[i] += dt_ * p[i];
          const double pop = std::norm(b[i]);
          F[i] = -omega2_ * q[i] - w * pop;
          p[i] += half * F[i];
          if (g != 0.0) b[i] *= std::polar(1.0, -g * q[i]);
        }
      }
      const double f = last ? half_loss : full_loss;
      if (f != 1.0)
        for (auto& x : st.c) x *= f;
    }
  }

  // Single step with an explicit dt (re-tabulates phases if it changed).
  void step(QuantumState& st, PhononField& ph, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    set_dt(dt);
    advance(st, ph, 1);
  }

  // <Psi|H_EP|Psi> evaluated in the k basis.
  double ep_energy(const QuantumState& st) const {
    check_shape(st);
    std::vector<cplx> bk = st.b;
    fft_.forward(bk);
    double e = 0.0;
    for (std::size_t j = 0; j < N_; ++j) {
      const std::size_t row = row_of_bin_[j];
      cplx B{};
      double exc = 0.0;
      for (std::size_t m = 0; m < M_; ++m) {
        B += s_[m] * bk[m * N_ + j];
        exc += std::norm(bk[m * N_ + j]);
      }
      const cplx c = st.c[row];
      e += omega_k_[j] * std::norm(c) + eps_[j] * exc + 2.0 * coupling_[j] * std::real(std::conj(c) * B);
    }
    return e;
  }

  // E_EP + sum gamma q |b|^2 + sum (p^2/2 + omega^2 q^2/2).
  double total_energy(const QuantumState& st, const PhononField& ph) const {
    double e = ep_energy(st);
    for (std::size_t i = 0; i < ph.q.size(); ++i)
      e += gamma_ * ph.q[i] * std::norm(st.b[i]) + 0.5 * ph.p[i] * ph.p[i] + 0.5 * omega2_ * ph.q[i] * ph.q[i];
    return e;
  }

 private:
  double population_weight(const QuantumState& st) const {
    if (!renormalize_forces_) return gamma_;
    const double n2 = st.norm2();
    return n2 > 0.0 ? gamma_ / n2 : 0.0;
  }

  void check_shape(const QuantumState& st) const {
    if (st.c.size() != N_ || st.b.size() != N_ * M_) throw std::invalid_argument("Propagator: state shape mismatch");
  }
  void check_shape(const QuantumState& st, const PhononField& ph) const {
    check_shape(st);
    if (ph.q.size() != N_ * M_ || ph.p.size() != N_ * M_)
      throw std::invalid_argument("Propagator: phonon shape mismatch");
  }

  std::size_t N_;
  std::size_t M_;
  double gamma_;
  double omega2_;
  double t_c_;
  bool renormalize_forces_;
  bool frozen_ = false;
  double dt_ = 0.0;
  std::vector<double> s_;
  std::vector<std::size_t> row_of_bin_;
  std::vector<double> sin_, cos_, omega_plus_, omega_minus_, eps_, omega_k_, coupling_;
  std::vector<cplx> phase_plus_, phase_minus_, phase_dark_;
  BatchedFft fft_;
  std::vector<cplx> bright_;
  std::vector<cplx> delta_;
  std::vector<double> force_;
};

}  // namespace eplx
