#include <gtest/gtest.h>

#include "eplx/observables.hpp"
#include "eplx/state.hpp"
#include "oracle.hpp"

using namespace eplx;

namespace {
SimParams small(int N, int M) {
  SimParams p;
  p.n_sites = N;
  p.n_layers = M;
  p.x_c = N / 2;
  return p;
}

double variance(const std::vector<double>& v) { return sample_variance(v); }
}  // namespace

TEST(Phonons, ZeroTemperatureWidth) {
  const double w = to_atomic_units(1440.0, Unit::wavenumber);
  const auto tw = thermal_widths(w, 0.0, PhononSampling::wigner);
  EXPECT_NEAR(tw.sigma_q * tw.sigma_q, 1.0 / (2 * w), 1e-12 / w);
  EXPECT_NEAR(tw.sigma_p * tw.sigma_p, w / 2, 1e-15);
  const auto cold = thermal_widths(w, 1e-9, PhononSampling::wigner);
  EXPECT_NEAR(cold.sigma_q, tw.sigma_q, 1e-12);
}

TEST(Phonons, WidthsAt300K) {
  SimParams p;
  const auto tw = thermal_widths(p.omega_phn, p.kT, PhononSampling::wigner);
  const double coth = 1.0 / std::tanh(p.omega_phn / (2 * p.kT));
  EXPECT_NEAR(tw.sigma_q * tw.sigma_q, coth / (2 * p.omega_phn), 1e-10);
  const auto cl = thermal_widths(p.omega_phn, p.kT, PhononSampling::classical);
  EXPECT_NEAR(cl.sigma_q * cl.sigma_q, p.kT / (p.omega_phn * p.omega_phn), 1e-10);
  EXPECT_GT(tw.sigma_q, 1.5 * cl.sigma_q);
}

TEST(Phonons, RejectsNegativeTemperature) {
  auto p = small(8, 1);
  p.kT = -1e-6;
  auto rng = trajectory_stream(1, 0);
  EXPECT_THROW(sample_phonons(p, rng), std::invalid_argument);
  EXPECT_THROW(thermal_widths(1e-3, -1.0, PhononSampling::wigner), std::invalid_argument);
}

TEST(Phonons, SampleVarianceMatchesClosedForm) {
  auto p = small(50000, 2);
  auto rng = trajectory_stream(7, 0);
  const auto f = sample_phonons(p, rng);
  const auto tw = thermal_widths(p.omega_phn, p.kT, p.sampling);
  EXPECT_NEAR(variance(f.q) / (tw.sigma_q * tw.sigma_q), 1.0, 0.02);
  EXPECT_NEAR(variance(f.p) / (tw.sigma_p * tw.sigma_p), 1.0, 0.02);
}

TEST(Phonons, ConstrainedCopiesLayerOne) {
  auto p = small(64, 5);
  p.constrained_sampling = true;
  auto rng = trajectory_stream(3, 2);
  const auto f = sample_phonons(p, rng);
  for (int m = 1; m < 5; ++m)
    for (int n = 0; n < 64; ++n) {
      EXPECT_EQ(f.q[m * 64 + n], f.q[n]);
      EXPECT_EQ(f.p[m * 64 + n], f.p[n]);
    }
  p.constrain = ConstrainMode::positions;
  auto rng2 = trajectory_stream(3, 2);
  const auto g = sample_phonons(p, rng2);
  int differ = 0;
  for (int m = 1; m < 5; ++m)
    for (int n = 0; n < 64; ++n) {
      EXPECT_EQ(g.q[m * 64 + n], g.q[n]);
      differ += g.p[m * 64 + n] != g.p[n];
    }
  EXPECT_GT(differ, 200);
}

TEST(Phonons, ConstrainedPreservesLayerOneMarginal) {
  auto p = small(128, 4);
  auto r1 = trajectory_stream(11, 5);
  const auto free = sample_phonons(p, r1);
  p.constrained_sampling = true;
  auto r2 = trajectory_stream(11, 5);
  const auto cons = sample_phonons(p, r2);
  for (int n = 0; n < 128; ++n) {
    EXPECT_EQ(free.q[n], cons.q[n]);
    EXPECT_EQ(free.p[n], cons.p[n]);
  }
}

TEST(Phonons, StreamsDependOnlyOnSeedAndIndex) {
  auto a = trajectory_stream(1, 4), b = trajectory_stream(1, 4), c = trajectory_stream(1, 5),
       d = trajectory_stream(2, 4);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(Wavepacket, Normalized) {
  for (int M : {1, 4}) {
    auto p = small(4096, M);
    const auto prof = bright_profile(p);
    const auto st = prepare_wavepacket(p, build_kgrid(p, prof), prof);
    EXPECT_NEAR(st.norm2(), 1.0, 1e-12);
  }
}

TEST(Wavepacket, SingleKIsPlaneWave) {
  auto p = small(64, 2);
  const auto prof = bright_profile(p);
  const auto t = build_kgrid(p, prof);
  p.E0 = t[32].mode.omega_minus;  // k = 0
  p.dE = 1e-6;
  p.sigma_E = 1e-6;
  ASSERT_EQ(excitation_window(p, t).size(), 1u);
  const auto st = prepare_wavepacket(p, t, prof);
  const auto d = exciton_density(st);
  for (double v : d.per_site) EXPECT_NEAR(v, 1.0 / 64, 1e-14);
}

TEST(Wavepacket, EmptyWindowReportsNearestEnergy) {
  auto p = small(64, 1);
  p.E0 = to_atomic_units(1.0, Unit::eV);
  const auto prof = bright_profile(p);
  try {
    prepare_wavepacket(p, build_kgrid(p, prof), prof);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("nearest band energy"), std::string::npos);
  }
}

TEST(Wavepacket, RejectsCenterOutsideLattice) {
  auto p = small(64, 1);
  const auto prof = bright_profile(p);
  const auto t = build_kgrid(p, prof);
  p.x_c = 64;
  EXPECT_THROW(prepare_wavepacket(p, t, prof), std::invalid_argument);
}

// Small lattice whose window holds several lower-polariton states.
SimParams dense_case(int M) {
  auto p = small(24, M);
  p.a = to_atomic_units(60.0, Unit::nm);
  p.E0 = to_atomic_units(2.45, Unit::eV);
  p.dE = to_atomic_units(100.0, Unit::meV);
  p.sigma_E = p.dE;
  return p;
}

TEST(Wavepacket, EnergyInsideWindow) {
  for (int M : {1, 3}) {
    auto p = dense_case(M);
    const auto prof = bright_profile(p);
    const auto t = build_kgrid(p, prof);
    ASSERT_GE(excitation_window(p, t).size(), 3u);
    const auto psi = oracle::to_vector(prepare_wavepacket(p, t, prof));
    const double E = (psi.adjoint() * oracle::hamiltonian_ep(p) * psi)(0).real();
    EXPECT_GE(E, p.E0 - p.dE);
    EXPECT_LE(E, p.E0 + p.dE);
  }
}

TEST(Wavepacket, LiesInSelectedLowerPolaritonSubspace) {
  for (int M : {1, 3}) {
    auto p = dense_case(M);
    const auto prof = bright_profile(p);
    const auto t = build_kgrid(p, prof);
    const auto rows = excitation_window(p, t);
    const int N = p.n_sites;
    // explicit lower-polariton eigenvectors
    oracle::Mat V = oracle::Mat::Zero(N + N * M, rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto& r = t[rows[j]];
      V(rows[j], j) = r.mode.rotation[0][1];
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n)
          V(N + m * N + n, j) =
              r.mode.rotation[1][1] * prof.s[m] / std::sqrt(double(N)) * std::polar(1.0, r.k * p.a * n);
    }
    const auto H = oracle::hamiltonian_ep(p);
    for (std::size_t j = 0; j < rows.size(); ++j)
      EXPECT_NEAR((H * V.col(j) - t[rows[j]].mode.omega_minus * V.col(j)).norm(), 0.0, 1e-13);
    const auto psi = oracle::to_vector(prepare_wavepacket(p, t, prof));
    const oracle::Vec Hpsi = H * psi;
    EXPECT_LE((Hpsi - V * (V.adjoint() * Hpsi)).norm(), 1e-12);
    EXPECT_LE((psi - V * (V.adjoint() * psi)).norm(), 1e-12);
  }
}

TEST(Wavepacket, LayerCountDoesNotChangePhotonSpectrum) {
  auto p1 = small(4096, 1), p25 = small(4096, 25);
  const auto b1 = bright_profile(p1), b25 = bright_profile(p25);
  const auto s1 = prepare_wavepacket(p1, build_kgrid(p1, b1), b1);
  const auto s25 = prepare_wavepacket(p25, build_kgrid(p25, b25), b25);
  for (std::size_t i = 0; i < s1.c.size(); ++i) EXPECT_NEAR(std::abs(s1.c[i]), std::abs(s25.c[i]), 1e-12);
}

TEST(Wavepacket, CenteredAtXc) {
  for (double xc : {8192.0, 5000.0}) {
    auto p = small(16384, 1);
    p.x_c = xc;
    const auto prof = bright_profile(p);
    const auto t = build_kgrid(p, prof);
    ASSERT_GE(excitation_window(p, t).size(), 3u);
    const auto d = exciton_density(prepare_wavepacket(p, t, prof));
    // circular mean on the periodic lattice
    const double L = static_cast<double>(d.per_site.size());
    std::complex<double> z{};
    for (std::size_t n = 0; n < d.per_site.size(); ++n) z += d.per_site[n] * std::polar(1.0, 2.0 * M_PI * n / L);
    double mean = std::arg(z) * L / (2.0 * M_PI);
    if (mean < 0.0) mean += L;
    EXPECT_NEAR(mean, xc, 1.0);
  }
}

TEST(State, InnerProduct) {
  std::mt19937_64 rng(1);
  auto a = oracle::random_state(4, 2, rng), b = oracle::random_state(4, 2, rng);
  const cplx ip = inner_product(a, b);
  EXPECT_NEAR(std::abs(ip - oracle::to_vector(a).dot(oracle::to_vector(b))), 0.0, 1e-15);
  EXPECT_NEAR(inner_product(a, a).real(), a.norm2(), 1e-15);
  QuantumState c(4, 3);
  EXPECT_THROW(inner_product(a, c), std::invalid_argument);
}
