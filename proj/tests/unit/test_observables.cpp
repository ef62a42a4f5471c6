#include <gtest/gtest.h>

#include "chirel/reference_oracles.hpp"

using namespace chirel;

namespace {

std::vector<double> p_grid(const ElectronParams& e, const PhysicalConstants& pc, int n = 801) {
  const double s = pc.hbar_c / e.sigma_y;
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = -10.0 * s + 20.0 * s * i / (n - 1);
  return g;
}

}  // namespace

TEST(Moments, LateralKernelRoutes) {
  chirel::Setup st;
  ElectronParams e;
  const auto m = lateral_momentum_moments(st, e);
  EXPECT_TRUE(m.converged);
  EXPECT_GT(m.variance, m.initial_variance - 1e-9);
  EXPECT_NEAR(m.peak_factor, m.mean / std::sqrt(m.variance), 1e-15);
  EXPECT_NE(m.mean, 0.0);
}

TEST(Moments, AchiralMeanVanishes) {
  chirel::Setup st;
  st.material = st.material.achiral();
  const auto m = lateral_momentum_moments(st, ElectronParams{});
  EXPECT_LE(std::abs(m.mean), 1e-12 * std::sqrt(m.variance));
}

TEST(Moments, EnantiomerNegatesMean) {
  chirel::Setup st, en;
  en.material = st.material.enantiomer();
  const auto a = lateral_momentum_moments(st, ElectronParams{});
  const auto b = lateral_momentum_moments(en, ElectronParams{});
  EXPECT_LE(std::abs(a.mean + b.mean), 1e-12 * std::abs(a.mean));
  EXPECT_LE(std::abs(a.variance - b.variance), 1e-12 * a.variance);
  const auto ea = energy_moments(st, ElectronParams{}), eb = energy_moments(en, ElectronParams{});
  EXPECT_LE(std::abs(ea.mean - eb.mean), 1e-12 * std::abs(ea.mean));
}

TEST(Moments, EnergyLossIsNegativeShift) {
  chirel::Setup st;
  for (double b : {0.3, 0.5, 0.7}) {
    ElectronParams e;
    e.beta = b;
    const auto m = energy_moments(st, e);
    EXPECT_LT(m.mean, 0.0) << b;
    EXPECT_GT(m.variance, 0.0);
  }
}

TEST(LateralDistribution, NormalizedAndMomentsAgree) {
  chirel::Setup st;
  ElectronParams e;
  const auto d = lateral_momentum_distribution(p_grid(e, st.constants), st, e);
  EXPECT_LE(std::abs(d.normalization_defect), 1e-4);
  EXPECT_GE(d.min_relative_density, -1e-9);
  const auto m = lateral_momentum_moments(st, e);
  const double m1 = oracle::distribution_moments(d, 1);
  const double v = oracle::distribution_moments(d, 2, m1);
  EXPECT_NEAR(m1, m.mean, 1e-3 * std::abs(m.mean));
  EXPECT_NEAR(v, m.variance, 1e-3 * m.variance);
}

TEST(LateralDistribution, AchiralIsEven) {
  chirel::Setup st;
  st.material = st.material.achiral();
  ElectronParams e;
  const auto d = lateral_momentum_distribution(p_grid(e, st.constants, 401), st, e);
  double peak = 0.0;
  for (double v : d.density) peak = std::max(peak, v);
  for (std::size_t i = 0; i < d.density.size(); ++i)
    EXPECT_LE(std::abs(d.density[i] - d.density[d.density.size() - 1 - i]), 1e-9 * peak);
}

TEST(LateralDistribution, RejectsNarrowGrid) {
  chirel::Setup st;
  ElectronParams e;
  EXPECT_THROW(lateral_momentum_distribution({-1.0, 0.0, 1.0}, st, e), std::invalid_argument);
}

TEST(EnergySpectrum, NormalizedWithSupportBelowInitialEnergy) {
  chirel::Setup st;
  ElectronParams e;
  const auto d = energy_spectrum(st, e);
  EXPECT_LE(std::abs(d.normalization_defect), 1e-4);
  EXPECT_DOUBLE_EQ(d.axis.back(), e.initial_energy(st.constants));
  const auto m = energy_moments(st, e);
  const double Ei = e.initial_energy(st.constants);
  const double m1 = oracle::distribution_moments(d, 1, Ei);
  const double v = oracle::distribution_moments(d, 2, Ei + m1);
  EXPECT_NEAR(m1, m.mean, 1e-3 * std::abs(m.mean));
  EXPECT_NEAR(v, m.variance, 1e-3 * m.variance);
}

TEST(EnergySpectrum, IndependentOfHandedness) {
  chirel::Setup st, en;
  en.material = st.material.enantiomer();
  ElectronParams e;
  SpectrumOptions o;
  o.step = 0.05;
  const auto a = energy_spectrum(st, e, o), b = energy_spectrum(en, e, o);
  ASSERT_EQ(a.density.size(), b.density.size());
  double peak = 0.0;
  for (double v : a.density) peak = std::max(peak, v);
  for (std::size_t i = 0; i < a.density.size(); ++i) EXPECT_LE(std::abs(a.density[i] - b.density[i]), 1e-12 * peak);
}

TEST(Eels, SumRuleAndWeakCoupling) {
  chirel::Setup st;
  ElectronParams e;
  e.impact_b = 40.0;
  const auto r = eels_weak_coupling(st, e);
  EXPECT_TRUE(r.weak_coupling);
  double I = 0.0;
  for (std::size_t i = 1; i < r.gamma.axis.size(); ++i)
    I += 0.5 * (r.gamma.axis[i] - r.gamma.axis[i - 1]) * (r.gamma.density[i] + r.gamma.density[i - 1]);
  const auto t = z_kernel_table(st, e);
  double D = 0.0;
  for (std::size_t i = 0; i < t.k.size(); ++i) D += t.nodes.w[i] * t.k[i].D0;
  EXPECT_NEAR(I, D, 1e-4 * D);
}
