#include <gtest/gtest.h>

#include <random>

#include "chirel/electron_state.hpp"

using namespace chirel;

TEST(Profile, NormalizedAndCentered) {
  ElectronParams e;
  quad::Tolerance t{1e-11, 1e-300, 2000};
  auto fz = [&](double Z) {
    return quad::integrate_adaptive<double>([&](double Y) { return std::pow(phi_i(Y, Z, e), 2); }, -40.0, 40.0, t)
        .value;
  };
  const double n = quad::integrate_adaptive<double>(fz, e.Z0() - 20.0, e.Z0() + 20.0, t).value;
  EXPECT_NEAR(n, 1.0, 1e-9);
  EXPECT_GT(phi_i(0, e.Z0(), e), phi_i(0.1, e.Z0(), e));
}

TEST(Profile, AutoconvolutionClosedForm) {
  ElectronParams e;
  e.sigma_y = 5.0;
  quad::Tolerance t{1e-11, 1e-300, 2000};
  for (double y : {0.0, 2.0, 9.0}) {
    const double z = -37.0;
    const double num = quad::integrate_adaptive<double>(
                           [&](double Y) { return phi_i(Y, 0.5 * z, e) * phi_i(Y - y, 0.5 * z, e); }, -60.0, 60.0, t)
                           .value;
    EXPECT_NEAR(autoconvolution(y, z, e), num, 1e-10);
  }
}

TEST(Params, Validation) {
  ElectronParams e;
  EXPECT_NO_THROW(e.validate());
  EXPECT_TRUE(e.aloof());
  e.beta = 1.2;
  EXPECT_THROW(e.validate(), std::invalid_argument);
  e = {};
  e.sigma_y = 0.0;
  EXPECT_THROW(e.validate(), std::invalid_argument);
  e = {};
  e.impact_b = 5.0;
  EXPECT_FALSE(e.aloof());
}

TEST(ZAverage, WeightsSumToOne) {
  ElectronParams e;
  NumericsConfig n;
  const auto a = z_average_nodes(e, n);
  double s = a.dropped_weight;
  for (double w : a.w) s += w;
  EXPECT_NEAR(s, 1.0, 1e-13);
  EXPECT_EQ(a.dropped_weight, 0.0);
  for (double Z : a.Z) EXPECT_LT(Z, 0.0);
}

TEST(ZAverage, DropsNodesInsideFloor) {
  ElectronParams e;
  e.impact_b = 2.0;
  e.sigma_z = 3.0;
  NumericsConfig n;
  const auto a = z_average_nodes(e, n);
  EXPECT_GT(a.dropped_weight, 0.0);
  e.impact_b = 1e-3;
  e.sigma_z = 1e-4;
  EXPECT_THROW(z_average_nodes(e, n), std::invalid_argument);
}

TEST(Gamma, IdentityAtCoincidence) {
  chirel::Setup st;
  for (auto R : {std::array<double, 3>{0, 0, -9}, {1.0, -3.0, -15.0}}) {
    const auto g = gamma(R, R, st);
    EXPECT_EQ(g.value, cplx(1.0, 0.0));
  }
}

TEST(Gamma, BoundedAndHermitian) {
  chirel::Setup st;
  st.numerics.skip_phi = false;
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> uy(-10.0, 10.0), uz(-20.0, -5.0);
  for (int i = 0; i < 6; ++i) {
    const std::array<double, 3> R{0.0, uy(rng), uz(rng)}, Rp{0.0, uy(rng), uz(rng)};
    GammaOptions o;
    o.skip_phi = true;
    const auto a = gamma(R, Rp, st, o), b = gamma(Rp, R, st, o);
    EXPECT_LE(std::abs(a.value), 1.0 + 1e-10);
    EXPECT_NEAR(std::abs(a.value - std::conj(b.value)), 0.0, 1e-10);
  }
}

TEST(Gamma, AchiralMirrorSymmetric) {
  chirel::Setup st;
  st.material = st.material.achiral();
  GammaOptions o;
  o.skip_phi = true;
  const std::array<double, 3> R{0.0, 4.0, -8.0}, Rp{0.0, -1.0, -12.0};
  const std::array<double, 3> Rm{0.0, -4.0, -8.0}, Rpm{0.0, 1.0, -12.0};
  const auto a = gamma(R, Rp, st, o), b = gamma(Rm, Rpm, st, o);
  EXPECT_NEAR(std::abs(a.value - b.value), 0.0, 1e-10);
  EXPECT_EQ(asym_gamma(R, Rp, st), cplx(0.0));
}

TEST(Gamma, AsymmetryTwoRoutes) {
  chirel::Setup st;
  GammaOptions o;
  o.skip_phi = true;
  const std::array<double, 3> R{0.0, 3.0, -7.0}, Rp{0.0, -2.0, -9.0};
  const std::array<double, 3> Rm{0.0, -3.0, -7.0}, Rpm{0.0, 2.0, -9.0};
  const cplx g = gamma(R, Rp, st, o).value, gm = gamma(Rm, Rpm, st, o).value;
  const cplx ratio = 2.0 * (g - gm) / (g + gm);
  const cplx a = asym_gamma(R, Rp, st);
  EXPECT_NEAR(std::abs(a - ratio), 0.0, 1e-8 * std::max(std::abs(a), 1e-300) + 1e-14);
  EXPECT_GT(std::abs(a), 0.0);
  chirel::Setup en = st;
  en.material = st.material.enantiomer();
  EXPECT_NEAR(std::abs(asym_gamma(R, Rp, en) + a), 0.0, 1e-12 * std::abs(a));
}

TEST(Gamma, PhiEntersOnlyThePhase) {
  chirel::Setup st;
  const std::array<double, 3> R{0.0, 1.0, -8.0}, Rp{0.0, 0.0, -12.0};
  GammaOptions skip;
  skip.skip_phi = true;
  const auto a = gamma(R, Rp, st), b = gamma(R, Rp, st, skip);
  EXPECT_NEAR(std::abs(a.value), std::abs(b.value), 1e-14);
  EXPECT_NEAR(a.phase - b.phase, phase_phi(st, -8.0) - phase_phi(st, -12.0), 1e-12);
}
