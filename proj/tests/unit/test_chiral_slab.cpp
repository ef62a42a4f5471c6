#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "chirel/chiral_slab.hpp"
#include "chirel/reference_oracles.hpp"

using namespace chirel;

namespace {

MaterialModel lossy() {
  MaterialModel m;
  m.eps_background = 2.5;
  m.oscillators = {{3.0, 1.2, 0.4}};
  m.chiral_oscillators = {{3.0, 2e-3, 0.4}};
  return m;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Wavenumbers, TrivialExamples) {
  MaterialModel m = default_material();
  Geometry g;
  const double E = 2.0, kw = E / PhysicalConstants{}.hbar_c;
  EXPECT_NEAR(rel(wavenumbers(E, 0.0, m, g).k1z, kw), 0.0, 1e-14);
  const auto w = wavenumbers(E, kw / 0.5, m, g);
  EXPECT_NEAR(rel(w.k1z, cplx(0.0, kw * std::sqrt(3.0))), 0.0, 1e-13);
}

TEST(Wavenumbers, BranchAndIndexInvariants) {
  const MaterialModel m = lossy();
  Geometry g;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uE(0.1, 15.0), uk(0.0, 0.3);
  for (int i = 0; i < 500; ++i) {
    const double E = uE(rng), k = uk(rng);
    const auto w = wavenumbers(E, k, m, g);
    for (cplx v : {w.k1z, w.k2z, w.Kz_plus, w.Kz_minus}) EXPECT_GE(v.imag(), 0.0);
    const cplx eps = permittivity(m, E);
    EXPECT_LT(rel(w.n_chiral * w.n_chiral, eps), 1e-12);
    const auto we = wavenumbers(E, k, m.enantiomer(), g);
    EXPECT_LT(rel(we.Kz_plus, w.Kz_plus), 1e-14);
    EXPECT_LT(rel(we.Kz_minus, w.Kz_minus), 1e-14);
    EXPECT_LT(rel(we.n_chiral, -w.n_chiral), 1e-14);
  }
}

TEST(Wavenumbers, RejectsBadInput) {
  Geometry g;
  EXPECT_THROW(wavenumbers(0.0, 0.01, default_material(), g), std::invalid_argument);
  EXPECT_THROW(wavenumbers(1.0, -0.01, default_material(), g), std::invalid_argument);
}

TEST(LayerMatrices, ZeroThickness) {
  Geometry g;
  g.d = 0.0;
  const MaterialModel m = lossy();
  const double E = 2.0, k = 0.004;
  const auto w = wavenumbers(E, k, m, g);
  const auto lm = layer_matrices(E, k, m, g);
  const double e1 = g.env.eps1, e2 = g.env.eps2;
  EXPECT_LT(rel(lm.M1[0], 1.0), 1e-14);
  EXPECT_EQ(std::abs(lm.M1[1]), 0.0);
  EXPECT_EQ(std::abs(lm.M1[2]), 0.0);
  EXPECT_LT(rel(lm.M1[3], w.k1z * e2 / (w.k2z * e1)), 1e-13);
  EXPECT_LT(rel(lm.M2[0], w.k2z / w.k1z), 1e-13);
  EXPECT_EQ(std::abs(lm.M2[1]), 0.0);
  EXPECT_EQ(std::abs(lm.M2[2]), 0.0);
  EXPECT_LT(rel(lm.M2[3], 1.0), 1e-14);
}

TEST(LayerMatrices, AchiralOffDiagonalsVanish) {
  Geometry g;
  const MaterialModel m = lossy().achiral();
  for (double k : {0.0, 0.005, 0.05, 0.2}) {
    const auto lm = layer_matrices(3.1, k, m, g);
    EXPECT_EQ(std::abs(lm.M1[1]) + std::abs(lm.M1[2]) + std::abs(lm.M2[1]) + std::abs(lm.M2[2]), 0.0);
  }
}

TEST(LayerMatrices, MatchTranscription) {
  Geometry g;
  chirel::Setup st;
  st.material = lossy();
  st.geometry = g;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uE(0.2, 12.0), uk(0.0, 0.08);
  for (int i = 0; i < 200; ++i) {
    const double E = uE(rng), k = uk(rng);
    const auto lm = layer_matrices(E, k, st.material, g);
    const auto o = oracle::matrices(oracle::optics(st, E), k * k);
    double big = 0.0;
    for (int j = 0; j < 4; ++j) big = std::max({big, std::abs(o.M1[j]), std::abs(o.M2[j])});
    for (int j = 0; j < 4; ++j) {
      EXPECT_LT(std::abs(lm.M1[j] - o.M1[j]), 1e-11 * big);
      EXPECT_LT(std::abs(lm.M2[j] - o.M2[j]), 1e-11 * big);
    }
  }
}

TEST(LayerMatrices, ThinFilmUsesSeries) {
  Geometry g;
  g.d = 1e-14;
  const auto lm = layer_matrices(2.0, 0.01, lossy(), g);
  EXPECT_TRUE(lm.series_used);
  for (cplx v : lm.M1) EXPECT_TRUE(is_finite(v));
}

TEST(Reflection, FresnelLimit) {
  Geometry g;
  g.d = 0.0;
  const MaterialModel m = lossy();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uE(0.1, 15.0), uf(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double E = uE(rng), kw = E / PhysicalConstants{}.hbar_c;
    const double k = uf(rng) * kw;  // above 1 and above sqrt(eps2): evanescent
    const auto R = reflection_matrix(E, k, m, g);
    const auto F = fresnel_two_media(E, k, g.env.eps1, g.env.eps2);
    EXPECT_LT(rel(R.R_SS, F.R_SS), 1e-12);
    EXPECT_LT(rel(R.R_PP, F.R_PP), 1e-12);
    EXPECT_EQ(std::abs(R.R_SP) + std::abs(R.R_PS), 0.0);
  }
}

TEST(Reflection, AchiralMixingIsExactlyZero) {
  Geometry g;
  const MaterialModel m = lossy().achiral();
  for (double k : {0.0, 0.01, 0.05})
    for (double E : {0.5, 3.0, 9.0}) {
      const auto R = reflection_matrix(E, k, m, g);
      EXPECT_EQ(R.R_SP, cplx(0.0));
      EXPECT_EQ(R.R_PS, cplx(0.0));
    }
}

TEST(Reflection, EnantiomerInvariance) {
  Geometry g;
  const MaterialModel m = lossy();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uE(0.2, 12.0), uk(0.0, 0.1);
  for (int i = 0; i < 200; ++i) {
    const double E = uE(rng), k = uk(rng);
    const auto a = reflection_matrix(E, k, m, g);
    const auto b = reflection_matrix(E, k, m.enantiomer(), g);
    EXPECT_LT(rel(a.R_SS, b.R_SS), 1e-12);
    EXPECT_LT(rel(a.R_PP, b.R_PP), 1e-12);
    EXPECT_LT(rel(a.R_SP, b.R_SP), 1e-12);
    EXPECT_LT(rel(a.R_PS, b.R_PS), 1e-12);
  }
}

TEST(Reflection, MatchesTranscription) {
  chirel::Setup st;
  st.material = lossy();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uE(0.2, 12.0), uk(0.0, 0.15);
  for (int i = 0; i < 300; ++i) {
    const double E = uE(rng), k = uk(rng);
    const auto R = reflection_matrix(E, k, st.material, st.geometry);
    const auto o = oracle::reflection(oracle::optics(st, E), k * k);
    const double s = std::max(std::abs(R.R_SS), std::abs(R.R_PP));
    EXPECT_LT(std::abs(R.R_SS - o[0]), 1e-10 * s);
    EXPECT_LT(std::abs(R.R_PP - o[1]), 1e-10 * s);
    EXPECT_LT(std::abs(R.R_SP - o[2]), 1e-10 * s);
    EXPECT_LT(std::abs(R.R_PS - o[3]), 1e-10 * s);
  }
}

TEST(Reflection, FiniteDeepInEvanescentRegion) {
  Geometry g;
  const MaterialModel m = lossy();
  for (double k : {1.0, 5.0, 20.0}) {
    const auto R = reflection_matrix(3.0, k, m, g);
    EXPECT_TRUE(is_finite(R.R_SS) && is_finite(R.R_PP) && is_finite(R.R_SP) && is_finite(R.R_PS));
  }
}
