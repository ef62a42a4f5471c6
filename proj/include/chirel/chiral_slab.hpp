#pragma once

// Vacuum (z < 0) / chiral film (0 < z < d) / substrate stack.

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "chirel/core_units.hpp"
#include "chirel/materials.hpp"

namespace chirel {

struct Geometry {
  double d = 50.0;    // film thickness, nm
  double L = 1000.0;  // interaction length, nm
  Environment env;

  void validate() const {
    if (!(d >= 0)) throw std::invalid_argument("geometry: d must be >= 0");
    if (!(L > 0)) throw std::invalid_argument("geometry: L must be > 0");
    env.validate();
  }
};

struct Wavenumbers {
  cplx k1z, k2z, Kz_plus, Kz_minus, n_chiral;
};

using Mat2 = std::array<cplx, 4>;  // row major

struct LayerMatrices {
  Mat2 M1, M2;
  bool series_used = false;  // sin(x)/x replaced by its series somewhere
  bool near_singular = false;
};

// R_SP and R_PS are stored without the n prefactor.
struct ReflectionMatrix {
  cplx R_SS, R_PP, R_SP, R_PS;
};

class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, double cond) : std::runtime_error(what), condition(cond) {}
  double condition;
};

// Frequency-dependent material data, shared by every k_par at one energy.
struct OpticalState {
  double E = 0;
  double k_omega = 0;
  double d = 0;
  double eps1 = 1, eps2 = 1;
  cplx eps, kappa, n;
  cplx n_plus, n_minus;  // n + kappa, n - kappa
};

inline cplx chiral_index(cplx eps, cplx kappa) {
  if (kappa == cplx(0.0)) return sqrt_upper(eps);
  return sqrt_upper(eps * kappa * kappa) / kappa;
}

inline OpticalState optical_state(const MaterialModel& m, const Geometry& g, double E, double hbar_c) {
  if (!(E > 0)) throw std::invalid_argument("optical_state: E must be positive");
  OpticalState s;
  s.E = E;
  s.k_omega = E / hbar_c;
  s.d = g.d;
  s.eps1 = g.env.eps1;
  s.eps2 = g.env.eps2;
  s.eps = permittivity(m, E);
  s.kappa = pasteur(m, E);
  s.n = chiral_index(s.eps, s.kappa);
  s.n_plus = s.n + s.kappa;
  s.n_minus = s.n - s.kappa;
  return s;
}

inline Wavenumbers wavenumbers_sq(const OpticalState& s, double kpar2) {
  const double k2 = s.k_omega * s.k_omega;
  Wavenumbers w;
  w.k1z = sqrt_upper(cplx(k2 * s.eps1 - kpar2));
  w.k2z = sqrt_upper(cplx(k2 * s.eps2 - kpar2));
  w.Kz_plus = sqrt_upper(k2 * s.n_plus * s.n_plus - kpar2);
  w.Kz_minus = sqrt_upper(k2 * s.n_minus * s.n_minus - kpar2);
  w.n_chiral = s.n;
  return w;
}

namespace detail {

// cos(K d), sin(K d) and sin(K d)/K, all times exp(-shift).
struct ScaledTrig {
  cplx c, s, s_over;
};

inline ScaledTrig scaled_trig(cplx K, double d, double shift, bool& series) {
  const cplx x = K * d;
  const cplx ep = std::exp(I * x - shift), em = std::exp(-I * x - shift);
  ScaledTrig t;
  t.c = 0.5 * (ep + em);
  t.s = (ep - em) / (2.0 * I);
  if (std::abs(x) < 1e-4) {
    series = true;
    const cplx x2 = x * x;
    t.s_over = d * (1.0 - x2 / 6.0 + x2 * x2 / 120.0) * std::exp(-shift);
  } else {
    t.s_over = t.s / K;
  }
  return t;
}

}  // namespace detail

// With scaled = true every entry carries the common factor
// exp(-max|Im Kz| d), which cancels in the reflection matrix.
inline LayerMatrices layer_matrices_sq(const OpticalState& s, const Wavenumbers& w, bool scaled = false) {
  LayerMatrices out;
  const double kw = s.k_omega;
  const double d = s.d;
  const cplx n = s.n;
  const cplx Kp = w.Kz_plus, Km = w.Kz_minus;
  if (std::abs(Kp) * d < 1e-12 || std::abs(Km) * d < 1e-12) out.near_singular = true;

  const double shift = scaled ? std::max(std::abs((Kp * d).imag()), std::abs((Km * d).imag())) : 0.0;
  const auto tp = detail::scaled_trig(Kp, d, shift, out.series_used);
  const auto tm = detail::scaled_trig(Km, d, shift, out.series_used);

  const cplx Cp = 0.5 * (tp.c + tm.c), Cm = 0.5 * (tp.c - tm.c);
  const cplx t1p = kw * (s.n_plus / n) * tp.s_over, t1m = kw * (s.n_minus / n) * tm.s_over;
  const cplx S1p = 0.5 * (t1p + t1m), S1m = 0.5 * (t1p - t1m);
  const cplx t2p = Kp * (n / s.n_plus) * tp.s / kw, t2m = Km * (n / s.n_minus) * tm.s / kw;
  const cplx S2p = 0.5 * (t2p + t2m), S2m = 0.5 * (t2p - t2m);

  const cplx a = kw * s.eps2 / (I * w.k2z * s.eps);
  const cplx b1 = I * w.k1z / (kw * s.eps1);
  const cplx c1 = w.k2z / (I * kw);
  const cplx c2 = kw / (I * w.k1z);
  const cplx c3 = I * w.k2z / kw;

  out.M1 = {Cp + c1 * S1p, n * (a * Cm - S1m), n * (b1 * (Cm + c1 * S1m)), s.eps * (b1 * (a * Cp - S1p))};
  out.M2 = {c2 * (c3 * Cp + S2p), n * (c2 * (Cm + a * S2m)), n * ((c3 * Cm + S2m) / s.eps), Cp + a * S2p};
  return out;
}

inline ReflectionMatrix reflection_from(const OpticalState& s, const LayerMatrices& lm) {
  const Mat2& M1 = lm.M1;
  const Mat2& M2 = lm.M2;
  Mat2 A, B;
  for (int i = 0; i < 4; ++i) {
    A[i] = M1[i] - M2[i];
    B[i] = M1[i] + M2[i];
  }
  const cplx det = B[0] * B[3] - B[1] * B[2];
  double scale = 0.0;
  for (const auto& b : B) scale = std::max(scale, std::abs(b));
  if (!(std::abs(det) > 1e-300 * scale * scale)) {
    const double cond = std::abs(det) > 0 ? scale * scale / std::abs(det) : INFINITY;
    std::ostringstream os;
    os << "reflection_matrix: M1 + M2 singular at E = " << s.E << " eV (condition ~ " << cond << ")";
    throw SingularMatrixError(os.str(), cond);
  }
  // (M1 - M2) adj(M1 + M2)
  const cplx P11 = A[0] * B[3] - A[1] * B[2];
  const cplx P12 = -(A[0] * B[1]) + A[1] * B[0];
  const cplx P21 = A[2] * B[3] - A[3] * B[2];
  const cplx P22 = -(A[2] * B[1]) + A[3] * B[0];
  ReflectionMatrix R;
  R.R_SS = P11 / det;
  R.R_PP = -(P22 / det);
  const cplx nd = s.n * det;
  R.R_SP = P12 / nd;
  R.R_PS = -(P21 / nd);
  return R;
}

inline ReflectionMatrix reflection_sq(const OpticalState& s, double kpar2) {
  const Wavenumbers w = wavenumbers_sq(s, kpar2);
  return reflection_from(s, layer_matrices_sq(s, w, true));
}

// Public operations taking (E, k_par).

inline Wavenumbers wavenumbers(double E, double k_par, const MaterialModel& m, const Geometry& g,
                               const PhysicalConstants& pc = {}) {
  if (!(k_par >= 0)) throw std::invalid_argument("wavenumbers: k_par must be >= 0");
  return wavenumbers_sq(optical_state(m, g, E, pc.hbar_c), k_par * k_par);
}

inline LayerMatrices layer_matrices(double E, double k_par, const MaterialModel& m, const Geometry& g,
                                    const PhysicalConstants& pc = {}) {
  const OpticalState s = optical_state(m, g, E, pc.hbar_c);
  return layer_matrices_sq(s, wavenumbers_sq(s, k_par * k_par));
}

inline ReflectionMatrix reflection_matrix(double E, double k_par, const MaterialModel& m, const Geometry& g,
                                          const PhysicalConstants& pc = {}) {
  if (!(k_par >= 0)) throw std::invalid_argument("reflection_matrix: k_par must be >= 0");
  return reflection_sq(optical_state(m, g, E, pc.hbar_c), k_par * k_par);
}

inline ReflectionMatrix fresnel_two_media(double E, double k_par, double eps1, double eps2,
                                          const PhysicalConstants& pc = {}) {
  const double kw = E / pc.hbar_c;
  const cplx k1z = sqrt_upper(cplx(kw * kw * eps1 - k_par * k_par));
  const cplx k2z = sqrt_upper(cplx(kw * kw * eps2 - k_par * k_par));
  ReflectionMatrix R;
  R.R_SS = (k1z - k2z) / (k1z + k2z);
  R.R_PP = -(eps2 * k1z - eps1 * k2z) / (eps2 * k1z + eps1 * k2z);
  R.R_SP = 0.0;
  R.R_PS = 0.0;
  return R;
}

}  // namespace chirel
