#pragma once

// Brute-force references for tests. Only the data types of the other modules
// are used here; every formula is transcribed again and evaluated on fixed
// uniform grids.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "chirel/core_units.hpp"
#include "chirel/observables.hpp"
#include "chirel/response.hpp"

namespace chirel::oracle {

struct OracleReport {
  std::string quantity_name;
  double main_value = 0, oracle_value = 0;
  double relative_error = 0;
  bool passed = false;
};

inline OracleReport compare(const std::string& name, double main_value, double oracle_value, double bound) {
  OracleReport r;
  r.quantity_name = name;
  r.main_value = main_value;
  r.oracle_value = oracle_value;
  const double den = std::abs(oracle_value) > 0 ? std::abs(oracle_value) : 1.0;
  r.relative_error = std::abs(main_value - oracle_value) / den;
  r.passed = r.relative_error <= bound;
  return r;
}

inline double finite_difference(const std::function<double(double)>& f, double x, double h, int order) {
  if (!(h > 0)) throw std::invalid_argument("finite_difference: step must be > 0");
  if (order == 1) return (f(x + h) - f(x - h)) / (2.0 * h);
  if (order == 2) return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
  throw std::invalid_argument("finite_difference: order must be 1 or 2");
}

// int (x - c)^n density dx by trapezoids, plus the point mass
inline double distribution_moments(const Distribution1D& d, int n, double c = 0.0) {
  double s = 0.0;
  for (std::size_t i = 1; i < d.axis.size(); ++i) {
    const double a = std::pow(d.axis[i - 1] - c, n) * d.density[i - 1];
    const double b = std::pow(d.axis[i] - c, n) * d.density[i];
    s += 0.5 * (d.axis[i] - d.axis[i - 1]) * (a + b);
  }
  if (d.point_mass_weight != 0.0) s += std::pow(d.point_mass_position - c, n) * d.point_mass_weight;
  return s;
}

// ---------------------------------------------------------------------------
// Straight transcription of the film optics.

struct Optics {
  double kw, eps1, eps2, d;
  cplx eps, kap, n;
};

inline Optics optics(const Setup& st, double E) {
  Optics o;
  o.kw = E / st.constants.hbar_c;
  o.eps1 = st.geometry.env.eps1;
  o.eps2 = st.geometry.env.eps2;
  o.d = st.geometry.d;
  o.eps = st.material.eps_background;
  for (const auto& l : st.material.oscillators) o.eps += l.f / (l.E0 * l.E0 - E * E - I * l.gamma * E);
  o.kap = 0.0;
  for (const auto& c : st.material.chiral_oscillators)
    o.kap += c.kappa_A * c.E0 * E / (c.E0 * c.E0 - E * E - I * c.gamma * E);
  if (o.kap == 0.0)
    o.n = sqrt_upper(o.eps);
  else
    o.n = sqrt_upper(o.eps * o.kap * o.kap) / o.kap;
  return o;
}

struct Matrices {
  std::array<cplx, 4> M1, M2;
};

inline Matrices matrices(const Optics& o, double kpar2) {
  const double kw = o.kw;
  // the light line itself (k1z = 0) is a removable point; step off it
  if (std::abs(kw * kw * o.eps1 - kpar2) < 1e-12 * kw * kw * o.eps1) kpar2 *= 1.0 - 1e-10;
  const cplx n = o.n, eps = o.eps, kap = o.kap;
  const cplx k1z = sqrt_upper(kw * kw * o.eps1 - kpar2);
  const cplx k2z = sqrt_upper(kw * kw * o.eps2 - kpar2);
  const cplx Kp = sqrt_upper(kw * kw * (n + kap) * (n + kap) - kpar2);
  const cplx Km = sqrt_upper(kw * kw * (n - kap) * (n - kap) - kpar2);
  const double d = o.d;

  const cplx Cplus = 0.5 * (std::cos(Kp * d) + std::cos(Km * d));
  const cplx Cminus = 0.5 * (std::cos(Kp * d) - std::cos(Km * d));
  cplx f1p, f1m;  // k_w (n +- kappa) sin(K d) / (K n)
  if (std::abs(Kp * d) < 1e-6)
    f1p = kw * (n + kap) * d / n;
  else
    f1p = kw * (n + kap) / (Kp * n) * std::sin(Kp * d);
  if (std::abs(Km * d) < 1e-6)
    f1m = kw * (n - kap) * d / n;
  else
    f1m = kw * (n - kap) / (Km * n) * std::sin(Km * d);
  const cplx S1plus = 0.5 * (f1p + f1m);
  const cplx S1minus = 0.5 * (f1p - f1m);
  const cplx f2p = Kp * n / (kw * (n + kap)) * std::sin(Kp * d);
  const cplx f2m = Km * n / (kw * (n - kap)) * std::sin(Km * d);
  const cplx S2plus = 0.5 * (f2p + f2m);
  const cplx S2minus = 0.5 * (f2p - f2m);

  const cplx A = kw * o.eps2 / (I * k2z * eps);
  Matrices m;
  m.M1[0] = Cplus + k2z / (I * kw) * S1plus;
  m.M1[1] = n * (A * Cminus - S1minus);
  m.M1[2] = n * (I * k1z) / (kw * o.eps1) * (Cminus + k2z / (I * kw) * S1minus);
  m.M1[3] = eps * (I * k1z) / (kw * o.eps1) * (A * Cplus - S1plus);
  m.M2[0] = kw / (I * k1z) * (I * k2z / kw * Cplus + S2plus);
  m.M2[1] = n * kw / (I * k1z) * (Cminus + A * S2minus);
  m.M2[2] = n / eps * (I * k2z / kw * Cminus + S2minus);
  m.M2[3] = Cplus + A * S2plus;
  return m;
}

// {R_SS, R_PP, R_SP, R_PS} with n removed from the mixing entries
inline std::array<cplx, 4> reflection(const Optics& o, double kpar2) {
  Matrices m = matrices(o, kpar2);
  double big = 0.0;
  for (int i = 0; i < 4; ++i) big = std::max(big, std::abs(m.M1[i] + m.M2[i]));
  for (int i = 0; i < 4; ++i) {
    m.M1[i] /= big;
    m.M2[i] /= big;
  }
  const cplx a = m.M1[0] - m.M2[0], b = m.M1[1] - m.M2[1], c = m.M1[2] - m.M2[2], dd = m.M1[3] - m.M2[3];
  const cplx p = m.M1[0] + m.M2[0], q = m.M1[1] + m.M2[1], r = m.M1[2] + m.M2[2], s = m.M1[3] + m.M2[3];
  const cplx det = p * s - q * r;
  // inverse of [[p q][r s]] = [[s -q][-r p]] / det
  const cplx i00 = s / det, i01 = -q / det, i10 = -r / det, i11 = p / det;
  const cplx X00 = a * i00 + b * i10, X01 = a * i01 + b * i11;
  const cplx X10 = c * i00 + dd * i10, X11 = c * i01 + dd * i11;
  return {X00, -X11, X01 / o.n, -X10 / o.n};
}

struct Ups {
  cplx sym, asym;
};

inline Ups upsilon(const Optics& o, double kx, double ky) {
  const double k2 = kx * kx + ky * ky;
  const auto R = reflection(o, k2);
  const double f = (o.kw * o.kw * o.eps1 - k2) / (o.kw * o.kw * o.eps1);
  Ups u;
  u.sym = R[0] * ky * ky / k2 + R[1] * f * kx * kx / k2;
  u.asym = -o.n * (R[2] * f + R[3]) * kx * ky / k2;
  return u;
}

inline double e_max(const Setup& st) {
  if (st.numerics.E_max > 0) return st.numerics.E_max;
  double m = 0.0;
  for (const auto& l : st.material.oscillators) m = std::max(m, l.E0);
  for (const auto& c : st.material.chiral_oscillators) m = std::max(m, c.E0);
  return 5.0 * m;
}

inline double simpson_weight(int i, int n) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); }

// ---------------------------------------------------------------------------
// Delta_S, Delta_A by composite Simpson in t (E = E_max t^2) and
// u (ky = a sinh u, so dky/q = du).
struct DeltaPair {
  cplx delta_s, delta_a;
};

// cos(K d) is evaluated directly, so keep |z| above ~3 nm for d = 50 nm.
inline DeltaPair fixed_grid_delta(const Setup& st, double x, double y, double z, int n_E = 4096, int n_ky = 1024) {
  if (n_E < 64 || n_ky < 64) throw std::invalid_argument("fixed_grid_delta: grids need >= 64 intervals");
  if (!(z < 0)) throw std::invalid_argument("fixed_grid_delta: z must be negative");
  if (st.numerics.ky_cutoff_factor / std::abs(z) * st.geometry.d > 600.0)
    throw std::invalid_argument("fixed_grid_delta: |z| too small for direct trigonometric evaluation");
  n_E += n_E % 2;
  n_ky += n_ky % 2;
  const double hc = st.constants.hbar_c;
  const double Em = e_max(st);
  const double kmax = st.numerics.ky_cutoff_factor / std::abs(z);
  const double ht = 1.0 / n_E;
  cplx sumS = 0.0, sumA = 0.0;
  for (int i = 1; i <= n_E; ++i) {
    const double t = i * ht;
    const double E = Em * t * t;
    const Optics o = optics(st, E);
    const double kx = -o.kw / st.beta;
    const double a = o.kw * std::sqrt(1.0 / (st.beta * st.beta) - o.eps1);
    const double umax = std::asinh(kmax / a);
    const double hu = umax / n_ky;
    double s = 0.0, an = 0.0;
    for (int j = 0; j <= n_ky; ++j) {
      const double u = j * hu;
      const double ky = a * std::sinh(u), q = a * std::cosh(u);
      const Ups U = upsilon(o, kx, ky);
      const double w = simpson_weight(j, n_ky) * std::exp(q * z);
      s += w * std::cos(ky * y) * U.sym.imag();
      an += w * std::sin(ky * y) * U.asym.imag();
    }
    const double jac = 2.0 * Em * t * simpson_weight(i, n_E) * hu / 3.0;
    const cplx ph = std::exp(cplx(0.0, -E * x / (hc * st.beta)));
    sumS += jac * ph * s;
    sumA += jac * ph * an;
  }
  const double C = 2.0 * st.geometry.L * st.constants.fine_structure / (pi * hc);
  return {C * sumS * ht / 3.0, C * sumA * ht / 3.0};
}

// ---------------------------------------------------------------------------
// Phi(Z) on Cartesian (kx, ky): P.V. in kx by subtraction, coarse Simpson grids.

namespace detail {

// P.V. int_a^b G(v)/(v - vp) dv on n intervals, vp strictly inside
template <class G>
double pv_simpson(G&& g, double vp, double a, double b, int n) {
  const double gp = g(vp);
  const double eps = 1e-5 * (b - a);
  const double slope = (g(vp + eps) - g(vp - eps)) / (2.0 * eps);
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double v = a + i * h;
    const double dv = v - vp;
    const double f = std::abs(dv) < 1e-9 * (b - a) ? slope : (g(v) - gp) / dv;
    s += simpson_weight(i, n) * f;
  }
  return s * h / 3.0 + gp * std::log((b - vp) / (vp - a));
}

template <class F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) s += simpson_weight(i, n) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace detail

// dPhi/dE on Cartesian (kx, ky) with uniform grids in the mapped variables.
// Guided-mode peaks above the light line need n_ky in the thousands.
inline double fixed_grid_phi_spectral(const Setup& st, double E, double Z, int n_ky = 2048, int n_kx = 256) {
  if (!(Z < 0)) throw std::invalid_argument("fixed_grid_phi: Z must be negative");
  n_ky += n_ky % 2;
  n_kx += n_kx % 2;
  const double kmx = st.numerics.ky_cutoff_factor / (2.0 * std::abs(Z));
  const Optics o = optics(st, E);

  auto kx_integral = [&](double ky) {
    const double kb = o.kw * std::sqrt(o.eps1);
    const double p = -o.kw / st.beta;
    const double s2 = kb * kb - ky * ky;
    auto H = [&](double kx, double kap) { return std::exp(2.0 * kap * Z) * upsilon(o, kx, ky).sym.imag(); };
    if (s2 > 0) {
      const double s = std::sqrt(s2);
      auto inside = [&](double th) {
        const double kx = s * std::sin(th), k1z = s * std::cos(th);
        return (std::exp(cplx(0.0, -2.0 * k1z * Z)) * upsilon(o, kx, ky).sym).real() / (kx - p);
      };
      double total = detail::simpson(inside, -0.5 * pi, 0.5 * pi, n_kx);
      const double vmax = std::asinh(kmx / s);
      auto right = [&](double v) { return H(s * std::cosh(v), s * std::sinh(v)) / (s * std::cosh(v) - p); };
      total += detail::simpson(right, 0.0, vmax, n_kx);
      const double vp = std::acosh(-p / s);
      if (vp < vmax) {
        auto g = [&](double v) {
          const double dv = v - vp;
          const double den = std::abs(dv) > 1e-7 ? (std::cosh(v) - std::cosh(vp)) / dv : std::sinh(vp);
          return -H(-s * std::cosh(v), s * std::sinh(v)) / (s * den);
        };
        total += detail::pv_simpson(g, vp, 0.0, vmax, n_kx);
      } else {
        auto left = [&](double v) { return H(-s * std::cosh(v), s * std::sinh(v)) / (-s * std::cosh(v) - p); };
        total += detail::simpson(left, 0.0, vmax, n_kx);
      }
      return total;
    }
    const double t = std::sqrt(-s2);
    if (t >= kmx) return 0.0;
    const double vmax = std::acosh(kmx / t);
    const double vp = std::asinh(p / t);
    if (vp > -vmax) {
      auto g = [&](double v) {
        const double dv = v - vp;
        const double den = std::abs(dv) > 1e-7 ? (std::sinh(v) - std::sinh(vp)) / dv : std::cosh(vp);
        return H(t * std::sinh(v), t * std::cosh(v)) / (t * den);
      };
      return detail::pv_simpson(g, vp, -vmax, vmax, 2 * n_kx);
    }
    auto f = [&](double v) { return H(t * std::sinh(v), t * std::cosh(v)) / (t * std::sinh(v) - p); };
    return detail::simpson(f, -vmax, vmax, 2 * n_kx);
  };

  const double kb = o.kw * std::sqrt(o.eps1);
  const double kyc = kmx + kb;
  // ky = kb (1 - u^3) below the light line, kb + (kyc - kb) u^3 above;
  // ky = 0 would put k_par = 0 on the inner grid
  auto below = [&](double u) {
    return u == 0.0 ? 0.0 : 3.0 * kb * u * u * kx_integral(std::max(kb * (1.0 - u * u * u), 1e-9 * kb));
  };
  auto above = [&](double u) {
    return u == 0.0 ? 0.0 : 3.0 * (kyc - kb) * u * u * kx_integral(kb + (kyc - kb) * u * u * u);
  };
  const double fy = detail::simpson(below, 0.0, 1.0, n_ky) + detail::simpson(above, 0.0, 1.0, n_ky);
  return st.geometry.L * st.constants.fine_structure / (pi * pi * st.constants.hbar_c) * fy;
}

// dPhi/dE in polar k_par: the reflection only depends on |k_par|, so each
// radial node gets one reflection call and a numerical angular P.V. against
// 1/(c + k cos phi). Uniform Simpson grids in k1z on the propagating disc and
// in kappa = kc (1 - u^2) / kc + (kmax - kc) u^2 outside.
inline double polar_grid_phi_spectral(const Setup& st, double E, double Z, int n_r = 4096, int n_phi = 512) {
  if (!(Z < 0)) throw std::invalid_argument("fixed_grid_phi: Z must be negative");
  n_r += n_r % 2;
  n_phi += n_phi % 2;
  const double kmx = st.numerics.ky_cutoff_factor / (2.0 * std::abs(Z));

  // angular integrals of sin^2 and cos^2 over [0, 2 pi) against 1/(c + k cos)
  auto angular = [&](double k, double c) -> std::array<double, 2> {
    if (k < c) {
      // periodic trapezoid; converges like ((1 - s)/(1 + s))^n, s = sqrt(1 - k^2/c^2)
      const double sv = std::sqrt((c - k) * (c + k)) / c;
      const int n = static_cast<int>(std::min(4.0e6, std::max<double>(n_phi, 20.0 / sv)));
      const double h = 2.0 * pi / n;
      double ss = 0.0, cc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double cs = std::cos(i * h);
        const double f = 1.0 / (c + k * cs);
        ss += (1.0 - cs * cs) * f;
        cc += cs * cs * f;
      }
      return {ss * h, cc * h};
    }
    // poles at phi0 and 2 pi - phi0; both simple parts subtracted over the
    // whole circle so the pair may merge near pi
    const double ph0 = std::acos(-c / k), ph1 = 2.0 * pi - ph0;
    const double sn0 = std::sqrt((k - c) * (k + c)) / k;
    const double A0s = sn0 * sn0 / (-k * sn0), A0c = (c * c / (k * k)) / (-k * sn0);
    const int n = n_phi;
    const double h = 2.0 * pi / n;
    double ss = 0.0, cc = 0.0;
    for (int i = 0; i <= n; ++i) {
      double ph = i * h;
      if (std::abs(ph - ph0) < 1e-9 || std::abs(ph - ph1) < 1e-9) ph += 1e-7;
      const double cs = std::cos(ph);
      const double f = 1.0 / (c + k * cs);
      const double pole = 1.0 / (ph - ph0) - 1.0 / (ph - ph1);
      ss += simpson_weight(i, n) * ((1.0 - cs * cs) * f - A0s * pole);
      cc += simpson_weight(i, n) * (cs * cs * f - A0c * pole);
    }
    const double lg = std::log((2.0 * pi - ph0) / ph0) - std::log((2.0 * pi - ph1) / ph1);
    return {ss * h / 3.0 + A0s * lg, cc * h / 3.0 + A0c * lg};
  };

  {
    const Optics o = optics(st, E);
    const double kb2 = o.kw * o.kw * o.eps1, kb = std::sqrt(kb2);
    const double c = o.kw / st.beta;
    const double kc = std::sqrt(c * c - kb2);
    auto prop = [&](double t) {
      const double k = std::sqrt(std::max(kb2 - t * t, 0.0));
      const auto R = reflection(o, std::max(k * k, 1e-30));
      const auto J = angular(std::max(k, 1e-15), c);
      return (std::exp(cplx(0.0, -2.0 * t * Z)) * (R[0] * J[0] + R[1] * (t * t / kb2) * J[1])).real();
    };
    auto evan = [&](double kap) {
      const double k2 = kb2 + kap * kap;
      const auto R = reflection(o, k2);
      const auto J = angular(std::sqrt(k2), c);
      return std::exp(2.0 * kap * Z) * (R[0] * J[0] - R[1] * (kap * kap / kb2) * J[1]).imag();
    };
    double total = detail::simpson(prop, 0.0, kb, n_r / 8);
    const double k_in = std::min(kc, kmx);
    if (kc <= kmx) {
      // kappa = kc (1 - u^2) takes the 1/sqrt edge at kappa = kc
      total += detail::simpson([&](double u) { return u == 0.0 ? 0.0 : 2.0 * kc * u * evan(kc * (1.0 - u * u)); },
                               0.0, 1.0, n_r);
      if (kmx > kc)
        total += detail::simpson([&](double u) { return u == 0.0 ? 0.0 : 2.0 * (kmx - kc) * u * evan(kc + (kmx - kc) * u * u); }, 0.0,
                                 1.0, n_r / 8);
    } else {
      total += detail::simpson(evan, 0.0, k_in, n_r);
    }
    return st.geometry.L * st.constants.fine_structure / (2.0 * pi * pi * st.constants.hbar_c) * total;
  }
}

// Levels n_r, 2 n_r, 4 n_r. Near the chiral resonance the radial rule goes
// like 1/n_r; one Richardson step when successive differences halve, else the
// finest level (grid still resolving peaks).
inline double polar_grid_phi_spectral_extrapolated(const Setup& st, double E, double Z, int n_r = 65536,
                                                   int n_phi = 256) {
  const double f1 = polar_grid_phi_spectral(st, E, Z, n_r, n_phi);
  const double f2 = polar_grid_phi_spectral(st, E, Z, 2 * n_r, n_phi);
  const double f4 = polar_grid_phi_spectral(st, E, Z, 4 * n_r, n_phi);
  const double d1 = f2 - f1, d2 = f4 - f2;
  if (d2 != 0.0) {
    const double ratio = d1 / d2;
    if (ratio > 1.6 && ratio < 2.5) return 2.0 * f4 - f2;
  }
  return f4;
}

// Phi(Z) by Simpson on a uniform E grid over (0, E_max] of the polar spectral
// density; the E = 0 end point is taken from the first interior node.
inline double fixed_grid_phi(const Setup& st, double Z, int n_E = 256, int n_r = 4096, int n_phi = 512) {
  n_E += n_E % 2;
  const double h = e_max(st) / n_E;
  std::vector<double> f(n_E + 1);
  for (int i = 1; i <= n_E; ++i) f[i] = polar_grid_phi_spectral(st, i * h, Z, n_r, n_phi);
  f[0] = 2.0 * f[1] - f[2];
  double sum = 0.0;
  for (int i = 0; i <= n_E; ++i) sum += simpson_weight(i, n_E) * f[i];
  return sum * h / 3.0;
}

}  // namespace chirel::oracle
