#pragma once

// Two-point interaction integrals Delta_S, Delta_A, the elastic phase Phi and
// the derivative kernels A(Z), S(Z), sigma^(n)(Z).
//
// All spectral integrals share the electron-line kernel: the reflected
// Green's function evaluated at kx = -k_omega/beta, where k1z = i q with
// q = sqrt(k_omega^2 (1/beta^2 - eps1) + ky^2).

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chirel/chiral_slab.hpp"
#include "chirel/quadrature.hpp"

namespace chirel {

struct Setup {
  PhysicalConstants constants;
  MaterialModel material = default_material();
  Geometry geometry;
  double beta = 0.5;
  NumericsConfig numerics;

  double E_max() const { return numerics.E_max > 0 ? numerics.E_max : 5.0 * material.largest_resonance(); }

  void validate() const {
    constants.validate();
    material.validate();
    geometry.validate();
    numerics.validate();
    if (!(beta > 0 && beta < 1)) throw std::invalid_argument("beta must lie in (0, 1)");
    if (beta * beta * geometry.env.eps1 >= 1.0)
      throw std::invalid_argument("beta^2 eps1 must be < 1 (no Cherenkov emission in vacuum)");
    if (!(E_max() > material.largest_resonance()))
      throw std::invalid_argument("numerics.E_max must exceed every resonance energy");
  }

  // 2 L alpha / (pi hbar_c): Delta per unit (dE dky) after folding ky >= 0
  double prefactor() const {
    return 2.0 * geometry.L * constants.fine_structure / (pi * constants.hbar_c);
  }
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& w, double err) : std::runtime_error(w), error_estimate(err) {}
  double error_estimate;
};

// Kernel along the electron line at one photon energy.
struct ElectronLine {
  OpticalState state;
  double kx = 0;  // -k_omega / beta
  double a2 = 0;  // q^2 - ky^2

  ElectronLine(const Setup& st, double E)
      : state(optical_state(st.material, st.geometry, E, st.constants.hbar_c)) {
    kx = -state.k_omega / st.beta;
    a2 = state.k_omega * state.k_omega * (1.0 / (st.beta * st.beta) - state.eps1);
  }

  double q(double ky) const { return std::sqrt(a2 + ky * ky); }

  // Im of the symmetric part and of the antisymmetric part (at this +ky).
  std::pair<double, double> kernel(double ky) const {
    const double kpar2 = kx * kx + ky * ky;
    const ReflectionMatrix R = reflection_sq(state, kpar2);
    const double k2e = state.k_omega * state.k_omega * state.eps1;
    const double ratio = (k2e - kpar2) / k2e;
    const cplx sym = R.R_SS * (ky * ky / kpar2) + R.R_PP * ratio * (kx * kx / kpar2);
    const cplx asym = -(state.n * (R.R_SP * ratio + R.R_PS)) * (kx * ky / kpar2);
    return {sym.imag(), asym.imag()};
  }
};

namespace detail {

inline void check_z(const Setup& st, double z) {
  if (!(z < 0)) throw std::invalid_argument("z_tilde must be negative (points in vacuum)");
  if (std::abs(z) < st.numerics.z_floor) {
    std::ostringstream os;
    os << "|z_tilde| = " << std::abs(z) << " nm is below the contact floor " << st.numerics.z_floor << " nm";
    throw std::invalid_argument(os.str());
  }
}

inline double ky_max(const Setup& st, double z) { return st.numerics.ky_cutoff_factor / std::abs(z); }

// Initial ky partition: geometric points above the cusp scale sqrt(a2) and
// half periods of cos/sin(ky y).
inline std::vector<double> ky_breaks(double a, double kmax, double y) {
  std::vector<double> b{0.0};
  double p = std::max(a, 1e-6 * kmax);
  while (p < kmax) {
    b.push_back(p);
    p *= 4.0;
  }
  b.push_back(kmax);
  const double ay = std::abs(y);
  if (ay * kmax > 2.0 * pi) {
    const double half = pi / ay;
    const int n = static_cast<int>(std::min(96.0, std::floor(kmax / half)));
    const double step = kmax / (n + 1);
    for (int i = 1; i <= n; ++i) b.push_back(i * step);
  }
  std::sort(b.begin(), b.end());
  std::vector<double> u;
  for (double x : b)
    if (u.empty() || x > u.back() * (1 + 1e-12) + 1e-300) u.push_back(x);
  return u;
}

inline std::vector<double> energy_breaks(const Setup& st, double x_tilde) {
  const double Emax = st.E_max();
  std::vector<double> b{0.0, Emax};
  auto add_res = [&](double E0, double g) {
    for (double m : {-6.0, -2.0, -0.5, 0.5, 2.0, 6.0}) {
      const double e = E0 + m * g;
      if (e > 0 && e < Emax) b.push_back(e);
    }
  };
  for (const auto& o : st.material.oscillators) add_res(o.E0, o.gamma);
  for (const auto& o : st.material.chiral_oscillators) add_res(o.E0, o.gamma);
  const double freq = std::abs(x_tilde) / (st.constants.hbar_c * st.beta);
  if (freq * Emax > 2.0 * pi) {
    const int n = static_cast<int>(std::min(200.0, std::floor(Emax * freq / pi)));
    const double step = Emax / (n + 1);
    for (int i = 1; i <= n; ++i) b.push_back(i * step);
  }
  std::sort(b.begin(), b.end());
  std::vector<double> u;
  for (double x : b)
    if (u.empty() || x > u.back() + 1e-12 * Emax) u.push_back(x);
  if (u.back() < Emax) u.back() = Emax;
  return u;
}

}  // namespace detail

// C * int_0^Emax dE  outer(E, int_0^kmax dky inner(ky, q, sym, asym)).
// inner returns RVec<M>; outer maps (E, RVec<M>) to T.
template <class T, std::size_t M, class Inner, class Outer>
quad::QuadratureResult<T> nested_spectral(const Setup& st, double z_for_cutoff, double y_hint, double x_hint,
                                          Inner&& inner, Outer&& outer, double rel_tol, double abs_tol,
                                          std::vector<std::pair<double, double>>* panels = nullptr) {
  const double kmax = detail::ky_max(st, z_for_cutoff);
  const quad::Tolerance tin{std::max(rel_tol * 1e-2, 1e-14), 1e-300, st.numerics.max_subdivisions};
  const quad::Tolerance tout{rel_tol, abs_tol, st.numerics.max_subdivisions};
  bool inner_ok = true;
  double inner_err = 0.0;
  auto fE = [&](double E) -> T {
    const ElectronLine line(st, E);
    auto fk = [&](double ky) -> quad::RVec<M> {
      const auto [s, a] = line.kernel(ky);
      return inner(ky, line.q(ky), s, a);
    };
    const auto br = detail::ky_breaks(std::sqrt(line.a2), kmax, y_hint);
    const auto r = quad::integrate_partition<quad::RVec<M>>(fk, br, tin);
    if (!r.converged) {
      inner_ok = false;
      inner_err = std::max(inner_err, r.error_estimate);
    }
    return outer(E, r.value);
  };
  auto res = quad::integrate_partition<T>(fE, detail::energy_breaks(st, x_hint), tout, panels);
  res.converged = res.converged && inner_ok;
  return res;
}

struct DeltaPoint {
  double x_tilde = 0, y_tilde = 0, z_tilde = 0;
  cplx delta_s, delta_a;  // real when x_tilde = 0
  double error = 0;
  bool converged = true;
};

// Delta_S and Delta_A by nested adaptive quadrature.
inline DeltaPoint delta(const Setup& st, double x, double y, double z) {
  detail::check_z(st, z);
  const double C = st.prefactor();
  const double xf = x / (st.constants.hbar_c * st.beta);
  auto inner = [&](double ky, double q, double s, double a) {
    const double env = std::exp(q * z) / q;
    quad::RVec<2> r;
    r[0] = std::cos(ky * y) * env * s;
    r[1] = std::sin(ky * y) * env * a;
    return r;
  };
  auto outer = [&](double E, const quad::RVec<2>& v) {
    quad::CVec<2> r;
    const cplx ph = (x == 0.0) ? cplx(1.0, 0.0) : std::exp(cplx(0.0, -E * xf));
    r[0] = ph * v[0];
    r[1] = ph * v[1];
    return r;
  };
  const auto res = nested_spectral<quad::CVec<2>, 2>(st, z, y, x, inner, outer, st.numerics.rel_tol,
                                                     st.numerics.abs_tol / C);
  DeltaPoint p;
  p.x_tilde = x;
  p.y_tilde = y;
  p.z_tilde = z;
  p.delta_s = C * res.value[0];
  p.delta_a = C * res.value[1];
  p.error = C * res.error_estimate;
  p.converged = res.converged;
  return p;
}

inline DeltaPoint delta_s(const Setup& st, double x, double y, double z) { return delta(st, x, y, z); }
inline DeltaPoint delta_a(const Setup& st, double x, double y, double z) { return delta(st, x, y, z); }

// Derivative kernels at one Z (z_tilde = 2Z, x_tilde = y_tilde = 0).
struct ZKernels {
  double Z = 0;
  double D0 = 0;      // Delta_S(0, 0, 2Z)
  double A = 0;       // eV
  double S = 0;       // eV^2
  double sigma1 = 0;  // eV
  double sigma2 = 0;  // eV^2
  double error = 0;   // relative
  bool converged = true;
};

inline ZKernels z_kernels(const Setup& st, double Z) {
  const double z = 2.0 * Z;
  detail::check_z(st, z);
  const double C = st.prefactor();
  const double hc = st.constants.hbar_c;
  auto inner = [&](double ky, double q, double s, double a) {
    const double env = std::exp(q * z) / q;
    quad::RVec<3> r;
    r[0] = env * s;
    r[1] = ky * env * a;
    r[2] = ky * ky * env * s;
    return r;
  };
  auto outer = [&](double E, const quad::RVec<3>& v) {
    quad::RVec<5> r;
    r[0] = v[0];
    r[1] = E * v[0];
    r[2] = E * E * v[0];
    r[3] = v[1];
    r[4] = v[2];
    return r;
  };
  const auto res = nested_spectral<quad::RVec<5>, 3>(st, z, 0.0, 0.0, inner, outer, st.numerics.rel_tol, 1e-300);
  ZKernels k;
  k.Z = Z;
  k.D0 = C * res.value[0];
  k.sigma1 = -C * res.value[1];
  k.sigma2 = C * res.value[2];
  k.A = hc * C * res.value[3];
  k.S = hc * hc * C * res.value[4];
  double vmax = 0.0;
  for (int i = 0; i < 5; ++i) vmax = std::max(vmax, std::abs(res.value[i]));
  k.error = vmax > 0 ? res.error_estimate / vmax : 0.0;
  k.converged = res.converged;
  return k;
}

inline double lateral_kernel_A(const Setup& st, double Z) { return z_kernels(st, Z).A; }
inline double spread_kernel_S(const Setup& st, double Z) { return z_kernels(st, Z).S; }
inline double sigma_n(const Setup& st, double Z, int n) {
  if (n != 1 && n != 2) throw std::invalid_argument("sigma_n: n must be 1 or 2");
  const ZKernels k = z_kernels(st, Z);
  return n == 1 ? k.sigma1 : k.sigma2;
}

// Spectral weight g(E; z) per eV: Delta_S(0,0,z) = int g dE.
inline double spectral_weight(const Setup& st, double E, double z) {
  detail::check_z(st, z);
  const ElectronLine line(st, E);
  auto fk = [&](double ky) -> double {
    const double q = line.q(ky);
    return std::exp(q * z) / q * line.kernel(ky).first;
  };
  const quad::Tolerance t{st.numerics.rel_tol * 1e-2, 1e-300, st.numerics.max_subdivisions};
  const auto br = detail::ky_breaks(std::sqrt(line.a2), detail::ky_max(st, z), 0.0);
  return st.prefactor() * quad::integrate_partition<double>(fk, br, t).value;
}

// ---------------------------------------------------------------------------
// Elastic phase Phi(Z).

struct PhiResult {
  double value = 0;
  double error = 0;
  bool converged = true;
};

namespace detail {

// P.V. angular averages of sin^2 and cos^2 against 1/(c + k cos phi), over
// [0, 2pi). For k < c both carry a 1/(1+s) with s = sqrt(1 - k^2/c^2).
struct AngularPV {
  double ss, cc;
};

inline AngularPV angular_pv(double k, double c) {
  if (k < c) {
    const double s = std::sqrt((c - k) * (c + k)) / c;
    return {2.0 * pi / (c * (1.0 + s)), 2.0 * pi / (c * s * (1.0 + s))};
  }
  const double r = 2.0 * pi * c / (k * k);
  return {r, -r};
}

}  // namespace detail

// dPhi/dE at one energy. Polar form: the kx pole is handled by the
// closed-form angular integral, leaving |k_par|.
inline double phi_spectral(const Setup& st, double E, double Z, bool* converged = nullptr) {
  const double rel = std::max(st.numerics.rel_tol, 1e-10);
  const double kappa_max = st.numerics.ky_cutoff_factor / (2.0 * std::abs(Z));
  const quad::Tolerance tin{rel * 1e-2, 1e-300, st.numerics.max_subdivisions};
  const OpticalState s = optical_state(st.material, st.geometry, E, st.constants.hbar_c);
  const double kw2e = s.k_omega * s.k_omega * s.eps1;
  const double kb = std::sqrt(kw2e);
  const double c = s.k_omega / st.beta;
  const double kc = std::sqrt((c - kb) * (c + kb));
  // propagating, t = k1z
  auto prop = [&](double t) {
    const double k2 = std::max(0.0, kw2e - t * t);
    const ReflectionMatrix R = reflection_sq(s, k2);
    const auto J = detail::angular_pv(std::sqrt(k2), c);
    const cplx v = R.R_SS * J.ss + R.R_PP * (t * t / kw2e) * J.cc;
    return (std::exp(cplx(0.0, -2.0 * t * Z)) * v).real();
  };
  // evanescent inside the pole circle, kappa = kc sin(th)
  auto evan_in = [&](double th) {
    const double kap = kc * std::sin(th);
    const double k2 = kw2e + kap * kap;
    const double sq = kc * std::cos(th) / c;
    const ReflectionMatrix R = reflection_sq(s, k2);
    const cplx v = R.R_SS * (2.0 * pi * kc * std::cos(th) / (c * (1.0 + sq))) +
                   R.R_PP * (-kap * kap / kw2e) * (2.0 * pi / (1.0 + sq));
    return std::exp(2.0 * kap * Z) * v.imag();
  };
  auto evan_out = [&](double kap) {
    const double k2 = kw2e + kap * kap;
    const ReflectionMatrix R = reflection_sq(s, k2);
    const auto J = detail::angular_pv(std::sqrt(k2), c);
    const cplx v = R.R_SS * J.ss + R.R_PP * (-kap * kap / kw2e) * J.cc;
    return std::exp(2.0 * kap * Z) * v.imag();
  };
  bool ok = true;
  quad::CompensatedSum<double> acc;
  auto add = [&](const quad::QuadratureResult<double>& r) {
    ok = ok && r.converged;
    acc.add(r.value);
  };
  add(quad::integrate_adaptive<double>(prop, 0.0, kb, tin));
  const double th_max = kc > kappa_max ? std::asin(kappa_max / kc) : 0.5 * pi;
  add(quad::integrate_adaptive<double>(evan_in, 0.0, th_max, tin));
  if (kc < kappa_max) add(quad::integrate_adaptive<double>(evan_out, kc, kappa_max, tin));
  if (converged) *converged = *converged && ok;
  return st.geometry.L * st.constants.fine_structure / (2.0 * pi * pi * st.constants.hbar_c) * acc.result();
}

inline PhiResult phase_phi_detailed(const Setup& st, double Z) {
  detail::check_z(st, 2.0 * Z);
  const double rel = std::max(st.numerics.rel_tol, 1e-10);
  const quad::Tolerance tE{rel, 1e-300, st.numerics.max_subdivisions};
  bool ok = true;
  auto fE = [&](double E) { return phi_spectral(st, E, Z, &ok); };
  std::vector<double> eb{0.0, st.E_max()};
  for (const auto& o : st.material.oscillators)
    for (double m : {-6.0, -2.0, 2.0, 6.0})
      if (o.E0 + m * o.gamma > 0 && o.E0 + m * o.gamma < st.E_max()) eb.push_back(o.E0 + m * o.gamma);
  std::sort(eb.begin(), eb.end());
  eb.erase(std::unique(eb.begin(), eb.end()), eb.end());
  const auto res = quad::integrate_partition<double>(fE, eb, tE);
  PhiResult out;
  out.value = res.value;
  out.error = res.error_estimate;
  out.converged = ok && res.converged;
  return out;
}

inline double phase_phi(const Setup& st, double Z) { return phase_phi_detailed(st, Z).value; }

// ---------------------------------------------------------------------------
// Tabulated electron-line kernel on a tensor grid of Gauss-Kronrod nodes.
// The E and ky partitions come from adaptive runs at the nearest and farthest
// z_tilde of interest; the table does not depend on L.

struct GridSpec {
  double z_near = 2.0;  // smallest |z_tilde|
  double z_far = 60.0;  // largest |z_tilde|
  double y_max = 0.0;   // largest |y_tilde| to be evaluated
  double x_max = 0.0;   // largest |x_tilde|
  double tol = 1e-7;    // accepted grid-vs-adaptive discrepancy
  int max_refinements = 3;
};

struct KernelGrid {
  std::string key;  // set by callers that persist grids
  double beta = 0;
  double hbar_c = 0;
  double unit_prefactor = 0;  // 2 alpha / (pi hbar_c), per nm of L
  GridSpec spec;
  std::vector<std::pair<double, double>> E_panels, ky_panels;  // 21-point Kronrod panels
  std::vector<double> E_nodes, E_weights, ky_nodes, ky_weights;
  std::vector<double> q, im_sym, im_asym;  // [iE * nk + jk]
  double verified_error = 0;               // max probe discrepancy, relative to Delta_S(0,0,z)
  int refinements = 0;

  std::size_t nE() const { return E_nodes.size(); }
  std::size_t nk() const { return ky_nodes.size(); }
};

// E-collapsed coefficients at fixed (x_tilde, z_tilde); ky weights folded in.
struct GridSlice {
  double x = 0, z = 0;
  std::vector<double> ky;
  std::vector<cplx> s, a;
};

inline GridSlice grid_slice(const KernelGrid& g, double x, double z) {
  GridSlice sl;
  sl.x = x;
  sl.z = z;
  sl.ky = g.ky_nodes;
  const std::size_t nk = g.nk();
  sl.s.assign(nk, cplx(0.0));
  sl.a.assign(nk, cplx(0.0));
  const double xf = x / (g.hbar_c * g.beta);
  for (std::size_t i = 0; i < g.nE(); ++i) {
    const cplx ph = (x == 0.0 ? cplx(1.0) : std::exp(cplx(0.0, -g.E_nodes[i] * xf))) * g.E_weights[i];
    const std::size_t row = i * nk;
    for (std::size_t j = 0; j < nk; ++j) {
      const double qq = g.q[row + j];
      const double env = std::exp(qq * z) / qq;
      sl.s[j] += ph * (env * g.im_sym[row + j]);
      sl.a[j] += ph * (env * g.im_asym[row + j]);
    }
  }
  for (std::size_t j = 0; j < nk; ++j) {
    sl.s[j] *= g.ky_weights[j];
    sl.a[j] *= g.ky_weights[j];
  }
  return sl;
}

inline DeltaPoint slice_delta(const GridSlice& sl, double y, double C) {
  cplx s = 0.0, a = 0.0;
  for (std::size_t j = 0; j < sl.ky.size(); ++j) {
    s += std::cos(sl.ky[j] * y) * sl.s[j];
    a += std::sin(sl.ky[j] * y) * sl.a[j];
  }
  DeltaPoint p;
  p.x_tilde = sl.x;
  p.y_tilde = y;
  p.z_tilde = sl.z;
  p.delta_s = C * s;
  p.delta_a = C * a;
  return p;
}

inline DeltaPoint grid_delta(const KernelGrid& g, const Setup& st, double x, double y, double z) {
  detail::check_z(st, z);
  DeltaPoint p = slice_delta(grid_slice(g, x, z), y, g.unit_prefactor * st.geometry.L);
  p.error = g.verified_error * std::abs(p.delta_s);
  return p;
}

namespace detail {

inline std::vector<std::pair<double, double>> split_wide(const std::vector<std::pair<double, double>>& in,
                                                         double max_width) {
  std::vector<std::pair<double, double>> out;
  for (const auto& [a, b] : in) {
    const int n = max_width > 0 ? std::max(1, static_cast<int>(std::ceil((b - a) / max_width))) : 1;
    for (int i = 0; i < n; ++i) out.push_back({a + (b - a) * i / n, a + (b - a) * (i + 1) / n});
  }
  return out;
}

inline std::vector<std::pair<double, double>> bisect_all(const std::vector<std::pair<double, double>>& in) {
  std::vector<std::pair<double, double>> out;
  for (const auto& [a, b] : in) {
    const double m = 0.5 * (a + b);
    out.push_back({a, m});
    out.push_back({m, b});
  }
  return out;
}

inline void gk_nodes(const std::vector<std::pair<double, double>>& panels, std::vector<double>& x,
                     std::vector<double>& w) {
  x.clear();
  w.clear();
  std::array<double, 21> px, pw;
  for (const auto& [a, b] : panels) {
    quad::kronrod_nodes(a, b, px, pw);
    x.insert(x.end(), px.begin(), px.end());
    w.insert(w.end(), pw.begin(), pw.end());
  }
}

}  // namespace detail

inline void tabulate(KernelGrid& g, const Setup& st, const std::vector<std::pair<double, double>>& Ep,
                     const std::vector<std::pair<double, double>>& kp) {
  g.E_panels = Ep;
  g.ky_panels = kp;
  detail::gk_nodes(Ep, g.E_nodes, g.E_weights);
  detail::gk_nodes(kp, g.ky_nodes, g.ky_weights);
  const std::size_t nE = g.nE(), nk = g.nk();
  g.q.assign(nE * nk, 0.0);
  g.im_sym.assign(nE * nk, 0.0);
  g.im_asym.assign(nE * nk, 0.0);
  for (std::size_t i = 0; i < nE; ++i) {
    const ElectronLine line(st, g.E_nodes[i]);
    for (std::size_t j = 0; j < nk; ++j) {
      const double ky = g.ky_nodes[j];
      const auto [s, a] = line.kernel(ky);
      g.q[i * nk + j] = line.q(ky);
      g.im_sym[i * nk + j] = s;
      g.im_asym[i * nk + j] = a;
    }
  }
}

// Largest probe discrepancy between grid and adaptive Delta, relative to
// Delta_S(0, 0, z) at the probe depth.
inline double grid_probe_error(const KernelGrid& g, const Setup& st) {
  const GridSpec& sp = g.spec;
  const double zm = -std::sqrt(sp.z_near * sp.z_far);
  const std::vector<std::array<double, 3>> probes = {
      {0.0, 0.0, -sp.z_near},         {0.0, 0.0, -sp.z_far},         {0.0, 0.0, zm},
      {sp.x_max, sp.y_max, -sp.z_near}, {0.0, sp.y_max, -sp.z_far},   {0.5 * sp.x_max, 0.5 * sp.y_max, zm},
      {0.0, 0.37 * sp.y_max + 0.5 * sp.z_near, -sp.z_near}};
  double worst = 0.0;
  for (const auto& p : probes) {
    const double ref = std::abs(delta(st, 0.0, 0.0, p[2]).delta_s);
    const DeltaPoint a = delta(st, p[0], p[1], p[2]);
    const DeltaPoint b = grid_delta(g, st, p[0], p[1], p[2]);
    worst = std::max(worst, std::abs(a.delta_s - b.delta_s) / ref);
    worst = std::max(worst, std::abs(a.delta_a - b.delta_a) / ref);
  }
  return worst;
}

inline KernelGrid build_kernel_grid(const Setup& st, const GridSpec& spec) {
  st.validate();
  if (!(spec.z_near > 0 && spec.z_far >= spec.z_near)) throw std::invalid_argument("grid: need 0 < z_near <= z_far");
  if (spec.z_near < st.numerics.z_floor) throw std::invalid_argument("grid: z_near below the contact floor");
  KernelGrid g;
  g.beta = st.beta;
  g.hbar_c = st.constants.hbar_c;
  g.unit_prefactor = 2.0 * st.constants.fine_structure / (pi * st.constants.hbar_c);
  g.spec = spec;
  const double zn = -spec.z_near, zf = -spec.z_far;
  const double rel = std::max(st.numerics.rel_tol, 1e-10);

  // E partition from the E-outer nested integral
  std::vector<std::pair<double, double>> Ep;
  {
    auto inner = [&](double ky, double q, double s, double a) {
      quad::RVec<4> r;
      const double en = std::exp(q * zn) / q, ef = std::exp(q * zf) / q;
      r[0] = en * s;
      r[1] = ef * s;
      r[2] = ky * en * a;
      r[3] = ky * ef * a;
      return r;
    };
    auto outer = [](double E, const quad::RVec<4>& v) {
      quad::RVec<5> r;
      for (int i = 0; i < 4; ++i) r[i] = v[i];
      r[4] = E * E * v[0];
      return r;
    };
    nested_spectral<quad::RVec<5>, 4>(st, zn, spec.y_max, spec.x_max, inner, outer, rel, 1e-300, &Ep);
  }
  // ky partition from the ky-outer integral
  std::vector<std::pair<double, double>> kp;
  {
    const auto Eb = detail::energy_breaks(st, 0.0);
    const quad::Tolerance tin{rel * 1e-2, 1e-300, st.numerics.max_subdivisions};
    auto fk = [&](double ky) {
      auto fE = [&](double E) {
        const ElectronLine line(st, E);
        const auto [s, a] = line.kernel(ky);
        const double q = line.q(ky);
        const double en = std::exp(q * zn) / q, ef = std::exp(q * zf) / q;
        quad::RVec<4> r;
        r[0] = en * s;
        r[1] = ef * s;
        r[2] = ky * en * a;
        r[3] = ky * ef * a;
        return r;
      };
      return quad::integrate_partition<quad::RVec<4>>(fE, Eb, tin).value;
    };
    const double a_min = ElectronLine(st, 0.05 * st.material.largest_resonance()).a2;
    const auto kb = detail::ky_breaks(std::sqrt(a_min), detail::ky_max(st, zn), spec.y_max);
    const quad::Tolerance tout{rel, 1e-300, st.numerics.max_subdivisions};
    quad::integrate_partition<quad::RVec<4>>(fk, kb, tout, &kp);
  }
  if (spec.x_max > 0) Ep = detail::split_wide(Ep, 2.0 * st.constants.hbar_c * st.beta / spec.x_max);
  if (spec.y_max > 0) kp = detail::split_wide(kp, 2.0 / spec.y_max);

  for (int r = 0;; ++r) {
    tabulate(g, st, Ep, kp);
    g.refinements = r;
    g.verified_error = grid_probe_error(g, st);
    if (g.verified_error <= spec.tol || r >= spec.max_refinements) break;
    Ep = detail::bisect_all(Ep);
    kp = detail::bisect_all(kp);
  }
  return g;
}

// Rebuild a grid from stored panels (tables are a pure function of them).
inline KernelGrid restore_kernel_grid(const Setup& st, const GridSpec& spec,
                                      const std::vector<std::pair<double, double>>& Ep,
                                      const std::vector<std::pair<double, double>>& kp, double verified_error,
                                      int refinements) {
  st.validate();
  KernelGrid g;
  g.beta = st.beta;
  g.hbar_c = st.constants.hbar_c;
  g.unit_prefactor = 2.0 * st.constants.fine_structure / (pi * st.constants.hbar_c);
  g.spec = spec;
  tabulate(g, st, Ep, kp);
  g.verified_error = verified_error;
  g.refinements = refinements;
  return g;
}

}  // namespace chirel
