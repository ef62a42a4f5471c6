#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "chirel/chiral_slab.hpp"
#include "chirel/quadrature.hpp"

namespace chirel {

struct UpsilonValue {
  cplx symmetric_part;
  cplx antisymmetric_part;
};

inline UpsilonValue upsilon_at(const OpticalState& s, double kx, double ky) {
  const double kpar2 = kx * kx + ky * ky;
  if (!(kpar2 > 0)) throw std::invalid_argument("upsilon: k_par must be nonzero");
  const ReflectionMatrix R = reflection_sq(s, kpar2);
  const double k2e = s.k_omega * s.k_omega * s.eps1;
  const double ratio = (k2e - kpar2) / k2e;  // k1z^2 / (k_omega^2 eps1)
  UpsilonValue u;
  u.symmetric_part = R.R_SS * (ky * ky / kpar2) + R.R_PP * ratio * (kx * kx / kpar2);
  u.antisymmetric_part = -(s.n * (R.R_SP * ratio + R.R_PS)) * (kx * ky / kpar2);
  return u;
}

inline UpsilonValue upsilon(double E, double kx, double ky, const MaterialModel& m, const Geometry& g,
                            const PhysicalConstants& pc = {}) {
  return upsilon_at(optical_state(m, g, E, pc.hbar_c), kx, ky);
}

struct GxxOptions {
  bool free_part = true;
  bool reflected_symmetric = true;
  bool reflected_antisymmetric = true;
  double rel_tol = 1e-10;
};

struct GxxResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

// Im G_xx(r, r') for two vacuum points, as a nested polar k_par integral:
// propagating disc in t = k1z and evanescent region in kappa = |k1z|.
inline GxxResult im_gxx_detailed(const std::array<double, 3>& r, const std::array<double, 3>& rp, double E,
                                 const MaterialModel& m, const Geometry& g, const PhysicalConstants& pc = {},
                                 const GxxOptions& opt = {}) {
  if (!(r[2] < 0 && rp[2] < 0)) throw std::invalid_argument("im_gxx: both points must have z < 0");
  const OpticalState s = optical_state(m, g, E, pc.hbar_c);
  const double dx = r[0] - rp[0], dy = r[1] - rp[1];
  const double dz = std::abs(r[2] - rp[2]);
  const double zs = r[2] + rp[2];
  const double kmax = s.k_omega * std::sqrt(s.eps1);

  quad::Tolerance tin{opt.rel_tol * 0.1, 1e-300, 4000};
  quad::Tolerance tout{opt.rel_tol, 1e-300, 4000};

  auto reflected = [&](double kx, double ky) -> cplx {
    const UpsilonValue u = upsilon_at(s, kx, ky);
    cplx v = 0.0;
    if (opt.reflected_symmetric) v += u.symmetric_part;
    if (opt.reflected_antisymmetric) v += u.antisymmetric_part;
    return v;
  };

  bool converged = true;
  double err = 0.0;

  // propagating: d^2k / k1z = dt dphi
  auto prop = [&](double t) -> double {
    const double kpar = std::sqrt(std::max(0.0, kmax * kmax - t * t));
    auto f = [&](double phi) -> double {
      const double kx = kpar * std::cos(phi), ky = kpar * std::sin(phi);
      double v = 0.0;
      if (opt.free_part) v += std::cos(t * dz) * (1.0 - kx * kx / (s.k_omega * s.k_omega * s.eps1));
      if ((opt.reflected_symmetric || opt.reflected_antisymmetric) && kpar > 0)
        v += (std::exp(cplx(0.0, -t * zs)) * reflected(kx, ky)).real();
      return std::cos(kx * dx + ky * dy) * v;
    };
    auto res = quad::integrate_partition<double>(f, {0.0, 0.5 * pi, pi, 1.5 * pi, 2.0 * pi}, tin);
    converged = converged && res.converged;
    return res.value;
  };

  // evanescent: d^2k / k1z = -i dkappa dphi, only the reflected part survives
  auto evan = [&](double kap) -> double {
    const double kpar = std::sqrt(kmax * kmax + kap * kap);
    auto f = [&](double phi) -> double {
      const double kx = kpar * std::cos(phi), ky = kpar * std::sin(phi);
      return std::cos(kx * dx + ky * dy) * std::exp(kap * zs) * reflected(kx, ky).imag();
    };
    auto res = quad::integrate_partition<double>(f, {0.0, 0.5 * pi, pi, 1.5 * pi, 2.0 * pi}, tin);
    converged = converged && res.converged;
    return res.value;
  };

  GxxResult out;
  const auto a = quad::integrate_adaptive<double>(prop, 0.0, kmax, tout);
  err += a.error_estimate;
  converged = converged && a.converged;
  double total = a.value;
  if (opt.reflected_symmetric || opt.reflected_antisymmetric) {
    const auto b = quad::integrate_semi_infinite<double>(evan, 1.0 / std::abs(zs), tout);
    err += b.error_estimate;
    converged = converged && b.converged;
    total += b.value;
  }
  const double pref = 1.0 / (8.0 * pi * pi);
  out.value = pref * total;
  out.error = pref * err;
  out.converged = converged;
  return out;
}

inline double im_gxx(const std::array<double, 3>& r, const std::array<double, 3>& rp, double E,
                     const MaterialModel& m, const Geometry& g, const PhysicalConstants& pc = {}) {
  return im_gxx_detailed(r, rp, E, m, g, pc).value;
}

// Closed-form Im G_xx of the homogeneous medium eps1.
inline double im_gxx_vacuum(const std::array<double, 3>& r, const std::array<double, 3>& rp, double E,
                            double eps1 = 1.0, const PhysicalConstants& pc = {}) {
  const double k = E / pc.hbar_c * std::sqrt(eps1);
  const double x = r[0] - rp[0], y = r[1] - rp[1], z = r[2] - rp[2];
  const double R = std::sqrt(x * x + y * y + z * z);
  if (R * k < 1e-3) {
    // small-distance limit: (1 + d_x^2/k^2) sin(kR)/(4 pi R) -> k/(4pi) (1 - 1/3)
    return k / (6.0 * pi);
  }
  const double kR = k * R, sn = std::sin(kR), cs = std::cos(kR);
  const double f1 = (kR * cs - sn) / (4.0 * pi * R * R);
  const double f2 = ((2.0 - kR * kR) * sn - 2.0 * kR * cs) / (4.0 * pi * R * R * R);
  const double f0 = sn / (4.0 * pi * R);
  const double dxx = f2 * (x * x) / (R * R) + f1 * (1.0 / R - x * x / (R * R * R));
  return f0 + dxx / (k * k);
}

}  // namespace chirel
