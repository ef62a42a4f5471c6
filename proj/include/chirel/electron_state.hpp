#pragma once

// Incident electron: elliptical Gaussian transverse profile, decoherence
// factor gamma and the mirror asymmetry Asym[gamma].

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "chirel/response.hpp"

namespace chirel {

struct ElectronParams {
  double beta = 0.5;
  double sigma_y = 3.0;    // nm
  double sigma_z = 3.0;    // nm
  double impact_b = 18.0;  // nm above the film surface
  double E_i = 0.0;        // eV, 0 selects the total energy gamma m c^2

  void validate() const {
    if (!(beta > 0 && beta < 1)) throw std::invalid_argument("electron.beta must lie in (0, 1)");
    if (!(sigma_y > 0) || !(sigma_z > 0)) throw std::invalid_argument("electron.sigma_y and sigma_z must be > 0");
    if (!(impact_b > 0)) throw std::invalid_argument("electron.b must be > 0");
    if (!(E_i >= 0)) throw std::invalid_argument("electron.E_i must be >= 0");
  }

  bool aloof() const { return 3.0 * sigma_z < impact_b; }
  double Z0() const { return -impact_b; }

  double initial_energy(const PhysicalConstants& pc) const {
    if (E_i > 0) return E_i;
    return Kinematics::from_beta(beta, pc).gamma_lorentz * pc.electron_rest_energy;
  }
};

inline Setup with_beta(Setup st, double beta) {
  st.beta = beta;
  return st;
}

inline double phi_i(double Y, double Z, const ElectronParams& e) {
  const double sy = e.sigma_y, sz = e.sigma_z;
  const double dz = Z - e.Z0();
  return std::sqrt(2.0 / (pi * sy * sz)) * std::exp(-(Y * Y / (sy * sy) + dz * dz / (sz * sz)));
}

// int dY phi_i(Y, z/2) phi_i(Y - y, z/2)
inline double autoconvolution(double y, double z, const ElectronParams& e) {
  const double dz = 0.5 * z - e.Z0();
  return std::sqrt(2.0 / pi) / e.sigma_z * std::exp(-2.0 * dz * dz / (e.sigma_z * e.sigma_z)) *
         std::exp(-y * y / (2.0 * e.sigma_y * e.sigma_y));
}

// Gauss-Hermite nodes for averages over |phi_i|^2, which only depend on Z for
// planar kernels. Nodes closer to the film than the contact floor are dropped.
struct ZAverage {
  std::vector<double> Z, w;
  double dropped_weight = 0.0;
};

inline ZAverage z_average_nodes(const ElectronParams& e, const NumericsConfig& num) {
  std::vector<double> x, w;
  quad::gauss_hermite(num.z_nodes, x, w);
  ZAverage a;
  const double s = e.sigma_z / std::sqrt(2.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double Z = e.Z0() + s * x[i];
    const double wi = w[i] / std::sqrt(pi);
    if (2.0 * Z < -num.z_floor) {
      a.Z.push_back(Z);
      a.w.push_back(wi);
    } else {
      a.dropped_weight += wi;
    }
  }
  if (a.Z.empty()) throw std::invalid_argument("electron profile lies entirely inside the contact floor");
  return a;
}

struct GammaValue {
  cplx value;
  double modulus_log = 0;
  double phase = 0;
  double error = 0;
};

struct GammaInputs {
  DeltaPoint delta;  // at (x~, y~, z~)
  double D_Z = 0, D_Zp = 0;
  double phi_Z = 0, phi_Zp = 0;
};

inline GammaValue assemble_gamma(const GammaInputs& in) {
  GammaValue g;
  const cplx dS = in.delta.delta_s, dA = in.delta.delta_a;
  g.modulus_log = dS.real() - dA.imag() - 0.5 * (in.D_Z + in.D_Zp);
  g.phase = (in.phi_Z - in.phi_Zp) + dS.imag() + dA.real();
  g.value = std::exp(g.modulus_log) * cplx(std::cos(g.phase), std::sin(g.phase));
  g.error = in.delta.error;
  return g;
}

struct GammaOptions {
  bool skip_phi = false;
};

inline GammaValue gamma(const std::array<double, 3>& R, const std::array<double, 3>& Rp, const Setup& st,
                        const GammaOptions& opt = {}) {
  const double x = R[0] - Rp[0], y = R[1] - Rp[1], z = R[2] + Rp[2];
  GammaInputs in;
  in.delta = delta(st, x, y, z);
  in.D_Z = delta(st, 0.0, 0.0, 2.0 * R[2]).delta_s.real();
  in.D_Zp = delta(st, 0.0, 0.0, 2.0 * Rp[2]).delta_s.real();
  if (!opt.skip_phi && !st.numerics.skip_phi && R[2] != Rp[2]) {
    in.phi_Z = phase_phi(st, R[2]);
    in.phi_Zp = phase_phi(st, Rp[2]);
  }
  return assemble_gamma(in);
}

// 2 i tan(Delta_A); equals 2 (gamma - gamma^M) / (gamma + gamma^M).
inline cplx asym_from_delta(cplx delta_a) { return 2.0 * I * std::tan(delta_a); }

inline cplx asym_gamma(const std::array<double, 3>& R, const std::array<double, 3>& Rp, const Setup& st) {
  return asym_from_delta(delta(st, R[0] - Rp[0], R[1] - Rp[1], R[2] + Rp[2]).delta_a);
}

}  // namespace chirel
