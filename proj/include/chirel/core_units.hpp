#pragma once

// Working units: energies in eV, lengths in nm, momenta as P*c in eV.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace chirel {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

struct PhysicalConstants {
  double hbar_c = 197.3269804;            // eV nm
  double electron_rest_energy = 510998.95; // eV
  double fine_structure = 1.0 / 137.035999084;
  double speed_of_light = 299792458.0;     // m/s, informational only

  void validate() const {
    if (!(hbar_c > 0) || !(electron_rest_energy > 0) || !(fine_structure > 0) ||
        !(speed_of_light > 0))
      throw std::invalid_argument("physical constants must be strictly positive");
    if (std::abs(fine_structure * 137.0 - 1.0) > 0.01)
      throw std::invalid_argument("fine_structure must lie within 1% of 1/137");
  }
};

// Square root on the branch Im(w) >= 0; on the real axis Re(w) >= 0.
inline cplx sqrt_upper(cplx z) {
  cplx w = std::sqrt(z);
  if (w.imag() < 0.0 || (w.imag() == 0.0 && w.real() < 0.0)) w = -w;
  return w;
}

inline bool is_finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Relativistic bookkeeping for an electron moving with speed beta*c.
struct Kinematics {
  double beta;
  double gamma_lorentz;
  double P0c;  // reference momentum times c, eV
  double E0;   // V * P0, eV

  static Kinematics from_beta(double beta, const PhysicalConstants& pc) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
    const double g = 1.0 / std::sqrt(1.0 - beta * beta);
    const double p = pc.electron_rest_energy * beta * g;
    return {beta, g, p, beta * p};
  }
};

}  // namespace chirel
