#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "chirel/core_units.hpp"

namespace chirel {

struct LorentzOscillator {
  double E0;     // resonance, eV
  double f;      // strength, eV^2
  double gamma;  // damping, eV
};

// kappa(E) = kappa_A E0 E / (E0^2 - E^2 - i gamma E)
struct CondonOscillator {
  double E0;
  double kappa_A;
  double gamma;
};

struct MaterialModel {
  double eps_background = 2.0;
  std::vector<LorentzOscillator> oscillators;
  std::vector<CondonOscillator> chiral_oscillators;
  double mu = 1.0;

  void validate() const {
    if (!std::isfinite(eps_background)) throw std::invalid_argument("eps_background must be finite");
    if (mu != 1.0) throw std::invalid_argument("mu is fixed to 1");
    for (const auto& o : oscillators)
      if (!(o.E0 > 0) || !(o.gamma > 0) || !(o.f >= 0))
        throw std::invalid_argument("oscillator needs E0 > 0, gamma > 0, f >= 0");
    for (const auto& o : chiral_oscillators)
      if (!(o.E0 > 0) || !(o.gamma > 0) || !std::isfinite(o.kappa_A))
        throw std::invalid_argument("chiral oscillator needs E0 > 0, gamma > 0, finite kappa_A");
  }

  double largest_resonance() const {
    double m = 0.0;
    for (const auto& o : oscillators) m = std::max(m, o.E0);
    for (const auto& o : chiral_oscillators) m = std::max(m, o.E0);
    return m;
  }

  bool chiral() const {
    return std::any_of(chiral_oscillators.begin(), chiral_oscillators.end(),
                       [](const CondonOscillator& o) { return o.kappa_A != 0.0; });
  }

  MaterialModel enantiomer() const {
    MaterialModel m = *this;
    for (auto& o : m.chiral_oscillators) o.kappa_A = -o.kappa_A;
    return m;
  }

  MaterialModel achiral() const {
    MaterialModel m = *this;
    m.chiral_oscillators.clear();
    return m;
  }
};

struct Environment {
  double eps1 = 1.0;
  double eps2 = 1.48;

  void validate() const {
    if (!(eps1 >= 1.0) || !(eps2 >= 1.0)) throw std::invalid_argument("eps1 and eps2 must be >= 1");
  }
};

// Film used by the shipped configuration: one Lorentz and one Condon
// oscillator at 3.54 eV.
inline MaterialModel default_material() {
  MaterialModel m;
  m.eps_background = 2.0;
  m.oscillators = {{3.54, 0.9, 0.3}};
  m.chiral_oscillators = {{3.54, 8.5e-5, 0.3}};
  return m;
}

inline cplx permittivity(const MaterialModel& m, double E) {
  if (!(E > 0)) throw std::invalid_argument("permittivity: E must be positive");
  cplx eps = m.eps_background;
  for (const auto& o : m.oscillators) eps += o.f / cplx(o.E0 * o.E0 - E * E, -o.gamma * E);
  return eps;
}

inline cplx pasteur(const MaterialModel& m, double E) {
  if (!(E > 0)) throw std::invalid_argument("pasteur: E must be positive");
  cplx k = 0.0;
  for (const auto& o : m.chiral_oscillators)
    k += (o.kappa_A * o.E0 * E) / cplx(o.E0 * o.E0 - E * E, -o.gamma * E);
  return k;
}

struct PassivityReport {
  double min_im_eps = std::numeric_limits<double>::infinity();
  double E_at_min = 0.0;
  std::vector<double> violations;  // energies where Im eps <= 0
  bool borderline = false;         // min Im eps tiny compared with |eps|

  bool ok() const { return violations.empty(); }
};

inline PassivityReport passivity_report(const MaterialModel& m, const std::vector<double>& grid,
                                        double borderline_ratio = 1e-6) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0) || (i > 0 && !(grid[i] > grid[i - 1])))
      throw std::invalid_argument("passivity_report: grid must be positive and increasing");
  }
  PassivityReport r;
  double max_abs = 0.0;
  for (double E : grid) {
    const cplx eps = permittivity(m, E);
    max_abs = std::max(max_abs, std::abs(eps));
    if (eps.imag() < r.min_im_eps) {
      r.min_im_eps = eps.imag();
      r.E_at_min = E;
    }
    if (eps.imag() <= 0.0) r.violations.push_back(E);
  }
  r.borderline = r.min_im_eps < borderline_ratio * max_abs;
  return r;
}

}  // namespace chirel
