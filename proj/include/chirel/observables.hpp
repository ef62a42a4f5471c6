#pragma once

// Lateral momentum and energy-loss observables averaged over the incident
// profile. Moments come from the analytic Z kernels; distributions come from
// the single-scattering densities h (momentum) and g (energy) expanded as a
// compound Poisson series around the unscattered part.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "chirel/electron_state.hpp"
#include "chirel/response.hpp"

namespace chirel {

struct Distribution1D {
  std::vector<double> axis;
  std::vector<double> density;
  double normalization_defect = 0;
  // zero-loss peak of the energy spectrum (not part of density)
  double point_mass_position = 0;
  double point_mass_weight = 0;
  double min_relative_density = 0;  // most negative density / max density
};

struct MomentReport {
  double mean = 0;
  double variance = 0;
  double peak_factor = 0;
  double initial_variance = 0;
  double dropped_weight = 0;
  bool converged = true;
};

struct ZKernelTable {
  ZAverage nodes;
  std::vector<ZKernels> k;
};

inline ZKernelTable z_kernel_table(const Setup& st, const ElectronParams& e) {
  const Setup s = with_beta(st, e.beta);
  ZKernelTable t;
  t.nodes = z_average_nodes(e, s.numerics);
  for (double Z : t.nodes.Z) t.k.push_back(z_kernels(s, Z));
  return t;
}

inline MomentReport lateral_momentum_moments(const ZKernelTable& t, const ElectronParams& e,
                                             const PhysicalConstants& pc) {
  MomentReport r;
  quad::CompensatedSum<double> m, m2, sp;
  for (std::size_t i = 0; i < t.k.size(); ++i) {
    const double w = t.nodes.w[i];
    m.add(w * t.k[i].A);
    m2.add(w * t.k[i].A * t.k[i].A);
    sp.add(w * t.k[i].S);
    r.converged = r.converged && t.k[i].converged;
  }
  const double mean = m.result();
  r.initial_variance = (pc.hbar_c / e.sigma_y) * (pc.hbar_c / e.sigma_y);
  r.mean = mean;
  r.variance = r.initial_variance + sp.result() + (m2.result() - mean * mean);
  r.peak_factor = mean / std::sqrt(r.variance);
  r.dropped_weight = t.nodes.dropped_weight;
  return r;
}

inline MomentReport lateral_momentum_moments(const Setup& st, const ElectronParams& e) {
  return lateral_momentum_moments(z_kernel_table(st, e), e, st.constants);
}

// mean is the shift <E> - E_i
inline MomentReport energy_moments(const ZKernelTable& t) {
  MomentReport r;
  quad::CompensatedSum<double> m, m2, sp;
  for (std::size_t i = 0; i < t.k.size(); ++i) {
    const double w = t.nodes.w[i];
    m.add(w * t.k[i].sigma1);
    m2.add(w * t.k[i].sigma1 * t.k[i].sigma1);
    sp.add(w * t.k[i].sigma2);
    r.converged = r.converged && t.k[i].converged;
  }
  r.mean = m.result();
  r.variance = sp.result() + (m2.result() - r.mean * r.mean);
  r.dropped_weight = t.nodes.dropped_weight;
  return r;
}

inline MomentReport energy_moments(const Setup& st, const ElectronParams& e) {
  return energy_moments(z_kernel_table(st, e));
}

namespace detail {

// sum_{n>=1} f^{*n}/n! on a uniform grid with spacing h. f has 2m+1 samples
// centred on 0 when centred is true, else m+1 samples starting at 0; the
// result is truncated to max_len samples (same origin).
inline std::vector<double> compound_poisson(const std::vector<double>& f, double h, bool centred,
                                            std::size_t max_len, double total) {
  std::vector<double> out(max_len, 0.0);
  const std::size_t nf = f.size();
  const long off_f = centred ? static_cast<long>((nf - 1) / 2) : 0;
  const long off_o = centred ? static_cast<long>((max_len - 1) / 2) : 0;
  std::vector<double> term(f);  // f^{*n}/n!, sample i sits at offset i - off_t
  long off_t = off_f;
  double mag = std::abs(total);
  for (int n = 1;; ++n) {
    for (std::size_t i = 0; i < term.size(); ++i) {
      const long j = static_cast<long>(i) - off_t + off_o;
      if (j >= 0 && j < static_cast<long>(max_len)) out[j] += term[i];
    }
    mag *= std::abs(total) / (n + 1);
    if (mag < 1e-17 || n >= 60) break;
    std::vector<double> next(term.size() + nf - 1, 0.0);
    for (std::size_t i = 0; i < term.size(); ++i) {
      if (term[i] == 0.0) continue;
      const double ti = term[i] * h / (n + 1);
      for (std::size_t k = 0; k < nf; ++k) next[i + k] += ti * f[k];
    }
    off_t += off_f;
    if (!centred) {
      if (next.size() > max_len) next.resize(max_len);
    } else {
      // keep offsets within +-max_len; the tails there are negligible
      const long lo = std::max(0L, off_t - static_cast<long>(max_len));
      const long hi = std::min(static_cast<long>(next.size()), off_t + static_cast<long>(max_len) + 1);
      next = std::vector<double>(next.begin() + lo, next.begin() + hi);
      off_t -= lo;
    }
    term.swap(next);
  }
  return out;
}

inline double normal_pdf(double x, double mu, double s) {
  const double u = (x - mu) / s;
  return std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * pi));
}

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  quad::CompensatedSum<double> s;
  for (std::size_t i = 1; i < x.size(); ++i) s.add(0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]));
  return s.result();
}

inline double min_relative(const std::vector<double>& y) {
  double mx = 0.0, mn = 0.0;
  for (double v : y) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  return mx > 0 ? mn / mx : 0.0;
}

// E nodes and weights from the adaptive partition of the Z-averaged D0
// integrand at the shallowest and deepest depth.
inline void energy_nodes(const Setup& st, double z_near, double z_far, std::vector<double>& E, std::vector<double>& w) {
  std::vector<std::pair<double, double>> panels;
  auto inner = [&](double, double q, double s, double) {
    quad::RVec<2> r;
    r[0] = std::exp(-q * z_near) / q * s;
    r[1] = std::exp(-q * z_far) / q * s;
    return r;
  };
  auto outer = [](double, const quad::RVec<2>& v) { return v; };
  nested_spectral<quad::RVec<2>, 2>(st, -z_near, 0.0, 0.0, inner, outer, std::max(st.numerics.rel_tol, 1e-10),
                                    1e-300, &panels);
  gk_nodes(panels, E, w);
}

}  // namespace detail

struct LateralOptions {
  int max_half_points = 2048;  // per depth, on each side of k = 0
};

// Density of P_y c (eV) on P_grid.
inline Distribution1D lateral_momentum_distribution(const std::vector<double>& P_grid, const Setup& st_in,
                                                    const ElectronParams& e, const LateralOptions& opt = {}) {
  e.validate();
  const Setup st = with_beta(st_in, e.beta);
  st.validate();
  if (P_grid.size() < 3) throw std::invalid_argument("lateral_momentum_distribution: grid too short");
  for (std::size_t i = 1; i < P_grid.size(); ++i)
    if (!(P_grid[i] > P_grid[i - 1])) throw std::invalid_argument("lateral_momentum_distribution: grid must increase");
  const double hc = st.constants.hbar_c;
  const double sP = hc / e.sigma_y;
  if (P_grid.front() > -6.0 * sP || P_grid.back() < 6.0 * sP)
    throw std::invalid_argument("lateral_momentum_distribution: grid must cover +-6 initial widths");

  const ZAverage za = z_average_nodes(e, st.numerics);
  const double zn = 2.0 * std::abs(za.Z.back()), zf = 2.0 * std::abs(za.Z.front());
  std::vector<double> En, Ew;
  detail::energy_nodes(st, zn, zf, En, Ew);
  const double C = st.prefactor();

  // common k spacing, per-depth extent
  const double sk = 1.0 / e.sigma_y;
  double dk = std::min(0.25 * sk, detail::ky_max(st, -zf) / 256.0);
  const double kmax_all = detail::ky_max(st, -zn);
  std::size_t nmax = static_cast<std::size_t>(std::ceil(kmax_all / dk));
  if (nmax > static_cast<std::size_t>(opt.max_half_points)) {
    nmax = opt.max_half_points;
    dk = kmax_all / nmax;
  }
  // kernel table on E nodes x |k| grid
  std::vector<double> tq(En.size() * (nmax + 1)), ts(tq.size()), ta(tq.size());
  for (std::size_t i = 0; i < En.size(); ++i) {
    const ElectronLine line(st, En[i]);
    for (std::size_t j = 0; j <= nmax; ++j) {
      const double k = j * dk;
      const auto [s, a] = line.kernel(k);
      tq[i * (nmax + 1) + j] = line.q(k);
      ts[i * (nmax + 1) + j] = s;
      ta[i * (nmax + 1) + j] = a;
    }
  }

  Distribution1D d;
  d.axis = P_grid;
  d.density.assign(P_grid.size(), 0.0);
  double defect = 0.0;
  for (std::size_t zi = 0; zi < za.Z.size(); ++zi) {
    const double z = 2.0 * za.Z[zi];
    const std::size_t n = std::min(nmax, static_cast<std::size_t>(std::ceil(detail::ky_max(st, z) / dk)));
    std::vector<double> h(2 * n + 1, 0.0);
    for (std::size_t j = 0; j <= n; ++j) {
      double s = 0.0, a = 0.0;
      for (std::size_t i = 0; i < En.size(); ++i) {
        const std::size_t idx = i * (nmax + 1) + j;
        const double env = std::exp(tq[idx] * z) / tq[idx];
        s += Ew[i] * env * ts[idx];
        a += Ew[i] * env * ta[idx];
      }
      h[n + j] = 0.5 * C * (s + a);
      h[n - j] = 0.5 * C * (s - a);
    }
    quad::CompensatedSum<double> tot;
    for (double v : h) tot.add(v * dk);
    const double D0 = tot.result();
    const std::size_t len = 6 * n + 1;
    const auto H = detail::compound_poisson(h, dk, true, len, D0);
    const double w = za.w[zi] * std::exp(-D0);
    const std::size_t oH = (len - 1) / 2;
    for (std::size_t p = 0; p < P_grid.size(); ++p) {
      double acc = detail::normal_pdf(P_grid[p], 0.0, sP);
      for (std::size_t m = 0; m < len; ++m) {
        if (H[m] == 0.0) continue;
        const double k = (static_cast<double>(m) - static_cast<double>(oH)) * dk;
        acc += H[m] * dk * detail::normal_pdf(P_grid[p], hc * k, sP);
      }
      d.density[p] += w * acc;
    }
    defect += za.w[zi];
  }
  // dropped Gauss-Hermite weight is reported, not renormalized
  d.normalization_defect = detail::trapezoid(d.axis, d.density) - defect;
  d.min_relative_density = detail::min_relative(d.density);
  return d;
}

// Single-scattering energy density g(eps, z) on eps_m = m * step, m = 0..M,
// using the ky nodes of a verified kernel grid.
struct LossTable {
  double step = 0;
  std::vector<double> eps;
  std::vector<std::vector<double>> g;  // per depth
};

inline LossTable loss_table(const Setup& st, const std::vector<double>& depths_z, double step, double eps_max) {
  double zn = 1e300, zf = 0.0;
  for (double z : depths_z) {
    detail::check_z(st, z);
    zn = std::min(zn, std::abs(z));
    zf = std::max(zf, std::abs(z));
  }
  GridSpec gs;
  gs.z_near = zn;
  gs.z_far = zf;
  const KernelGrid kg = build_kernel_grid(st, gs);
  const std::size_t M = static_cast<std::size_t>(std::ceil(eps_max / step - 1e-9));
  LossTable t;
  t.step = eps_max / M;
  t.eps.resize(M + 1);
  for (std::size_t m = 0; m <= M; ++m) t.eps[m] = m * t.step;
  t.g.assign(depths_z.size(), std::vector<double>(M + 1, 0.0));
  const double C = st.prefactor();
  const std::size_t nk = kg.nk();
  std::vector<double> qv(nk), sv(nk);
  for (std::size_t m = 1; m <= M; ++m) {
    if (t.eps[m] > st.E_max() * (1 + 1e-12)) continue;
    const ElectronLine line(st, std::min(t.eps[m], st.E_max()));
    for (std::size_t j = 0; j < nk; ++j) {
      qv[j] = line.q(kg.ky_nodes[j]);
      sv[j] = line.kernel(kg.ky_nodes[j]).first * kg.ky_weights[j];
    }
    for (std::size_t zi = 0; zi < depths_z.size(); ++zi) {
      double s = 0.0;
      for (std::size_t j = 0; j < nk; ++j) s += std::exp(qv[j] * depths_z[zi]) / qv[j] * sv[j];
      t.g[zi][m] = C * s;
    }
  }
  return t;
}

struct SpectrumOptions {
  double step = 0.01;       // eV
  double max_loss = 0.0;    // 0 selects 2 E_max
};

// dP/dE on E = E_i - eps; the zero-loss part is returned as a point mass.
inline Distribution1D energy_spectrum(const Setup& st_in, const ElectronParams& e, const SpectrumOptions& opt = {}) {
  e.validate();
  const Setup st = with_beta(st_in, e.beta);
  st.validate();
  if (!(opt.step > 0)) throw std::invalid_argument("energy_spectrum: step must be > 0");
  const double Ei = e.initial_energy(st.constants);
  const ZAverage za = z_average_nodes(e, st.numerics);
  std::vector<double> zs;
  for (double Z : za.Z) zs.push_back(2.0 * Z);
  const LossTable lt = loss_table(st, zs, opt.step, st.E_max());
  const double max_loss = opt.max_loss > 0 ? opt.max_loss : 2.0 * st.E_max();
  const std::size_t len = static_cast<std::size_t>(std::floor(max_loss / lt.step + 1e-9)) + 1;

  std::vector<double> cont(len, 0.0);
  double point = 0.0;
  for (std::size_t zi = 0; zi < zs.size(); ++zi) {
    const auto& g = lt.g[zi];
    quad::CompensatedSum<double> tot;
    for (double v : g) tot.add(v * lt.step);
    const double D0 = tot.result();
    const auto G = detail::compound_poisson(g, lt.step, false, len, D0);
    const double w = za.w[zi] * std::exp(-D0);
    point += w;
    for (std::size_t m = 0; m < len; ++m) cont[m] += w * G[m];
  }
  Distribution1D d;
  d.axis.resize(len);
  d.density.resize(len);
  for (std::size_t m = 0; m < len; ++m) {
    d.axis[len - 1 - m] = Ei - m * lt.step;
    d.density[len - 1 - m] = cont[m];
  }
  d.point_mass_position = Ei;
  d.point_mass_weight = point;
  d.normalization_defect = point + detail::trapezoid(d.axis, d.density) - (1.0 - za.dropped_weight);
  d.min_relative_density = detail::min_relative(d.density);
  return d;
}

struct EelsResult {
  Distribution1D gamma;  // per eV on the loss axis
  double max_abs_delta = 0;
  bool weak_coupling = true;
};

// First-order loss probability <g(eps, 2Z)> over the profile.
inline EelsResult eels_weak_coupling(const Setup& st_in, const ElectronParams& e, double step = 0.01) {
  e.validate();
  const Setup st = with_beta(st_in, e.beta);
  st.validate();
  const ZAverage za = z_average_nodes(e, st.numerics);
  std::vector<double> zs;
  for (double Z : za.Z) zs.push_back(2.0 * Z);
  const LossTable lt = loss_table(st, zs, step, st.E_max());
  EelsResult r;
  r.gamma.axis = lt.eps;
  r.gamma.density.assign(lt.eps.size(), 0.0);
  for (std::size_t zi = 0; zi < zs.size(); ++zi) {
    for (std::size_t m = 0; m < lt.eps.size(); ++m) r.gamma.density[m] += za.w[zi] * lt.g[zi][m];
    // |Delta_S(0,0,2Z)| bounds |Delta| over pairs at that depth
    quad::CompensatedSum<double> tot;
    for (double v : lt.g[zi]) tot.add(v * lt.step);
    r.max_abs_delta = std::max(r.max_abs_delta, std::abs(tot.result()));
  }
  r.weak_coupling = r.max_abs_delta < 0.1;
  r.gamma.min_relative_density = detail::min_relative(r.gamma.density);
  return r;
}

}  // namespace chirel
