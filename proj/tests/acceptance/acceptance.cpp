// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "chirel/app.hpp"
#include "chirel/reference_oracles.hpp"

using namespace chirel;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string worst;
  double worst_val = 0;

  // records the largest |err|/bound seen
  void le(const std::string& what, double err, double bound) {
    const double r = bound > 0 ? err / bound : (err > 0 ? 1e300 : 0.0);
    if (!(err <= bound)) ok = false;
    if (!(r <= worst_val) || worst.empty()) {
      worst_val = r;
      char b[256];
      std::snprintf(b, sizeof b, "%s err=%.3g bound=%.3g", what.c_str(), err, bound);
      worst = b;
    }
  }
  void truth(const std::string& what, bool v) {
    if (!v) {
      ok = false;
      worst = what;
      worst_val = 1e300;
    }
  }
};

int failures = 0;

void run(int id, const char* name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.worst = std::string("exception: ") + e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s > budget_s) {
    c.ok = false;
    c.worst += " (runtime over budget)";
  }
  if (!c.ok) ++failures;
  std::printf("%s criterion %2d %-28s %7.1fs  %s\n", c.ok ? "PASS" : "FAIL", id, name, s, c.worst.c_str());
  std::fflush(stdout);
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double rel_or_zero(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(b), std::abs(a));
}

MaterialModel lossy() {
  MaterialModel m;
  m.eps_background = 2.5;
  m.oscillators = {{3.0, 1.2, 0.4}};
  m.chiral_oscillators = {{3.0, 2e-3, 0.4}};
  return m;
}

std::vector<double> p_grid(const ElectronParams& e, const PhysicalConstants& pc, int n) {
  const double s = pc.hbar_c / e.sigma_y;
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = -10.0 * s + 20.0 * s * i / (n - 1);
  return g;
}

double peak_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

ZKernelTable scaled(ZKernelTable t, double s) {
  for (auto& k : t.k) {
    k.D0 *= s;
    k.A *= s;
    k.S *= s;
    k.sigma1 *= s;
    k.sigma2 *= s;
  }
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  std::mt19937_64 rng(20240611);
  const Setup def;
  const ElectronParams e_def;

  run(1, "fresnel_limit", 1.0, [&](Check& c) {
    Geometry g;
    g.d = 0.0;
    const MaterialModel m = lossy();
    std::uniform_real_distribution<double> uE(0.05, 20.0), uf(0.0, 4.0);
    int evanescent = 0;
    for (int i = 0; i < 1000; ++i) {
      const double E = uE(rng), kw = E / def.constants.hbar_c, k = uf(rng) * kw;
      if (k > kw * std::sqrt(g.env.eps2)) ++evanescent;
      const auto R = reflection_matrix(E, k, m, g);
      const auto F = fresnel_two_media(E, k, g.env.eps1, g.env.eps2);
      c.le("R_SS", rel(R.R_SS, F.R_SS), 1e-12);
      c.le("R_PP", rel(R.R_PP, F.R_PP), 1e-12);
      c.le("R_SP", std::abs(R.R_SP) + std::abs(R.R_PS), 0.0);
    }
    c.truth("evanescent points sampled", evanescent > 100);
  });

  run(2, "achiral_null_suite", 60.0, [&](Check& c) {
    Setup st;
    st.material = st.material.achiral();
    std::uniform_real_distribution<double> uE(0.1, 15.0), uk(0.0, 0.2), uy(-15.0, 15.0), uz(-30.0, -4.0);
    for (int i = 0; i < 100; ++i) {
      const auto R = reflection_matrix(uE(rng), uk(rng), st.material, st.geometry);
      c.le("R_SP,R_PS", std::abs(R.R_SP) + std::abs(R.R_PS), 0.0);
    }
    for (int i = 0; i < 5; ++i) {
      const std::array<double, 3> R{0.0, uy(rng), 0.5 * uz(rng)}, Rp{0.0, uy(rng), 0.5 * uz(rng)};
      const auto d = delta(st, 0.0, R[1] - Rp[1], R[2] + Rp[2]);
      c.le("Delta_A", std::abs(d.delta_a), 0.0);
      c.le("Asym", std::abs(asym_gamma(R, Rp, st)), 0.0);
    }
    const auto m = lateral_momentum_moments(st, e_def);
    c.le("<P_y>/sqrt(Var)", std::abs(m.mean) / std::sqrt(m.variance), 1e-12);
    const auto d = lateral_momentum_distribution(p_grid(e_def, st.constants, 401), st, e_def);
    const double pk = peak_of(d.density);
    for (std::size_t i = 0; i < d.density.size(); ++i)
      c.le("distribution parity", std::abs(d.density[i] - d.density[d.density.size() - 1 - i]), 1e-9 * pk);
  });

  run(3, "enantiomer_suite", 60.0, [&](Check& c) {
    Setup a, b;
    b.material = a.material.enantiomer();
    std::uniform_real_distribution<double> uy(-12.0, 12.0), uz(-30.0, -5.0), uE(0.2, 12.0), uk(0.0, 0.15);
    for (int i = 0; i < 4; ++i) {
      const double y = uy(rng), z = uz(rng);
      const auto p = delta(a, 0.0, y, z), q = delta(b, 0.0, y, z);
      c.le("Delta_A", rel(-q.delta_a, p.delta_a), 1e-12);
      c.le("Delta_S", rel(q.delta_s, p.delta_s), 1e-12);
      const std::array<double, 3> R{0.0, y, 0.5 * z}, Rp{0.0, -0.5 * y, 0.5 * z};
      c.le("Asym", rel(-asym_gamma(R, Rp, b), asym_gamma(R, Rp, a)), 1e-12);
    }
    for (int i = 0; i < 50; ++i) {
      const double E = uE(rng), k = uk(rng);
      const auto p = reflection_matrix(E, k, a.material, a.geometry);
      const auto q = reflection_matrix(E, k, b.material, b.geometry);
      c.le("R_SS", rel(q.R_SS, p.R_SS), 1e-12);
      c.le("R_PP", rel(q.R_PP, p.R_PP), 1e-12);
      c.le("R_SP", rel(q.R_SP, p.R_SP), 1e-12);
      c.le("R_PS", rel(q.R_PS, p.R_PS), 1e-12);
    }
    const auto ta = z_kernel_table(a, e_def), tb = z_kernel_table(b, e_def);
    for (std::size_t i = 0; i < ta.k.size(); ++i) {
      c.le("A(Z)", rel_or_zero(-tb.k[i].A, ta.k[i].A), 1e-12);
      c.le("S(Z)", rel_or_zero(tb.k[i].S, ta.k[i].S), 1e-12);
      c.le("sigma1", rel_or_zero(tb.k[i].sigma1, ta.k[i].sigma1), 1e-12);
      c.le("sigma2", rel_or_zero(tb.k[i].sigma2, ta.k[i].sigma2), 1e-12);
    }
    const auto ma = lateral_momentum_moments(ta, e_def, a.constants);
    const auto mb = lateral_momentum_moments(tb, e_def, b.constants);
    c.le("<P_y>", rel_or_zero(-mb.mean, ma.mean), 1e-12);
    SpectrumOptions so;
    so.step = 0.05;
    const auto sa = energy_spectrum(a, e_def, so), sb = energy_spectrum(b, e_def, so);
    const double pk = peak_of(sa.density);
    for (std::size_t i = 0; i < sa.density.size(); ++i)
      c.le("energy spectrum", std::abs(sa.density[i] - sb.density[i]), 1e-12 * pk);
  });

  run(4, "parity_suite", 60.0, [&](Check& c) {
    std::uniform_real_distribution<double> uy(0.0, 20.0), uz(-40.0, -3.0);
    for (int i = 0; i < 50; ++i) {
      const double y = uy(rng), z = uz(rng);
      const auto p = delta(def, 0.0, y, z), q = delta(def, 0.0, -y, z);
      c.le("Delta_S even", std::abs(p.delta_s - q.delta_s), 1e-10);
      c.le("Delta_A odd", std::abs(p.delta_a + q.delta_a), 1e-10);
    }
  });

  run(5, "oracle_equivalence", 300.0, [&](Check& c) {
    std::uniform_real_distribution<double> ux(-5.0, 5.0), uy(-15.0, 15.0), uz(-40.0, -4.0);
    for (int i = 0; i < 20; ++i) {
      const double x = i % 4 == 0 ? ux(rng) : 0.0, y = uy(rng), z = uz(rng);
      const auto m = delta(def, x, y, z);
      const auto o = oracle::fixed_grid_delta(def, x, y, z, 4096, 1024);
      c.le("Delta_S vs oracle", rel(m.delta_s, o.delta_s), 1e-6);
      c.le("Delta_A vs oracle", rel(m.delta_a, o.delta_a), 1e-6);
    }
    const double hc = def.constants.hbar_c, hv = hc * def.beta;
    for (double Z : {-6.0, -9.0, -15.0}) {
      const auto k = z_kernels(def, Z);
      auto da = [&](double y) { return delta(def, 0.0, y, 2 * Z).delta_a.real(); };
      auto ds = [&](double y) { return delta(def, 0.0, y, 2 * Z).delta_s.real(); };
      auto dre = [&](double x) { return delta(def, x, 0.0, 2 * Z).delta_s.real(); };
      auto dim = [&](double x) { return delta(def, x, 0.0, 2 * Z).delta_s.imag(); };
      c.le("A vs FD", rel_or_zero(k.A, hc * oracle::finite_difference(da, 0.0, 0.01, 1)), 1e-3);
      c.le("S vs FD", rel_or_zero(k.S, -hc * hc * oracle::finite_difference(ds, 0.0, 0.05, 2)), 1e-3);
      c.le("sigma1 vs FD", rel_or_zero(k.sigma1, hv * oracle::finite_difference(dim, 0.0, 0.05, 1)), 1e-3);
      c.le("sigma2 vs FD", rel_or_zero(k.sigma2, -hv * hv * oracle::finite_difference(dre, 0.0, 0.05, 2)), 1e-3);
    }
  });

  run(6, "identity_and_bounds", 120.0, [&](Check& c) {
    GammaOptions o;
    o.skip_phi = true;
    std::uniform_real_distribution<double> ux(-3.0, 3.0), uy(-15.0, 15.0), uz(-20.0, -3.0);
    for (int i = 0; i < 5; ++i) {
      const std::array<double, 3> R{ux(rng), uy(rng), uz(rng)};
      c.truth("gamma(R,R) == 1", gamma(R, R, def).value == cplx(1.0, 0.0));
    }
    for (int i = 0; i < 100; ++i) {
      const std::array<double, 3> R{0.0, uy(rng), uz(rng)}, Rp{0.0, uy(rng), uz(rng)};
      const auto g = gamma(R, Rp, def, o);
      c.le("|gamma| - 1", std::max(0.0, std::abs(g.value) - 1.0), 1e-10);
      if (i < 20) {
        const std::array<double, 3> Rm{0.0, -R[1], R[2]}, Rpm{0.0, -Rp[1], Rp[2]};
        const cplx gm = gamma(Rm, Rpm, def, o).value;
        const DeltaPoint d = delta(def, 0.0, R[1] - Rp[1], R[2] + Rp[2]);
        const cplx a = asym_gamma(R, Rp, def);
        c.le("Asym vs 2i tan", std::abs(a - 2.0 * I * std::tan(d.delta_a)), 1e-8 * std::abs(a) + 1e-300);
        c.le("Asym vs mirror ratio", std::abs(a - 2.0 * (g.value - gm) / (g.value + gm)), 1e-8 * std::abs(a) + 1e-300);
      }
    }
  });

  run(7, "normalization", 300.0, [&](Check& c) {
    const auto d = lateral_momentum_distribution(p_grid(e_def, def.constants, 801), def, e_def);
    c.le("int dP/dP_y - 1", std::abs(d.normalization_defect), 1e-4);
    const auto s = energy_spectrum(def, e_def);
    c.le("int dP/dE - 1", std::abs(s.normalization_defect), 1e-4);
  });

  run(8, "two_route_moments", 600.0, [&](Check& c) {
    const double Ei = e_def.initial_energy(def.constants);
    const auto t = z_kernel_table(def, e_def);
    const auto mp = lateral_momentum_moments(t, e_def, def.constants);
    const auto me = energy_moments(t);
    const auto d = lateral_momentum_distribution(p_grid(e_def, def.constants, 801), def, e_def);
    const double p1 = oracle::distribution_moments(d, 1);
    c.le("<P_y>", rel_or_zero(p1, mp.mean), 1e-3);
    c.le("Var P_y", rel_or_zero(oracle::distribution_moments(d, 2, p1), mp.variance), 1e-3);
    const auto s = energy_spectrum(def, e_def);
    const double e1 = oracle::distribution_moments(s, 1, Ei);
    c.le("<E> - E_i", rel_or_zero(e1, me.mean), 1e-3);
    c.le("Var E", rel_or_zero(oracle::distribution_moments(s, 2, Ei + e1), me.variance), 1e-3);
  });

  run(9, "energy_shift_sign", 120.0, [&](Check& c) {
    for (double b : {0.3, 0.5, 0.7}) {
      ElectronParams e = e_def;
      e.beta = b;
      const auto t = z_kernel_table(def, e);
      for (const auto& k : t.k) c.truth("sigma1 < 0", k.sigma1 < 0.0);
      const double m = energy_moments(t).mean;
      char w[64];
      std::snprintf(w, sizeof w, "<E>-E_i at beta=%.1f", b);
      c.truth(w, m < 0.0);
    }
  });

  run(10, "sweep_trends", 1800.0, [&](Check& c) {
    const auto tight = parse_config(std::string(CHIREL_SOURCE_DIR) + "/configs/sweep_tight.ini");
    const auto wide = parse_config(std::string(CHIREL_SOURCE_DIR) + "/configs/sweep_wide.ini");
    const double L0 = tight.L_list.front();
    for (double b : tight.beta_list) {
      const Setup st = tight.setup(L0, b);
      const ElectronParams et = tight.electron_at(b), ew = wide.electron_at(b);
      const auto tt = z_kernel_table(st, et), tw = z_kernel_table(wide.setup(L0, b), ew);
      double prev_p = 0.0, prev_d = 0.0;
      const double d0 = std::abs(delta(st, 0.0, 5.0, -8.0).delta_a.real());
      for (double L : tight.L_list) {
        const double s = L / L0;
        const auto mt = lateral_momentum_moments(scaled(tt, s), et, st.constants);
        const auto mw = lateral_momentum_moments(scaled(tw, s), ew, st.constants);
        const double P0 = Kinematics::from_beta(b, st.constants).P0c;
        const double p = std::abs(mt.mean) / P0;
        Setup sl = st;
        sl.geometry.L = L;
        const double dA = std::abs(delta(sl, 0.0, 5.0, -8.0).delta_a.real());
        char w[96];
        std::snprintf(w, sizeof w, "(a) |<P_y>|/P0 increasing, beta=%.1f L=%g", b, L);
        c.truth(w, p > prev_p);
        std::snprintf(w, sizeof w, "(b) |Delta_A| increasing, beta=%.1f L=%g", b, L);
        c.truth(w, dA > prev_d && std::abs(dA - s * d0) <= 1e-9 * dA);
        std::snprintf(w, sizeof w, "(c) peak factor ratio, beta=%.1f L=%g", b, L);
        c.truth(w, std::abs(mw.peak_factor) >= 10.0 * std::abs(mt.peak_factor));
        prev_p = p;
        prev_d = dA;
      }
    }
  });

  run(11, "weak_coupling_sum_rule", 300.0, [&](Check& c) {
    const auto r = eels_weak_coupling(def, e_def);
    double I = 0.0;
    for (std::size_t i = 1; i < r.gamma.axis.size(); ++i)
      I += 0.5 * (r.gamma.axis[i] - r.gamma.axis[i - 1]) * (r.gamma.density[i] + r.gamma.density[i - 1]);
    const auto t = z_kernel_table(def, e_def);
    double D = 0.0;
    for (std::size_t i = 0; i < t.k.size(); ++i) D += t.nodes.w[i] * t.k[i].D0;
    c.le("int Gamma vs <Delta_S>", rel_or_zero(I, D), 1e-4);

    // weak regime: short interaction length
    Setup w = def;
    w.geometry.L = 20.0;
    const auto rw = eels_weak_coupling(w, e_def);
    c.truth("max|Delta| < 0.01", rw.max_abs_delta < 0.01);
    SpectrumOptions so;
    so.step = 0.01;
    so.max_loss = w.E_max();
    const auto s = energy_spectrum(w, e_def, so);
    const double gp = peak_of(rw.gamma.density);
    // s.density runs from E_i - max_loss up to E_i; Gamma runs over losses 0..E_max
    const std::size_t n = s.density.size();
    for (std::size_t m = 1; m < std::min(n, rw.gamma.density.size()); ++m)
      c.le("Gamma vs exact spectrum", std::abs(s.density[n - 1 - m] - rw.gamma.density[m]), 0.02 * gp);
  });

  run(12, "determinism", 300.0, [&](Check& c) {
    const fs::path work = fs::temp_directory_path() / "chirel_acceptance_determinism";
    fs::remove_all(work);
    const std::string cfg = std::string(CHIREL_SOURCE_DIR) + "/configs/sweep_tight.ini";
    std::string h[3];
    const int threads[3] = {1, 1, 4};
    for (int i = 0; i < 3; ++i) {
      const fs::path out = work / std::to_string(i);
      const std::string cmd = std::string("\"") + CHIREL_CLI + "\" observables-sweep --config \"" + cfg +
                              "\" --out \"" + out.string() + "\" --threads " + std::to_string(threads[i]) +
                              " > /dev/null";
      const int rc = std::system(cmd.c_str());
      c.truth("cli exit status 0", rc == 0);
      h[i] = app::sha256_hex(slurp(out / "observables_sweep.csv"));
    }
    c.truth("repeat run checksum", h[0] == h[1]);
    c.truth("4-thread checksum", h[0] == h[2]);
    c.truth("non-empty output", h[0] != app::sha256_hex(""));
  });

  return failures == 0 ? 0 : 1;
}
