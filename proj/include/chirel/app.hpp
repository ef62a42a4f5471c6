#pragma once

// Subcommand runner behind the command line tool. Every table goes out as
// CSV (or JSON rows) plus a <name>.meta.json sidecar; a manifest.json lists
// each file with its SHA-256.

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "chirel/config.hpp"
#include "chirel/electron_state.hpp"
#include "chirel/observables.hpp"
#include "chirel/reference_oracles.hpp"
#include "chirel/response.hpp"

namespace chirel::app {

inline constexpr const char* tool_version = "0.1.0";

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &n, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < n; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

inline std::string file_sha256(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

struct RunOptions {
  std::string out_dir;  // empty: output.directory from the config
  int threads = 1;
  bool skip_phi = false;
};

struct OutputFile {
  std::string path;
  std::string sha256;
  std::size_t rows = 0;
  bool partial = false;
};

struct RunManifest {
  std::string subcommand;
  std::string config_hash;
  std::string tool_version = app::tool_version;
  std::vector<OutputFile> files;
  std::vector<std::pair<std::string, double>> stage_seconds;
  bool partial = false;
};

// Thrown when some output could only be written in part.
struct PartialResult : std::runtime_error {
  RunManifest manifest;
  PartialResult(const std::string& w, RunManifest m) : std::runtime_error(w), manifest(std::move(m)) {}
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to slot i only; the first failure (lowest i) is rethrown.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  std::vector<std::exception_ptr> errs(n);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errs[i] = std::current_exception();
    }
  };
  const std::size_t nt = std::min<std::size_t>(std::max(threads, 1), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

struct Table {
  Table() = default;
  Table(std::string n, std::vector<std::string> c, std::vector<std::string> u)
      : name(std::move(n)), columns(std::move(c)), units(std::move(u)) {}

  std::string name;
  std::vector<std::string> columns, units;
  std::vector<std::vector<double>> rows;
  bool partial = false;
  std::string partial_reason;
  nlohmann::json extra = nlohmann::json::object();
};

class Runner {
 public:
  Runner(const SimulationConfig& cfg, const RunOptions& opt, std::string sub)
      : cfg_(cfg), opt_(opt), dir_(opt.out_dir.empty() ? cfg.output.directory : opt.out_dir) {
    if (opt_.skip_phi) cfg_.numerics.skip_phi = true;
    man_.subcommand = std::move(sub);
    man_.config_hash = sha256_hex(cfg_.canonical());
    std::filesystem::create_directories(dir_);
  }

  const SimulationConfig& cfg() const { return cfg_; }
  const std::filesystem::path& dir() const { return dir_; }
  int threads() const { return opt_.threads; }

  template <class F>
  auto stage(const std::string& name, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      man_.stage_seconds.push_back({name, secs(t0)});
    } else {
      auto r = fn();
      man_.stage_seconds.push_back({name, secs(t0)});
      return r;
    }
  }

  std::string format(double v) const {
    char b[64];
    std::snprintf(b, sizeof b, "%.*g", cfg_.output.precision, v);
    return b;
  }

  void write(const Table& t) {
    const bool json = cfg_.output.format == "json";
    const std::string fname = t.name + (json ? ".json" : ".csv");
    std::ostringstream o;
    if (json) {
      o << "{\"columns\": [";
      for (std::size_t i = 0; i < t.columns.size(); ++i) o << (i ? ", " : "") << '"' << t.columns[i] << '"';
      o << "],\n\"rows\": [\n";
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        o << "  [";
        for (std::size_t i = 0; i < t.rows[r].size(); ++i) o << (i ? ", " : "") << json_number(t.rows[r][i]);
        o << "]" << (r + 1 < t.rows.size() ? "," : "") << "\n";
      }
      o << "],\n\"partial\": " << (t.partial ? "true" : "false") << "}\n";
    } else {
      for (std::size_t i = 0; i < t.columns.size(); ++i) o << (i ? "," : "") << t.columns[i];
      o << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) o << (i ? "," : "") << format(row[i]);
        o << '\n';
      }
      if (t.partial) o << "# PARTIAL: " << t.partial_reason << '\n';
    }
    const std::string body = o.str();
    {
      std::ofstream f(dir_ / fname, std::ios::binary);
      f << body;
      if (!f) throw std::runtime_error("cannot write " + (dir_ / fname).string());
    }
    nlohmann::ordered_json meta;
    meta["file"] = fname;
    meta["subcommand"] = man_.subcommand;
    meta["config_hash"] = man_.config_hash;
    meta["tool_version"] = tool_version;
    meta["rows"] = t.rows.size();
    meta["partial"] = t.partial;
    if (t.partial) meta["partial_reason"] = t.partial_reason;
    nlohmann::ordered_json units = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < t.columns.size(); ++i) units[t.columns[i]] = t.units[i];
    meta["units"] = units;
    if (!t.extra.empty()) meta["notes"] = t.extra;
    {
      std::ofstream f(dir_ / (t.name + ".meta.json"), std::ios::binary);
      f << meta.dump(2) << '\n';
    }
    man_.files.push_back({fname, sha256_hex(body), t.rows.size(), t.partial});
    man_.files.push_back({t.name + ".meta.json", file_sha256(dir_ / (t.name + ".meta.json")), 0, false});
    if (t.partial) man_.partial = true;
  }

  // Pre-formatted text file with a sidecar.
  void write_raw(const std::string& fname, const std::string& body, std::size_t rows, const nlohmann::json& notes) {
    {
      std::ofstream f(dir_ / fname, std::ios::binary);
      f << body;
      if (!f) throw std::runtime_error("cannot write " + (dir_ / fname).string());
    }
    const std::string stem = std::filesystem::path(fname).stem().string();
    nlohmann::ordered_json meta;
    meta["file"] = fname;
    meta["subcommand"] = man_.subcommand;
    meta["config_hash"] = man_.config_hash;
    meta["tool_version"] = tool_version;
    meta["rows"] = rows;
    meta["notes"] = notes;
    {
      std::ofstream f(dir_ / (stem + ".meta.json"), std::ios::binary);
      f << meta.dump(2) << '\n';
    }
    man_.files.push_back({fname, sha256_hex(body), rows, false});
    man_.files.push_back({stem + ".meta.json", file_sha256(dir_ / (stem + ".meta.json")), 0, false});
  }

  RunManifest finish() {
    nlohmann::ordered_json m;
    m["subcommand"] = man_.subcommand;
    m["config_hash"] = man_.config_hash;
    m["tool_version"] = man_.tool_version;
    m["partial"] = man_.partial;
    m["files"] = nlohmann::ordered_json::array();
    for (const auto& f : man_.files)
      m["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"rows", f.rows}, {"partial", f.partial}});
    m["stages"] = nlohmann::ordered_json::array();
    for (const auto& [n, s] : man_.stage_seconds) m["stages"].push_back({{"name", n}, {"seconds", s}});
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    f << m.dump(2) << '\n';
    if (man_.partial) throw PartialResult("some outputs are partial (quadrature did not converge)", man_);
    return man_;
  }

  // Kernel grid for the current material and beta, reused from
  // <dir>/cache when the stored key matches.
  KernelGrid kernel_grid(const Setup& st, const GridSpec& spec) {
    char b[256];
    std::snprintf(b, sizeof b, "beta=%.17g\nz_near=%.17g\nz_far=%.17g\ny_max=%.17g\nx_max=%.17g\ntol=%.17g\nref=%d\n",
                  st.beta, spec.z_near, spec.z_far, spec.y_max, spec.x_max, spec.tol, spec.max_refinements);
    const std::string key = sha256_hex(cfg_.material_canonical() + b);
    const std::string mat = sha256_hex(cfg_.material_canonical()).substr(0, 16);
    std::snprintf(b, sizeof b, "kernel_grid_%s_beta%.6f.json", mat.c_str(), st.beta);
    const auto cdir = dir_ / "cache";
    const auto path = cdir / b;
    if (std::filesystem::exists(path)) {
      try {
        std::ifstream in(path);
        const auto j = nlohmann::json::parse(in);
        if (j.at("key").get<std::string>() == key) {
          auto panels = [](const nlohmann::json& a) {
            std::vector<std::pair<double, double>> v;
            for (const auto& p : a) v.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            return v;
          };
          KernelGrid g = stage("kernel_grid_restore", [&] {
            return restore_kernel_grid(st, spec, panels(j.at("E_panels")), panels(j.at("ky_panels")),
                                       j.at("verified_error").get<double>(), j.at("refinements").get<int>());
          });
          g.key = key;
          return g;
        }
      } catch (const std::exception&) {
        // unreadable or stale cache: rebuilt below
      }
    }
    KernelGrid g = stage("kernel_grid_build", [&] { return build_kernel_grid(st, spec); });
    g.key = key;
    nlohmann::ordered_json j;
    j["key"] = key;
    j["beta"] = st.beta;
    j["verified_error"] = g.verified_error;
    j["refinements"] = g.refinements;
    j["E_panels"] = g.E_panels;
    j["ky_panels"] = g.ky_panels;
    std::filesystem::create_directories(cdir);
    std::ofstream f(path);
    f << j.dump() << '\n';
    return g;
  }

 private:
  SimulationConfig cfg_;
  RunOptions opt_;
  std::filesystem::path dir_;
  RunManifest man_;

  static double secs(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  std::string json_number(double v) const {
    if (!std::isfinite(v)) return "null";
    return format(v);
  }
};

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

// ---------------------------------------------------------------------------

inline void run_materials(Runner& r) {
  const auto& c = r.cfg();
  Table t{"materials", {"E_eV", "eps_re", "eps_im", "kappa_re", "kappa_im"}, {"eV", "1", "1", "1", "1"}};
  for (double E : linspace(c.spectra.E_min, c.spectra.E_max, c.spectra.nE)) {
    const cplx e = permittivity(c.material, E), k = pasteur(c.material, E);
    t.rows.push_back({E, e.real(), e.imag(), k.real(), k.imag()});
  }
  r.write(t);
}

inline void run_reflection(Runner& r) {
  const auto& c = r.cfg();
  const Setup st = c.setup();
  Table t{"reflection",
          {"E_eV", "kpar_invnm", "Rss_re", "Rss_im", "Rpp_re", "Rpp_im", "Rsp_re", "Rsp_im", "Rps_re", "Rps_im"},
          {"eV", "1/nm", "1", "1", "1", "1", "1", "1", "1", "1"}};
  std::vector<std::array<double, 2>> pts;
  for (double E : c.spectra.reflection_E)
    for (int i = 1; i <= c.spectra.nkpar; ++i) pts.push_back({E, c.spectra.kpar_max * i / c.spectra.nkpar});
  t.rows.resize(pts.size());
  r.stage("reflection", [&] {
    parallel_for(pts.size(), r.threads(), [&](std::size_t i) {
      const auto R = reflection_matrix(pts[i][0], pts[i][1], st.material, st.geometry, st.constants);
      t.rows[i] = {pts[i][0],      pts[i][1],      R.R_SS.real(), R.R_SS.imag(), R.R_PP.real(),
                   R.R_PP.imag(), R.R_SP.real(), R.R_SP.imag(), R.R_PS.real(), R.R_PS.imag()};
    });
  });
  r.write(t);
}

// Delta on the (y, z) pixels of a map. z_of(z_row) gives z_tilde.
struct MapDelta {
  std::vector<double> ys, zs;
  std::vector<DeltaPoint> px;  // [iz * ny + iy]
};

template <class ZOf>
MapDelta map_delta(Runner& r, const Setup& st, ZOf&& z_of) {
  const auto& m = r.cfg().maps;
  MapDelta out;
  out.ys = linspace(m.y_min, m.y_max, m.ny);
  out.zs = linspace(m.z_min, m.z_max, m.nz);
  const std::size_t ny = out.ys.size(), nz = out.zs.size();
  out.px.resize(ny * nz);
  double zt_min = 1e300, zt_max = 0;
  for (double z : out.zs) {
    const double zt = z_of(z);
    if (!(zt <= -st.numerics.z_floor))
      throw std::invalid_argument("map pixel at z_tilde = " + std::to_string(zt) + " nm is inside the contact floor");
    zt_min = std::min(zt_min, std::abs(zt));
    zt_max = std::max(zt_max, std::abs(zt));
  }
  if (m.use_grid) {
    GridSpec spec;
    spec.z_near = zt_min;
    spec.z_far = zt_max;
    spec.y_max = std::max(std::abs(m.y_min), std::abs(m.y_max));
    spec.x_max = std::abs(m.x_tilde);
    const KernelGrid g = r.kernel_grid(st, spec);
    r.stage("map_pixels", [&] {
      parallel_for(nz, r.threads(), [&](std::size_t iz) {
        const double zt = z_of(out.zs[iz]);
        const GridSlice sl = grid_slice(g, m.x_tilde, zt);
        const double C = g.unit_prefactor * st.geometry.L;
        // error is relative to Delta_S(0, 0, z_tilde), approximated at x_tilde
        const double err = g.verified_error * std::abs(slice_delta(sl, 0.0, C).delta_s);
        for (std::size_t iy = 0; iy < ny; ++iy) {
          DeltaPoint p = slice_delta(sl, out.ys[iy], C);
          p.error = err;
          out.px[iz * ny + iy] = p;
        }
      });
    });
  } else {
    r.stage("map_pixels", [&] {
      parallel_for(ny * nz, r.threads(), [&](std::size_t i) {
        out.px[i] = delta(st, m.x_tilde, out.ys[i % ny], z_of(out.zs[i / ny]));
      });
    });
  }
  return out;
}

inline void mark_partial(Table& t, const std::string& why) {
  if (!t.partial) {
    t.partial = true;
    t.partial_reason = why;
  }
}

inline void run_delta_map(Runner& r) {
  const Setup st = r.cfg().setup();
  const MapDelta md = map_delta(r, st, [](double z) { return z; });
  Table t{"delta_map",
          {"ytilde_nm", "ztilde_nm", "delta_s", "delta_a", "err", "delta_s_im", "delta_a_im"},
          {"nm", "nm", "1", "1", "1", "1", "1"}};
  t.extra["x_tilde_nm"] = r.cfg().maps.x_tilde;
  t.extra["beta"] = st.beta;
  t.extra["L_nm"] = st.geometry.L;
  for (std::size_t i = 0; i < md.px.size(); ++i) {
    const DeltaPoint& p = md.px[i];
    if (!p.converged) {
      mark_partial(t, "Delta did not converge at ytilde=" + std::to_string(p.y_tilde) +
                          " ztilde=" + std::to_string(p.z_tilde));
      break;
    }
    t.rows.push_back({p.y_tilde, p.z_tilde, p.delta_s.real(), p.delta_a.real(), p.error, p.delta_s.imag(),
                      p.delta_a.imag()});
  }
  r.write(t);
}

// gamma and Asym between R = (x_tilde, y, z) and R' = (0, 0, z_prime)
inline void run_gamma_like(Runner& r, bool asym) {
  const auto& m = r.cfg().maps;
  const Setup st = r.cfg().setup();
  const double zp = m.z_prime;
  const MapDelta md = map_delta(r, st, [&](double z) { return z + zp; });
  const std::size_t ny = md.ys.size(), nz = md.zs.size();
  Table t;
  if (asym) {
    t.name = "asymmetry_map";
    t.columns = {"y_nm", "z_nm", "abs_asym", "err"};
    t.units = {"nm", "nm", "1", "1"};
  } else {
    t.name = "gamma_map";
    t.columns = {"y_nm", "z_nm", "abs_gamma", "err", "arg_gamma"};
    t.units = {"nm", "nm", "1", "1", "rad"};
  }
  t.extra["x_tilde_nm"] = m.x_tilde;
  t.extra["z_prime_nm"] = zp;
  t.extra["beta"] = st.beta;
  t.extra["L_nm"] = st.geometry.L;
  if (asym) {
    for (std::size_t i = 0; i < md.px.size(); ++i) {
      const DeltaPoint& p = md.px[i];
      if (!p.converged) {
        mark_partial(t, "Delta did not converge at y=" + std::to_string(md.ys[i % ny]));
        break;
      }
      const cplx a = asym_from_delta(p.delta_a);
      const cplx cs = std::cos(p.delta_a);
      t.rows.push_back({md.ys[i % ny], md.zs[i / ny], std::abs(a), 2.0 * p.error / std::norm(cs)});
    }
    r.write(t);
    return;
  }
  const bool phi = !st.numerics.skip_phi;
  t.extra["phi_included"] = phi;
  std::vector<double> D(nz), P(nz);
  double Dp = 0, Pp = 0;
  r.stage("diagonal_terms", [&] {
    Dp = delta(st, 0.0, 0.0, 2.0 * zp).delta_s.real();
    if (phi) Pp = phase_phi(st, zp);
    parallel_for(nz, r.threads(), [&](std::size_t iz) {
      D[iz] = delta(st, 0.0, 0.0, 2.0 * md.zs[iz]).delta_s.real();
      if (phi) P[iz] = md.zs[iz] == zp ? Pp : phase_phi(st, md.zs[iz]);
    });
  });
  for (std::size_t i = 0; i < md.px.size(); ++i) {
    const DeltaPoint& p = md.px[i];
    if (!p.converged) {
      mark_partial(t, "Delta did not converge at y=" + std::to_string(md.ys[i % ny]));
      break;
    }
    const std::size_t iz = i / ny;
    GammaInputs in{p, D[iz], Dp, P[iz], Pp};
    const GammaValue g = assemble_gamma(in);
    const double a = std::abs(g.value);
    t.rows.push_back({md.ys[i % ny], md.zs[iz], a, a * p.error, std::arg(g.value)});
  }
  r.write(t);
}

inline void run_observables_sweep(Runner& r) {
  const auto& c = r.cfg();
  const double L_ref = c.L_list.front();
  const ElectronParams e0 = c.electron_at(c.beta_list.front());
  const ZAverage za = z_average_nodes(e0, c.numerics);
  const std::size_t nb = c.beta_list.size(), nzn = za.Z.size();
  std::vector<ZKernels> k(nb * nzn);
  r.stage("z_kernels", [&] {
    parallel_for(nb * nzn, r.threads(), [&](std::size_t i) {
      k[i] = z_kernels(c.setup(L_ref, c.beta_list[i / nzn]), za.Z[i % nzn]);
    });
  });
  Table t{"observables_sweep",
          {"L_um", "beta", "meanPy_over_P0", "rmsPy_over_P0", "peak_factor", "meanEloss_over_E0", "rmsE_over_E0"},
          {"um", "1", "1", "1", "1", "1", "1"}};
  t.extra["sigma_y_nm"] = c.electron.sigma_y;
  t.extra["sigma_z_nm"] = c.electron.sigma_z;
  t.extra["b_nm"] = c.electron.impact_b;
  t.extra["dropped_profile_weight"] = za.dropped_weight;
  t.extra["P0"] = "gamma m V";
  t.extra["E0"] = "V P0";
  t.extra["meanEloss"] = "E_i - <E>";
  for (double L : c.L_list) {
    for (std::size_t ib = 0; ib < nb; ++ib) {
      // every kernel carries one power of L
      ZKernelTable tab;
      tab.nodes = za;
      for (std::size_t j = 0; j < nzn; ++j) {
        ZKernels z = k[ib * nzn + j];
        const double s = L / L_ref;
        z.D0 *= s;
        z.A *= s;
        z.S *= s;
        z.sigma1 *= s;
        z.sigma2 *= s;
        tab.k.push_back(z);
      }
      const double beta = c.beta_list[ib];
      const ElectronParams e = c.electron_at(beta);
      const MomentReport P = lateral_momentum_moments(tab, e, c.constants);
      const MomentReport E = energy_moments(tab);
      if (!P.converged || !E.converged) {
        mark_partial(t, "Z kernels did not converge at beta=" + std::to_string(beta));
        r.write(t);
        return;
      }
      const Kinematics kin = Kinematics::from_beta(beta, c.constants);
      t.rows.push_back({L / 1000.0, beta, P.mean / kin.P0c, std::sqrt(P.variance) / kin.P0c, P.peak_factor,
                        -E.mean / kin.E0, std::sqrt(E.variance) / kin.E0});
    }
  }
  r.write(t);
}

inline void run_eels(Runner& r) {
  const auto& c = r.cfg();
  const Setup st = c.setup();
  const ElectronParams e = c.electron_at(st.beta);
  const EelsResult res = r.stage("eels", [&] { return eels_weak_coupling(st, e, c.spectra.eels_step); });
  Table t{"eels", {"Eloss_eV", "gamma_per_eV"}, {"eV", "1/eV"}};
  t.extra["max_abs_delta"] = res.max_abs_delta;
  t.extra["weak_coupling"] = res.weak_coupling;
  t.extra["beta"] = st.beta;
  t.extra["L_nm"] = st.geometry.L;
  if (!res.weak_coupling)
    std::cerr << "warning: max |Delta| = " << res.max_abs_delta << " exceeds the weak-coupling gate 0.1\n";
  for (std::size_t i = 0; i < res.gamma.axis.size(); ++i) t.rows.push_back({res.gamma.axis[i], res.gamma.density[i]});
  r.write(t);
}

inline std::string format_short(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%g", v);
  return b;
}

// Golden values from the brute-force references only.
inline void run_oracle(Runner& r) {
  const auto& c = r.cfg();
  const Setup st = c.setup();
  std::vector<std::string> names;
  std::vector<double> vals;
  auto add = [&](const std::string& n, double v) {
    names.push_back(n);
    vals.push_back(v);
  };
  r.stage("closed_forms", [&] {
    const oracle::Optics o = oracle::optics(st, 3.54);
    add("eps_re@3.54", o.eps.real());
    add("eps_im@3.54", o.eps.imag());
    add("kappa_re@3.54", o.kap.real());
    add("kappa_im@3.54", o.kap.imag());
    const oracle::Optics o2 = oracle::optics(st, 3.5);
    const double kx = -o2.kw / 0.7;
    const oracle::Ups u = oracle::upsilon(o2, kx, 0.05);
    add("ups_sym_re@3.5,0.7,0.05", u.sym.real());
    add("ups_sym_im@3.5,0.7,0.05", u.sym.imag());
    add("ups_asym_re@3.5,0.7,0.05", u.asym.real());
    add("ups_asym_im@3.5,0.7,0.05", u.asym.imag());
    // lossy film away from the defaults
    Setup lossy = st;
    lossy.material.eps_background = 2.5;
    lossy.material.oscillators = {{3.0, 1.2, 0.4}};
    lossy.material.chiral_oscillators = {{3.0, 2e-3, 0.4}};
    lossy.geometry.d = 30.0;
    const oracle::Optics ol = oracle::optics(lossy, 2.9);
    for (double kp : {0.01, 0.05}) {
      const oracle::Matrices mm = oracle::matrices(ol, kp * kp);
      for (int i = 0; i < 4; ++i) {
        const std::string s = "@lossy,2.9," + format_short(kp);
        add("M1_" + std::to_string(i) + "_re" + s, mm.M1[i].real());
        add("M1_" + std::to_string(i) + "_im" + s, mm.M1[i].imag());
        add("M2_" + std::to_string(i) + "_re" + s, mm.M2[i].real());
        add("M2_" + std::to_string(i) + "_im" + s, mm.M2[i].imag());
      }
    }
  });
  r.stage("fixed_grid_delta", [&] {
    const auto d = oracle::fixed_grid_delta(st, 0.0, 2.0, -10.0, 4096, 1024);
    add("delta_s@0,2,-10", d.delta_s.real());
    add("delta_a@0,2,-10", d.delta_a.real());
  });
  r.stage("fixed_grid_phi", [&] {
    add("dphi_dE@3.54,-10", oracle::polar_grid_phi_spectral_extrapolated(st, 3.54, -10.0, 65536, 256));
    add("phi@-10", oracle::fixed_grid_phi(st, -10.0, 256, 262144, 256));
  });
  nlohmann::ordered_json notes;
  notes["grids"] = {{"fixed_grid_delta", "n_E=4096 n_ky=1024"},
                    {"fixed_grid_phi", "n_E=256 n_r=262144 n_phi=256"},
                    {"dphi_dE", "n_r=65536..262144 extrapolated n_phi=256"}};
  notes["beta"] = st.beta;
  notes["L_nm"] = st.geometry.L;
  std::ostringstream o;
  o << "# config_hash=" << sha256_hex(c.canonical()) << " beta=" << r.format(st.beta)
    << " L_nm=" << r.format(st.geometry.L) << '\n';
  o << "# grids: delta n_E=4096 n_ky=1024; phi n_E=256 n_r=262144 n_phi=256\n";
  o << "quantity,value\n";
  char b[64];
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::snprintf(b, sizeof b, "%.17g", vals[i]);
    o << names[i] << ',' << b << '\n';
  }
  r.write_raw("golden.csv", o.str(), names.size(), notes);
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"materials",         "reflection", "delta-map", "gamma-map",
                                             "asymmetry-map",     "observables-sweep", "eels", "oracle"};
  return s;
}

inline RunManifest run(const std::string& sub, const SimulationConfig& cfg, const RunOptions& opt = {}) {
  Runner r(cfg, opt, sub);
  if (sub == "materials")
    run_materials(r);
  else if (sub == "reflection")
    run_reflection(r);
  else if (sub == "delta-map")
    run_delta_map(r);
  else if (sub == "gamma-map")
    run_gamma_like(r, false);
  else if (sub == "asymmetry-map")
    run_gamma_like(r, true);
  else if (sub == "observables-sweep")
    run_observables_sweep(r);
  else if (sub == "eels")
    run_eels(r);
  else if (sub == "oracle")
    run_oracle(r);
  else
    throw std::invalid_argument("unknown subcommand '" + sub + "'");
  return r.finish();
}

}  // namespace chirel::app
