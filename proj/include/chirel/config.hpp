#pragma once

// Flat INI configuration: [section] headers, key = value lines, '#' or ';'
// comments. Unknown sections and keys are rejected; every violation found is
// reported, not just the first.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chirel/electron_state.hpp"
#include "chirel/response.hpp"

namespace chirel {

struct ConfigError : std::runtime_error {
  std::vector<std::string> issues;
  explicit ConfigError(std::vector<std::string> list)
      : std::runtime_error(join(list)), issues(std::move(list)) {}

  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : "\n") + x;
    return s;
  }
};

struct ConfigParseError : ConfigError {
  int line = 0, column = 0;
  ConfigParseError(const std::string& where, int l, int c, const std::string& msg)
      : ConfigError({where + ":" + std::to_string(l) + ":" + std::to_string(c) + ": " + msg}), line(l), column(c) {}
};

struct OutputConfig {
  std::string directory = "out";
  std::string format = "csv";  // csv | json
  int precision = 12;
};

// pixel grid shared by the map subcommands
struct MapConfig {
  double x_tilde = 0.0;
  double y_min = -20.0, y_max = 20.0;
  int ny = 41;
  double z_min = -30.0, z_max = -4.0;
  int nz = 27;
  double z_prime = -3.0;
  bool use_grid = true;
};

struct SpectraConfig {
  double E_min = 0.05, E_max = 10.0;
  int nE = 200;
  std::vector<double> reflection_E{2.0, 3.54, 5.0};
  double kpar_max = 0.1;  // nm^-1
  int nkpar = 50;
  double eels_step = 0.01;  // eV
};

struct SimulationConfig {
  PhysicalConstants constants;
  MaterialModel material = default_material();
  Environment environment;
  double d = 50.0;
  std::vector<double> L_list{1000.0};  // nm
  ElectronParams electron;
  std::vector<double> beta_list;
  NumericsConfig numerics;
  OutputConfig output;
  MapConfig maps;
  SpectraConfig spectra;

  Setup setup(double L, double beta) const {
    Setup s;
    s.constants = constants;
    s.material = material;
    s.geometry.d = d;
    s.geometry.L = L;
    s.geometry.env = environment;
    s.beta = beta;
    s.numerics = numerics;
    return s;
  }
  Setup setup() const { return setup(L_list.front(), beta_list.front()); }
  ElectronParams electron_at(double beta) const {
    ElectronParams e = electron;
    e.beta = beta;
    return e;
  }

  // Fixed-order dump of every parsed value; hashed for provenance and caches.
  std::string canonical() const {
    std::ostringstream o;
    auto num = [&](const char* k, double v) {
      char b[64];
      std::snprintf(b, sizeof b, "%.17g", v);
      o << k << '=' << b << '\n';
    };
    auto list = [&](const char* k, const std::vector<double>& v) {
      o << k << '=';
      for (std::size_t i = 0; i < v.size(); ++i) {
        char b[64];
        std::snprintf(b, sizeof b, "%.17g", v[i]);
        o << (i ? "," : "") << b;
      }
      o << '\n';
    };
    o << material_canonical();
    list("geometry.L", L_list);
    num("electron.sigma_y", electron.sigma_y);
    num("electron.sigma_z", electron.sigma_z);
    num("electron.b", electron.impact_b);
    num("electron.E_i", electron.E_i);
    list("electron.beta", beta_list);
    o << "output.format=" << output.format << '\n';
    num("output.precision", output.precision);
    num("maps.x_tilde", maps.x_tilde);
    num("maps.y_min", maps.y_min);
    num("maps.y_max", maps.y_max);
    num("maps.ny", maps.ny);
    num("maps.z_min", maps.z_min);
    num("maps.z_max", maps.z_max);
    num("maps.nz", maps.nz);
    num("maps.z_prime", maps.z_prime);
    num("maps.use_grid", maps.use_grid);
    num("spectra.E_min", spectra.E_min);
    num("spectra.E_max", spectra.E_max);
    num("spectra.nE", spectra.nE);
    list("spectra.reflection_E", spectra.reflection_E);
    num("spectra.kpar_max", spectra.kpar_max);
    num("spectra.nkpar", spectra.nkpar);
    num("spectra.eels_step", spectra.eels_step);
    return o.str();
  }

  // Everything the spectral kernel depends on except beta.
  std::string material_canonical() const {
    std::ostringstream o;
    auto num = [&](const char* k, double v) {
      char b[64];
      std::snprintf(b, sizeof b, "%.17g", v);
      o << k << '=' << b << '\n';
    };
    num("constants.hbar_c", constants.hbar_c);
    num("constants.electron_rest_energy", constants.electron_rest_energy);
    num("constants.fine_structure", constants.fine_structure);
    num("constants.speed_of_light", constants.speed_of_light);
    num("material.eps_background", material.eps_background);
    for (const auto& l : material.oscillators) {
      num("material.oscillator.E0", l.E0);
      num("material.oscillator.f", l.f);
      num("material.oscillator.gamma", l.gamma);
    }
    for (const auto& c : material.chiral_oscillators) {
      num("material.chiral.E0", c.E0);
      num("material.chiral.kappa_A", c.kappa_A);
      num("material.chiral.gamma", c.gamma);
    }
    num("environment.eps1", environment.eps1);
    num("environment.eps2", environment.eps2);
    num("geometry.d", d);
    num("numerics.rel_tol", numerics.rel_tol);
    num("numerics.abs_tol", numerics.abs_tol);
    num("numerics.E_max", numerics.E_max);
    num("numerics.ky_cutoff_factor", numerics.ky_cutoff_factor);
    num("numerics.max_subdivisions", numerics.max_subdivisions);
    num("numerics.pv_window", numerics.pv_window);
    num("numerics.z_floor", numerics.z_floor);
    num("numerics.z_nodes", numerics.z_nodes);
    num("numerics.skip_phi", numerics.skip_phi);
    return o.str();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct RawValue {
  std::string text;
  int line = 0, column = 0;
};

class ConfigReader {
 public:
  ConfigReader(std::map<std::string, RawValue> kv, std::string where) : kv_(std::move(kv)), where_(std::move(where)) {}

  std::vector<std::string> issues;

  bool has(const std::string& k) const { return kv_.count(k) != 0; }

  void number(const std::string& k, double& out) {
    auto it = take(k);
    if (!it) return;
    double v;
    if (parse_double(it->text, v))
      out = v;
    else
      bad(k, *it, "expected a number");
  }

  void integer(const std::string& k, int& out) {
    auto it = take(k);
    if (!it) return;
    double v;
    if (parse_double(it->text, v) && v == static_cast<int>(v))
      out = static_cast<int>(v);
    else
      bad(k, *it, "expected an integer");
  }

  void boolean(const std::string& k, bool& out) {
    auto it = take(k);
    if (!it) return;
    if (it->text == "true" || it->text == "1")
      out = true;
    else if (it->text == "false" || it->text == "0")
      out = false;
    else
      bad(k, *it, "expected true or false");
  }

  void text(const std::string& k, std::string& out) {
    if (auto it = take(k)) out = it->text;
  }

  void list(const std::string& k, std::vector<double>& out) {
    auto it = take(k);
    if (!it) return;
    std::vector<double> v;
    std::stringstream ss(it->text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      double x;
      if (!parse_double(trim(item), x)) {
        bad(k, *it, "expected a comma separated list of numbers");
        return;
      }
      v.push_back(x);
    }
    if (v.empty()) {
      bad(k, *it, "empty list");
      return;
    }
    out = v;
  }

  // "a b c; a b c; ..." or "none"
  void triples(const std::string& k, std::vector<std::array<double, 3>>& out) {
    auto it = take(k);
    if (!it) return;
    out.clear();
    if (it->text == "none") return;
    std::stringstream ss(it->text);
    std::string item;
    while (std::getline(ss, item, ';')) {
      std::stringstream is(item);
      std::array<double, 3> t{};
      std::string tok;
      int n = 0;
      bool ok = true;
      while (is >> tok) {
        if (n >= 3 || !parse_double(tok, t[n])) ok = false;
        ++n;
      }
      if (!ok || n != 3) {
        bad(k, *it, "expected 'E0 strength damping' triples separated by ';'");
        out.clear();
        return;
      }
      out.push_back(t);
    }
  }

  void reject_unused() {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k))
        issues.push_back(where_ + ":" + std::to_string(v.line) + ":1: unknown key " + k);
  }

  std::string location(const std::string& k) const {
    auto it = kv_.find(k);
    return it == kv_.end() ? where_ : where_ + ":" + std::to_string(it->second.line);
  }

 private:
  std::map<std::string, RawValue> kv_;
  std::set<std::string> used_;
  std::string where_;

  const RawValue* take(const std::string& k) {
    auto it = kv_.find(k);
    if (it == kv_.end()) return nullptr;
    used_.insert(k);
    return &it->second;
  }

  void bad(const std::string& k, const RawValue& v, const std::string& msg) {
    issues.push_back(where_ + ":" + std::to_string(v.line) + ":" + std::to_string(v.column) + ": " + k + ": " + msg +
                     " (got '" + v.text + "')");
  }

  static bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    auto r = std::from_chars(b, e, v);
    return r.ec == std::errc() && r.ptr == e && std::isfinite(v);
  }
};

inline std::map<std::string, RawValue> tokenize(std::istream& in, const std::string& where) {
  static const std::set<std::string> sections = {"constants", "material", "environment", "geometry", "electron",
                                                 "numerics",  "output",   "maps",        "spectra"};
  std::map<std::string, RawValue> kv;
  std::string section, raw;
  int ln = 0;
  while (std::getline(in, raw)) {
    ++ln;
    std::string line = raw;
    for (std::size_t i = 0; i < line.size(); ++i)
      if (line[i] == '#' || (line[i] == ';' && detail::trim(line.substr(0, i)).empty())) {
        line = line.substr(0, i);
        break;
      }
    if (detail::trim(line).empty()) continue;
    const auto first = line.find_first_not_of(" \t");
    const int col0 = static_cast<int>(first) + 1;
    if (line[first] == '[') {
      const auto close = line.find(']', first);
      if (close == std::string::npos) throw ConfigParseError(where, ln, col0, "unterminated section header");
      if (!detail::trim(line.substr(close + 1)).empty())
        throw ConfigParseError(where, ln, static_cast<int>(close) + 2, "text after section header");
      section = detail::trim(line.substr(first + 1, close - first - 1));
      if (!sections.count(section)) throw ConfigParseError(where, ln, col0 + 1, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigParseError(where, ln, col0, "expected 'key = value'");
    if (section.empty()) throw ConfigParseError(where, ln, col0, "key outside of any section");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigParseError(where, ln, col0, "missing key before '='");
    for (char c : key)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
        throw ConfigParseError(where, ln, col0, "invalid key '" + key + "'");
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto vpos = line.find_first_not_of(" \t", eq + 1);
    const int vcol = vpos == std::string::npos ? static_cast<int>(eq) + 2 : static_cast<int>(vpos) + 1;
    if (value.empty()) throw ConfigParseError(where, ln, vcol, "missing value for " + section + "." + key);
    const std::string full = section + "." + key;
    if (kv.count(full)) throw ConfigParseError(where, ln, col0, "duplicate key " + full);
    kv[full] = {value, ln, vcol};
  }
  return kv;
}

}  // namespace detail

inline SimulationConfig parse_config_stream(std::istream& in, const std::string& where = "<config>") {
  detail::ConfigReader r(detail::tokenize(in, where), where);
  SimulationConfig c;

  r.number("constants.hbar_c", c.constants.hbar_c);
  r.number("constants.electron_rest_energy", c.constants.electron_rest_energy);
  r.number("constants.fine_structure", c.constants.fine_structure);
  r.number("constants.speed_of_light", c.constants.speed_of_light);

  r.number("material.eps_background", c.material.eps_background);
  if (r.has("material.oscillators")) {
    std::vector<std::array<double, 3>> t;
    r.triples("material.oscillators", t);
    c.material.oscillators.clear();
    for (const auto& x : t) c.material.oscillators.push_back({x[0], x[1], x[2]});
  }
  if (r.has("material.chiral_oscillators")) {
    std::vector<std::array<double, 3>> t;
    r.triples("material.chiral_oscillators", t);
    c.material.chiral_oscillators.clear();
    for (const auto& x : t) c.material.chiral_oscillators.push_back({x[0], x[1], x[2]});
  }

  r.number("environment.eps1", c.environment.eps1);
  r.number("environment.eps2", c.environment.eps2);

  r.number("geometry.d", c.d);
  r.list("geometry.L", c.L_list);

  if (!r.has("electron.beta")) r.issues.push_back(where + ": electron.beta is required");
  r.list("electron.beta", c.beta_list);
  r.number("electron.sigma_y", c.electron.sigma_y);
  r.number("electron.sigma_z", c.electron.sigma_z);
  r.number("electron.b", c.electron.impact_b);
  r.number("electron.E_i", c.electron.E_i);

  r.number("numerics.rel_tol", c.numerics.rel_tol);
  r.number("numerics.abs_tol", c.numerics.abs_tol);
  r.number("numerics.E_max", c.numerics.E_max);
  r.number("numerics.ky_cutoff_factor", c.numerics.ky_cutoff_factor);
  r.integer("numerics.max_subdivisions", c.numerics.max_subdivisions);
  r.number("numerics.pv_window", c.numerics.pv_window);
  r.number("numerics.z_floor", c.numerics.z_floor);
  r.integer("numerics.z_nodes", c.numerics.z_nodes);
  r.boolean("numerics.skip_phi", c.numerics.skip_phi);

  r.text("output.directory", c.output.directory);
  r.text("output.format", c.output.format);
  r.integer("output.precision", c.output.precision);

  r.number("maps.x_tilde", c.maps.x_tilde);
  r.number("maps.y_min", c.maps.y_min);
  r.number("maps.y_max", c.maps.y_max);
  r.integer("maps.ny", c.maps.ny);
  r.number("maps.z_min", c.maps.z_min);
  r.number("maps.z_max", c.maps.z_max);
  r.integer("maps.nz", c.maps.nz);
  r.number("maps.z_prime", c.maps.z_prime);
  r.boolean("maps.use_grid", c.maps.use_grid);

  r.number("spectra.E_min", c.spectra.E_min);
  r.number("spectra.E_max", c.spectra.E_max);
  r.integer("spectra.nE", c.spectra.nE);
  r.list("spectra.reflection_E", c.spectra.reflection_E);
  r.number("spectra.kpar_max", c.spectra.kpar_max);
  r.integer("spectra.nkpar", c.spectra.nkpar);
  r.number("spectra.eels_step", c.spectra.eels_step);

  r.reject_unused();

  // physical validation, one entry per violated rule
  auto& is = r.issues;
  auto check = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      is.push_back(r.location(key) + ": " + key + ": " + e.what());
    }
  };
  check("constants", [&] { c.constants.validate(); });
  check("material", [&] { c.material.validate(); });
  check("environment", [&] { c.environment.validate(); });
  if (!(c.d >= 0)) is.push_back(r.location("geometry.d") + ": geometry.d must be >= 0");
  for (double L : c.L_list)
    if (!(L > 0)) is.push_back(r.location("geometry.L") + ": geometry.L entries must be > 0");
  for (double b : c.beta_list)
    if (!(b > 0 && b < 1))
      is.push_back(r.location("electron.beta") + ": electron.beta = " + std::to_string(b) + " outside (0, 1)");
  {
    ElectronParams e = c.electron;
    e.beta = 0.5;
    check("electron", [&] { e.validate(); });
  }
  check("numerics", [&] { c.numerics.validate(); });
  if (!c.material.oscillators.empty() || !c.material.chiral_oscillators.empty()) {
    Setup s;
    s.material = c.material;
    s.numerics = c.numerics;
    if (!(s.E_max() > s.material.largest_resonance()))
      is.push_back(r.location("numerics.E_max") + ": numerics.E_max must exceed every resonance energy");
  }
  if (c.output.format != "csv" && c.output.format != "json")
    is.push_back(r.location("output.format") + ": output.format must be csv or json");
  if (c.output.precision < 1 || c.output.precision > 17)
    is.push_back(r.location("output.precision") + ": output.precision must be in [1, 17]");
  if (c.output.directory.empty()) is.push_back(r.location("output.directory") + ": output.directory is empty");
  if (!(c.maps.y_min <= c.maps.y_max) || c.maps.ny < 1)
    is.push_back(r.location("maps.ny") + ": maps needs y_min <= y_max and ny >= 1");
  if (!(c.maps.z_min <= c.maps.z_max && c.maps.z_max < 0) || c.maps.nz < 1)
    is.push_back(r.location("maps.nz") + ": maps needs z_min <= z_max < 0 and nz >= 1");
  if (!(c.maps.z_prime < 0)) is.push_back(r.location("maps.z_prime") + ": maps.z_prime must be < 0");
  if (!(c.spectra.E_min > 0 && c.spectra.E_max > c.spectra.E_min) || c.spectra.nE < 2)
    is.push_back(r.location("spectra.nE") + ": spectra needs 0 < E_min < E_max and nE >= 2");
  for (double E : c.spectra.reflection_E)
    if (!(E > 0)) is.push_back(r.location("spectra.reflection_E") + ": spectra.reflection_E entries must be > 0");
  if (!(c.spectra.kpar_max > 0) || c.spectra.nkpar < 1)
    is.push_back(r.location("spectra.nkpar") + ": spectra needs kpar_max > 0 and nkpar >= 1");
  if (!(c.spectra.eels_step > 0)) is.push_back(r.location("spectra.eels_step") + ": spectra.eels_step must be > 0");

  if (!is.empty()) throw ConfigError(is);
  c.electron.beta = c.beta_list.front();
  return c;
}

inline SimulationConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open configuration file"});
  return parse_config_stream(in, path);
}

}  // namespace chirel
