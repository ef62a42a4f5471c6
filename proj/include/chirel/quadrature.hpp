#pragma once

// Adaptive Gauss-Kronrod (10/21) integration, semi-infinite maps,
// oscillatory tails and principal values.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chirel/core_units.hpp"

namespace chirel {

struct NumericsConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-14;
  double E_max = 0.0;  // 0 selects 5x the largest resonance
  double ky_cutoff_factor = 40.0;
  int max_subdivisions = 2000;
  double pv_window = 0.5;
  double z_floor = 0.1;  // nm
  int z_nodes = 16;      // Gauss-Hermite nodes for averages over |phi|^2
  bool skip_phi = false;

  void validate() const {
    if (!(rel_tol > 0) || !(abs_tol > 0)) throw std::invalid_argument("numerics: tolerances must be > 0");
    if (!(E_max >= 0)) throw std::invalid_argument("numerics: E_max must be >= 0");
    if (!(ky_cutoff_factor > 0)) throw std::invalid_argument("numerics: ky_cutoff_factor must be > 0");
    if (max_subdivisions < 8) throw std::invalid_argument("numerics: max_subdivisions must be >= 8");
    if (!(pv_window > 0 && pv_window < 1)) throw std::invalid_argument("numerics: pv_window must be in (0,1)");
    if (!(z_floor > 0)) throw std::invalid_argument("numerics: z_floor must be > 0");
    if (z_nodes < 2 || z_nodes > 64) throw std::invalid_argument("numerics: z_nodes must be in [2, 64]");
  }
};

namespace quad {

struct Tolerance {
  double rel = 1e-10;
  double abs = 1e-14;
  int max_subdivisions = 2000;
};

template <class T>
struct QuadratureResult {
  T value{};
  double error_estimate = 0.0;
  int panels_used = 0;
  bool converged = false;
};

// Values the engine can integrate. Each type is split into "groups" that
// are tested against the tolerance separately.
template <class T>
struct ValueTraits;

template <>
struct ValueTraits<double> {
  static constexpr int groups = 1;
  static double norm(const double& v, int) { return std::abs(v); }
  static double zero() { return 0.0; }
};

template <>
struct ValueTraits<cplx> {
  static constexpr int groups = 1;
  static double norm(const cplx& v, int) { return std::abs(v); }
  static cplx zero() { return 0.0; }
};

template <std::size_t N>
struct RVec {
  std::array<double, N> v{};
  double& operator[](std::size_t i) { return v[i]; }
  const double& operator[](std::size_t i) const { return v[i]; }
  RVec& operator+=(const RVec& o) {
    for (std::size_t i = 0; i < N; ++i) v[i] += o.v[i];
    return *this;
  }
  friend RVec operator+(RVec a, const RVec& b) { return a += b; }
  friend RVec operator-(RVec a, const RVec& b) {
    for (std::size_t i = 0; i < N; ++i) a.v[i] -= b.v[i];
    return a;
  }
  friend RVec operator*(double s, RVec a) {
    for (auto& x : a.v) x *= s;
    return a;
  }
};

template <std::size_t N>
struct ValueTraits<RVec<N>> {
  static constexpr int groups = static_cast<int>(N);
  static double norm(const RVec<N>& v, int g) { return std::abs(v[g]); }
  static RVec<N> zero() { return {}; }
};

// Pairs of complex numbers, one group each.
template <std::size_t N>
struct CVec {
  std::array<cplx, N> v{};
  cplx& operator[](std::size_t i) { return v[i]; }
  const cplx& operator[](std::size_t i) const { return v[i]; }
  CVec& operator+=(const CVec& o) {
    for (std::size_t i = 0; i < N; ++i) v[i] += o.v[i];
    return *this;
  }
  friend CVec operator+(CVec a, const CVec& b) { return a += b; }
  friend CVec operator-(CVec a, const CVec& b) {
    for (std::size_t i = 0; i < N; ++i) a.v[i] -= b.v[i];
    return a;
  }
  friend CVec operator*(double s, CVec a) {
    for (auto& x : a.v) x *= s;
    return a;
  }
};

template <std::size_t N>
struct ValueTraits<CVec<N>> {
  static constexpr int groups = static_cast<int>(N);
  static double norm(const CVec<N>& v, int g) { return std::abs(v[g]); }
  static CVec<N> zero() { return {}; }
};

// Neumaier compensated accumulator; values are summed in call order.
template <class T>
struct CompensatedSum {
  T sum = ValueTraits<T>::zero();
  T comp = ValueTraits<T>::zero();

  void add(const T& x);
  T result() const { return sum + comp; }
};

namespace detail {
inline void neumaier(double& s, double& c, double x) {
  const double t = s + x;
  if (std::abs(s) >= std::abs(x))
    c += (s - t) + x;
  else
    c += (x - t) + s;
  s = t;
}
}  // namespace detail

template <>
inline void CompensatedSum<double>::add(const double& x) { detail::neumaier(sum, comp, x); }

template <>
inline void CompensatedSum<cplx>::add(const cplx& x) {
  double sr = sum.real(), si = sum.imag(), cr = comp.real(), ci = comp.imag();
  detail::neumaier(sr, cr, x.real());
  detail::neumaier(si, ci, x.imag());
  sum = {sr, si};
  comp = {cr, ci};
}

template <std::size_t N>
struct CompensatedSum<RVec<N>> {
  RVec<N> sum{}, comp{};
  void add(const RVec<N>& x) {
    for (std::size_t i = 0; i < N; ++i) detail::neumaier(sum[i], comp[i], x[i]);
  }
  RVec<N> result() const { return sum + comp; }
};

template <std::size_t N>
struct CompensatedSum<CVec<N>> {
  std::array<CompensatedSum<cplx>, N> parts;
  void add(const CVec<N>& x) {
    for (std::size_t i = 0; i < N; ++i) parts[i].add(x[i]);
  }
  CVec<N> result() const {
    CVec<N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = parts[i].result();
    return r;
  }
};

// Kronrod 21-point abscissae on [-1, 1] (positive half) and weights.
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980292070, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
// 10-point Gauss weights for the odd-indexed Kronrod abscissae.
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

// Nodes and weights of the 21-point Kronrod rule mapped to [a, b], in
// increasing abscissa order.
inline void kronrod_nodes(double a, double b, std::array<double, 21>& x, std::array<double, 21>& w) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  for (int j = 0; j < 10; ++j) {
    x[j] = c - h * kXgk[j];
    w[j] = h * kWgk[j];
    x[20 - j] = c + h * kXgk[j];
    w[20 - j] = h * kWgk[j];
  }
  x[10] = c;
  w[10] = h * kWgk[10];
}

template <class T>
struct Panel {
  double a, b;
  T value;
  std::array<double, ValueTraits<T>::groups> err;
};

template <class T, class F>
Panel<T> gk21(F& f, double a, double b) {
  using Tr = ValueTraits<T>;
  constexpr int G = Tr::groups;
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  std::array<T, 21> fv;
  fv[10] = f(c);
  for (int j = 0; j < 10; ++j) {
    const double dx = h * kXgk[j];
    fv[j] = f(c - dx);
    fv[20 - j] = f(c + dx);
  }
  T resk = kWgk[10] * fv[10];
  T resg = Tr::zero();
  for (int j = 0; j < 10; ++j) {
    const T pair = fv[j] + fv[20 - j];
    resk += kWgk[j] * pair;
    if (j % 2 == 1) resg += kWg[j / 2] * pair;
  }
  Panel<T> p{a, b, h * resk, {}};
  const T mean = 0.5 * resk;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int g = 0; g < G; ++g) {
    double resabs = kWgk[10] * Tr::norm(fv[10], g);
    double resasc = kWgk[10] * Tr::norm(fv[10] - mean, g);
    for (int j = 0; j < 10; ++j) {
      resabs += kWgk[j] * (Tr::norm(fv[j], g) + Tr::norm(fv[20 - j], g));
      resasc += kWgk[j] * (Tr::norm(fv[j] - mean, g) + Tr::norm(fv[20 - j] - mean, g));
    }
    resabs *= std::abs(h);
    resasc *= std::abs(h);
    double err = std::abs(h) * Tr::norm(resk - resg, g);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
    p.err[g] = err;
  }
  return p;
}

// Global adaptive bisection over the initial partition given by breakpoints
// (sorted, at least two entries).
template <class T, class F>
QuadratureResult<T> integrate_partition(F&& f, const std::vector<double>& breaks, const Tolerance& tol,
                                        std::vector<std::pair<double, double>>* final_panels = nullptr) {
  using Tr = ValueTraits<T>;
  constexpr int G = Tr::groups;
  if (breaks.size() < 2) throw std::invalid_argument("integrate: need at least one interval");
  for (std::size_t i = 1; i < breaks.size(); ++i)
    if (!(breaks[i] > breaks[i - 1])) throw std::invalid_argument("integrate: breakpoints must increase");

  std::vector<Panel<T>> panels;
  panels.reserve(std::max<std::size_t>(64, breaks.size() * 4));
  for (std::size_t i = 1; i < breaks.size(); ++i) panels.push_back(gk21<T>(f, breaks[i - 1], breaks[i]));

  auto totals = [&](T& val, std::array<double, G>& err) {
    CompensatedSum<T> acc;
    err.fill(0.0);
    for (const auto& p : panels) {
      acc.add(p.value);
      for (int g = 0; g < G; ++g) err[g] += p.err[g];
    }
    val = acc.result();
  };

  QuadratureResult<T> r;
  std::array<double, G> err{};
  totals(r.value, err);
  const int limit = std::max(tol.max_subdivisions, static_cast<int>(panels.size()));
  while (true) {
    std::array<double, G> allowed{};
    bool ok = true;
    for (int g = 0; g < G; ++g) {
      allowed[g] = std::max(tol.abs, tol.rel * Tr::norm(r.value, g));
      if (err[g] > allowed[g]) ok = false;
    }
    if (ok) {
      r.converged = true;
      break;
    }
    if (static_cast<int>(panels.size()) >= limit) break;
    std::size_t worst = 0;
    double worst_score = -1.0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      double score = 0.0;
      for (int g = 0; g < G; ++g) score += panels[i].err[g] / allowed[g];
      if (score > worst_score) {
        worst_score = score;
        worst = i;
      }
    }
    const double a = panels[worst].a, b = panels[worst].b, m = 0.5 * (a + b);
    if (!(m > a && m < b)) break;  // interval exhausted at double precision
    panels[worst] = gk21<T>(f, a, m);
    panels.push_back(gk21<T>(f, m, b));
    totals(r.value, err);
  }
  std::sort(panels.begin(), panels.end(), [](const Panel<T>& x, const Panel<T>& y) { return x.a < y.a; });
  totals(r.value, err);
  r.error_estimate = *std::max_element(err.begin(), err.end());
  r.panels_used = static_cast<int>(panels.size());
  if (final_panels) {
    final_panels->clear();
    for (const auto& p : panels) final_panels->push_back({p.a, p.b});
  }
  return r;
}

template <class T = double, class F>
QuadratureResult<T> integrate_adaptive(F&& f, double a, double b, const Tolerance& tol = {}) {
  if (!(a < b)) throw std::invalid_argument("integrate_adaptive: need a < b");
  return integrate_partition<T>(std::forward<F>(f), std::vector<double>{a, b}, tol);
}

// Integral over [a, inf) through x = a + s t/(1-t).
template <class T = double, class F>
QuadratureResult<T> integrate_semi_infinite(F&& f, double decay_scale, const Tolerance& tol = {}, double a = 0.0) {
  if (!(decay_scale > 0)) throw std::invalid_argument("integrate_semi_infinite: decay_scale must be > 0");
  auto g = [&](double t) -> T {
    const double u = 1.0 - t;
    const double x = a + decay_scale * t / u;
    const double jac = decay_scale / (u * u);
    if (!std::isfinite(x)) return ValueTraits<T>::zero();
    return jac * f(x);
  };
  // t = 0.5 corresponds to one decay length; split there and at ~8 lengths
  return integrate_partition<T>(g, std::vector<double>{0.0, 0.5, 8.0 / 9.0, 1.0}, tol);
}

// Wynn epsilon extrapolation of a sequence of partial sums.
inline double wynn_epsilon(const std::vector<double>& s) {
  const std::size_t n = s.size();
  if (n < 3) return n ? s.back() : 0.0;
  std::vector<double> e0(n + 1, 0.0), e1(s.begin(), s.end());
  std::vector<double> best = e1;
  double result = s.back();
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<double> e2(n - k);
    bool bad = false;
    for (std::size_t i = 0; i + k < n; ++i) {
      const double diff = e1[i + 1] - e1[i];
      if (diff == 0.0) {
        bad = true;
        break;
      }
      e2[i] = e0[i + 1] + 1.0 / diff;
    }
    if (bad) break;
    if (k % 2 == 0 && !e2.empty()) result = e2.back();
    e0 = std::move(e1);
    e1 = std::move(e2);
  }
  return result;
}

// int_0^inf f(x) exp(i w x) dx, with f decaying on the scale decay_scale.
// Real part is the cosine transform, imaginary part the sine transform.
template <class F>
QuadratureResult<cplx> fourier_tail(F&& f, double frequency, double decay_scale, const Tolerance& tol = {}) {
  if (!(frequency >= 0)) throw std::invalid_argument("fourier_tail: frequency must be >= 0");
  const double range = 40.0 * decay_scale;
  if (frequency * range <= 2.0 * pi) {
    auto g = [&](double x) -> cplx { return f(x) * std::exp(cplx(0.0, frequency * x)); };
    if (frequency == 0.0) {
      auto h = [&](double x) -> double { return f(x); };
      const auto rr = integrate_semi_infinite<double>(h, decay_scale, tol);
      return {cplx(rr.value, 0.0), rr.error_estimate, rr.panels_used, rr.converged};
    }
    return integrate_semi_infinite<cplx>(g, decay_scale, tol);
  }
  const double half = pi / frequency;
  auto g = [&](double x) -> cplx { return f(x) * std::exp(cplx(0.0, frequency * x)); };
  QuadratureResult<cplx> r;
  CompensatedSum<cplx> acc;
  std::vector<double> pre, pim;
  Tolerance inner = tol;
  inner.rel = tol.rel * 0.1;
  inner.abs = tol.abs * 0.01;
  double err = 0.0;
  int quiet = 0;
  const int max_panels = 20000;
  for (int k = 0; k < max_panels; ++k) {
    const auto p = integrate_adaptive<cplx>(g, k * half, (k + 1) * half, inner);
    acc.add(p.value);
    err += p.error_estimate;
    r.panels_used += p.panels_used;
    const cplx s = acc.result();
    pre.push_back(s.real());
    pim.push_back(s.imag());
    const double scale = std::max(tol.abs, tol.rel * std::abs(s));
    quiet = (std::abs(p.value) < 0.1 * scale) ? quiet + 1 : 0;
    if (quiet >= 4 && (k + 1) * half > 3.0 * decay_scale) {
      r.value = s;
      r.error_estimate = err + std::abs(p.value);
      r.converged = r.error_estimate <= std::max(tol.abs, tol.rel * std::abs(s));
      return r;
    }
  }
  r.value = cplx(wynn_epsilon(pre), wynn_epsilon(pim));
  r.error_estimate = std::abs(r.value - acc.result()) + err;
  r.converged = false;
  return r;
}

// P.V. int_a^b g(x)/(x - pole) dx.
template <class T = double, class F>
QuadratureResult<T> integrate_pv(F&& g, double pole, double a, double b, const Tolerance& tol = {},
                                 double window = 0.5) {
  if (!(a < pole && pole < b)) throw std::invalid_argument("integrate_pv: pole must lie strictly inside (a, b)");
  const double w = window * std::min(pole - a, b - pole);
  auto outer = [&](double x) -> T { return (1.0 / (x - pole)) * g(x); };
  auto inner = [&](double t) -> T { return (1.0 / t) * (g(pole + t) - g(pole - t)); };
  QuadratureResult<T> r;
  std::vector<QuadratureResult<T>> parts;
  if (pole - w > a) parts.push_back(integrate_adaptive<T>(outer, a, pole - w, tol));
  parts.push_back(integrate_adaptive<T>(inner, 0.0, w, tol));
  if (pole + w < b) parts.push_back(integrate_adaptive<T>(outer, pole + w, b, tol));
  CompensatedSum<T> acc;
  r.converged = true;
  for (const auto& p : parts) {
    acc.add(p.value);
    r.error_estimate += p.error_estimate;
    r.panels_used += p.panels_used;
    r.converged = r.converged && p.converged;
  }
  r.value = acc.result();
  return r;
}

// Gauss-Hermite nodes/weights for weight exp(-x^2), ascending nodes.
inline void gauss_hermite(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const double pim4 = std::pow(pi, -0.25);
  const int m = (n + 1) / 2;
  std::vector<double> r(m);  // roots, largest first
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * r[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * r[1];
    else
      z = 2.0 * z - r[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        // refresh the derivative at the converged root
        p1 = pim4;
        p2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p3 = p2;
          p2 = p1;
          p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
        }
        pp = std::sqrt(2.0 * n) * p2;
        break;
      }
    }
    r[i] = z;
    x[n - 1 - i] = z;
    x[i] = -z;
    w[i] = w[n - 1 - i] = 2.0 / (pp * pp);
  }
  if (n % 2 == 1) x[m - 1] = 0.0;
}

}  // namespace quad
}  // namespace chirel
