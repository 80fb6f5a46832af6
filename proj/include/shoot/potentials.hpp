#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shoot/config.hpp"
#include "shoot/detail/numerics.hpp"

namespace shoot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct HalfLineHardWall {
  double a = 0.0;
};
struct WholeLine {};
using Domain = std::variant<HalfLineHardWall, WholeLine>;

/// Closed form known for the characteristic function of a builtin.
enum class OracleTag { none, bessel_wall, symmetric_bessel, cosh, whittaker_morse, tzitzeica };

enum class Builtin { exp_wall, symmetric_exp, cosh_pot, truncated_morse, tzitzeica };

/// A real confining potential on a half line with a hard wall or on the whole line.
/// Values are immutable after construction and safe to share across threads.
struct PotentialSpec {
  std::function<double(double)> V;
  std::function<double(double)> dV;
  Domain domain = WholeLine{};
  std::string label;
  OracleTag oracle = OracleTag::none;
  double kappa = 0.0;       ///< Whittaker parameter, whittaker_morse only
  double center = 0.0;      ///< a point near the bottom of the well
  double x_lo = -kInf;      ///< V is only defined on [x_lo, x_hi] (tabulated input)
  double x_hi = kInf;
  double shift = 0.0;       ///< constant already added to V
  std::vector<double> breakpoints;  ///< where V is continuous but not differentiable

  bool half_line() const { return std::holds_alternative<HalfLineHardWall>(domain); }
  double wall() const { return std::get<HalfLineHardWall>(domain).a; }
  /// Left end of the region used when looking for the right tail.
  double search_floor() const { return half_line() ? wall() : center; }
};

// ---------------------------------------------------------------------------
// builtins

inline std::optional<Builtin> parse_builtin(std::string_view name) {
  if (name == "exp_wall") return Builtin::exp_wall;
  if (name == "symmetric_exp") return Builtin::symmetric_exp;
  if (name == "cosh_pot") return Builtin::cosh_pot;
  if (name == "truncated_morse") return Builtin::truncated_morse;
  if (name == "tzitzeica") return Builtin::tzitzeica;
  return std::nullopt;
}

inline std::string_view builtin_name(Builtin b) {
  switch (b) {
    case Builtin::exp_wall: return "exp_wall";
    case Builtin::symmetric_exp: return "symmetric_exp";
    case Builtin::cosh_pot: return "cosh_pot";
    case Builtin::truncated_morse: return "truncated_morse";
    case Builtin::tzitzeica: return "tzitzeica";
  }
  return "";
}

/// The example potentials, scaled so that the width at height v is
/// log(sqrt(v) / 2 pi) to leading order.
inline PotentialSpec make_builtin(Builtin which, std::optional<double> kappa = std::nullopt) {
  using std::numbers::pi;
  constexpr double four_pi2 = 4.0 * pi * pi;
  if (kappa && which != Builtin::truncated_morse)
    fail(ErrorFamily::config, "make_builtin", "kappa is only accepted by truncated_morse");
  if (!kappa && which == Builtin::truncated_morse)
    fail(ErrorFamily::config, "make_builtin", "truncated_morse requires kappa");

  PotentialSpec p;
  p.label = std::string(builtin_name(which));
  switch (which) {
    case Builtin::exp_wall:
      p.V = [](double x) { return four_pi2 * std::exp(2.0 * x); };
      p.dV = [](double x) { return 2.0 * four_pi2 * std::exp(2.0 * x); };
      p.domain = HalfLineHardWall{0.0};
      p.oracle = OracleTag::bessel_wall;
      break;
    case Builtin::symmetric_exp:
      p.V = [](double x) { return four_pi2 * std::exp(4.0 * std::abs(x)); };
      p.dV = [](double x) {
        const double s = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
        return 4.0 * s * four_pi2 * std::exp(4.0 * std::abs(x));
      };
      p.domain = WholeLine{};
      p.oracle = OracleTag::symmetric_bessel;
      p.breakpoints = {0.0};
      break;
    case Builtin::cosh_pot:
      p.V = [](double x) { return 2.0 * four_pi2 * std::cosh(4.0 * x); };
      p.dV = [](double x) { return 8.0 * four_pi2 * std::sinh(4.0 * x); };
      p.domain = WholeLine{};
      p.oracle = OracleTag::cosh;
      break;
    case Builtin::truncated_morse: {
      const double k = *kappa;
      p.V = [k](double x) { return four_pi2 * std::exp(2.0 * x) - 4.0 * pi * k * std::exp(x); };
      p.dV = [k](double x) { return 2.0 * four_pi2 * std::exp(2.0 * x) - 4.0 * pi * k * std::exp(x); };
      p.domain = HalfLineHardWall{0.0};
      p.oracle = OracleTag::whittaker_morse;
      p.kappa = k;
      break;
    }
    case Builtin::tzitzeica: {
      const double A = four_pi2 * std::pow(2.0, -2.0 / 3.0);
      p.V = [A](double x) { return A * (2.0 * std::exp(3.0 * x) + std::exp(-6.0 * x)); };
      p.dV = [A](double x) { return A * (6.0 * std::exp(3.0 * x) - 6.0 * std::exp(-6.0 * x)); };
      p.domain = WholeLine{};
      p.oracle = OracleTag::tzitzeica;
      break;
    }
  }
  return p;
}

inline PotentialSpec make_builtin(std::string_view name, std::optional<double> kappa = std::nullopt) {
  auto b = parse_builtin(name);
  if (!b) fail(ErrorFamily::config, "make_builtin", "unknown potential '" + std::string(name) + "'");
  return make_builtin(*b, kappa);
}

/// V + gamma. Adding a constant to V is the same as subtracting it from E.
inline PotentialSpec shifted(PotentialSpec p, double gamma) {
  auto V = p.V;
  p.V = [V, gamma](double x) { return V(x) + gamma; };
  p.shift += gamma;
  return p;
}

/// x -> -x. Used to treat the left tail of a whole-line potential.
inline PotentialSpec reflected(PotentialSpec p) {
  auto V = p.V;
  auto dV = p.dV;
  p.V = [V](double x) { return V(-x); };
  p.dV = [dV](double x) { return -dV(-x); };
  p.domain = WholeLine{};
  p.center = -p.center;
  std::swap(p.x_lo, p.x_hi);
  p.x_lo = -p.x_lo;
  p.x_hi = -p.x_hi;
  for (auto& b : p.breakpoints) b = -b;
  std::sort(p.breakpoints.begin(), p.breakpoints.end());
  p.label += "(reflected)";
  return p;
}

// ---------------------------------------------------------------------------
// tabulated potentials

/// Piecewise cubic Hermite curve through (x, V) with slopes dV.
struct TabulatedCurve {
  std::vector<double> x, V, dV;

  detail::HermiteCell<double> cell(std::size_t j) const {
    return {V[j], V[j + 1], dV[j], dV[j + 1], x[j + 1] - x[j]};
  }
  double value(double v) const {
    if (!(v >= x.front() && v <= x.back())) return std::numeric_limits<double>::quiet_NaN();
    const auto j = detail::locate_cell(x, v);
    return cell(j).value((v - x[j]) / (x[j + 1] - x[j]));
  }
  double derivative(double v) const {
    if (!(v >= x.front() && v <= x.back())) return std::numeric_limits<double>::quiet_NaN();
    const auto j = detail::locate_cell(x, v);
    return cell(j).derivative((v - x[j]) / (x[j + 1] - x[j]));
  }
};

inline PotentialSpec make_tabulated(TabulatedCurve curve, Domain domain, std::string label) {
  if (curve.x.size() < 5 || curve.V.size() != curve.x.size() || curve.dV.size() != curve.x.size())
    fail(ErrorFamily::config, "tabulated", "need at least 5 rows of (x, V, dV)");
  for (std::size_t i = 1; i < curve.x.size(); ++i)
    if (!(curve.x[i] > curve.x[i - 1])) fail(ErrorFamily::config, "tabulated", "x must be strictly increasing");
  for (std::size_t i = 0; i < curve.x.size(); ++i)
    if (!std::isfinite(curve.V[i]) || !std::isfinite(curve.dV[i]))
      fail(ErrorFamily::config, "tabulated", "nonfinite V or dV in table");
  auto shared = std::make_shared<const TabulatedCurve>(std::move(curve));
  PotentialSpec p;
  p.V = [shared](double x) { return shared->value(x); };
  p.dV = [shared](double x) { return shared->derivative(x); };
  p.domain = domain;
  p.label = std::move(label);
  p.x_lo = shared->x.front();
  p.x_hi = shared->x.back();
  const auto it = std::min_element(shared->V.begin(), shared->V.end());
  p.center = shared->x[static_cast<std::size_t>(it - shared->V.begin())];
  if (p.half_line() && p.wall() < p.x_lo)
    fail(ErrorFamily::config, "tabulated", "hard wall lies outside the table");
  return p;
}

/// Reads a CSV with header `x,V,dV` and strictly increasing x.
inline PotentialSpec load_potential_csv(const std::string& path, Domain domain) {
  std::ifstream in(path);
  if (!in) fail(ErrorFamily::config, "load_potential_csv", "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorFamily::config, "load_potential_csv", "empty file");
  line.erase(std::remove_if(line.begin(), line.end(), [](char ch) { return ch == ' ' || ch == '\r'; }),
             line.end());
  if (line != "x,V,dV") fail(ErrorFamily::config, "load_potential_csv", "header must be x,V,dV");
  TabulatedCurve t;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    double x, v, d;
    if (!(is >> x >> v >> d))
      fail(ErrorFamily::config, "load_potential_csv", "malformed row " + std::to_string(row));
    t.x.push_back(x);
    t.V.push_back(v);
    t.dV.push_back(d);
  }
  return make_tabulated(std::move(t), domain, path);
}

// ---------------------------------------------------------------------------
// invariant checks

struct PotentialCheck {
  double max_dv_rel_err = 0.0;       ///< finite differences vs dV
  double tail_ratio = 0.0;           ///< worst ratio of successive doubling-interval integrals
  bool confining = false;
  bool integrable_tail = false;
  bool ok() const { return confining && integrable_tail && max_dv_rel_err <= 1e-6; }
};

namespace detail {

inline double sqrt_v_integral(const PotentialSpec& p, double a, double b, double dir) {
  // 32 Gauss-Legendre cells over [a, b], V^{-1/2} with V evaluated at dir * x
  double acc = 0.0;
  const int cells = 32;
  const double h = (b - a) / cells;
  for (int i = 0; i < cells; ++i)
    for (std::size_t m = 0; m < 4; ++m) {
      const double x = a + h * (i + GaussLegendre4::nodes[m]);
      const double v = p.V(dir * x);
      if (std::isinf(v)) continue;
      acc += h * GaussLegendre4::weights[m] / std::sqrt(std::max(v, 1e-300));
    }
  return acc;
}

/// One tail (dir = +1 right, -1 left): monotone growth probe and integrability
/// of V^{-1/2} on a doubling sequence of intervals.
inline void check_tail(const PotentialSpec& p, double dir, PotentialCheck& out) {
  const double start = dir > 0 ? p.search_floor() : -p.center;
  const double limit = dir > 0 ? p.x_hi : -p.x_lo;
  double prevV = -kInf;
  bool growing = true;
  for (int j = 0; j <= 6; ++j) {
    const double x = start + std::ldexp(1.0, j);
    if (x > limit) break;
    const double v = p.V(dir * x);
    if (std::isnan(v)) break;
    if (!(v > prevV)) growing = false;
    prevV = v;
  }
  out.confining = out.confining && growing;

  // integrals over [s + 2^j, s + 2^{j+1}]; must shrink geometrically
  std::vector<double> I;
  for (int j = 0; j <= 5; ++j) {
    const double a = start + std::ldexp(1.0, j), b = start + std::ldexp(1.0, j + 1);
    if (b > limit) break;
    I.push_back(sqrt_v_integral(p, a, b, dir));
  }
  double worst = 0.0;
  bool ok = I.size() >= 3;
  for (std::size_t j = I.size() >= 3 ? I.size() - 3 : 0; j + 1 < I.size(); ++j) {
    if (I[j] < 1e-300) continue;
    worst = std::max(worst, I[j + 1] / I[j]);
  }
  if (worst > 0.95) ok = false;
  out.tail_ratio = std::max(out.tail_ratio, worst);
  out.integrable_tail = out.integrable_tail && ok;
}

}  // namespace detail

/// Probes the structural assumptions: dV consistent with V, V growing to +inf
/// and V^{-1/2} integrable on each infinite end. `samples` random points in
/// `[lo, hi]` are used for the derivative check.
inline PotentialCheck check_potential(const PotentialSpec& p, double lo, double hi, int samples = 100,
                                      unsigned seed = 12345) {
  PotentialCheck out;
  out.confining = true;
  out.integrable_tail = true;
  std::uint64_t state = seed;
  auto uniform = [&state]() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return double(state >> 11) * 0x1.0p-53;
  };
  for (int i = 0; i < samples; ++i) {
    const double x = lo + (hi - lo) * uniform();
    bool near_break = false;
    for (double b : p.breakpoints) near_break |= std::abs(x - b) < 1e-3;
    if (near_break) continue;
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    const double fd = (p.V(x - 2 * h) - 8 * p.V(x - h) + 8 * p.V(x + h) - p.V(x + 2 * h)) / (12 * h);
    const double d = p.dV(x);
    const double scale = std::max({std::abs(d), 1e-3 * std::abs(p.V(x)), 1e-12});
    out.max_dv_rel_err = std::max(out.max_dv_rel_err, std::abs(fd - d) / scale);
  }
  detail::check_tail(p, +1.0, out);
  if (!p.half_line()) detail::check_tail(p, -1.0, out);
  return out;
}

/// Throws a tail-conditions error when check_potential fails.
inline void require_valid(const PotentialSpec& p) {
  const double lo = p.half_line() ? p.wall() : p.center - 2.0;
  const auto chk = check_potential(p, lo, p.search_floor() + 2.0);
  if (!chk.confining) fail(ErrorFamily::tail_conditions, "potential", p.label + ": V does not grow on the tail");
  if (!chk.integrable_tail)
    fail(ErrorFamily::tail_conditions, "potential", p.label + ": integral of V^(-1/2) does not converge");
  if (chk.max_dv_rel_err > 1e-6)
    fail(ErrorFamily::tail_conditions, "potential", p.label + ": dV inconsistent with V");
}

// ---------------------------------------------------------------------------
// tail setup

/// Per-(potential, E) tail data: start x_E, truncation point X_max and the
/// graded mesh on which slopes are represented.
struct TailSetup {
  cplx E;
  double x_E = 0.0;
  double c = 0.0, eps = 0.0, beta = 0.0;
  double X_max = 0.0;
  std::vector<double> mesh;
  double truncation = 0.0;      ///< exp(-2 int_{x_E}^{X_max} k_r)
  std::size_t cert_end = 0;     ///< mesh[0..cert_end] have truncation factor <= tail_tol
};

namespace detail {

struct TailProbe {
  double kr = 0.0;
  bool cone = false, slope = false;
};

inline TailProbe probe_tail(const PotentialSpec& p, cplx E, double x, const Config& cfg, const char* stage) {
  const double v = p.V(x);
  if (!std::isfinite(v)) fail(ErrorFamily::tail_conditions, stage, "nonfinite V at x = " + std::to_string(x), E);
  TailProbe t;
  t.cone = v - E.real() > cfg.cone_factor * std::abs(E.imag());
  if (!t.cone) return t;
  t.kr = std::sqrt(cplx(v, 0.0) - E).real();
  t.slope = std::abs(p.dV(x)) <= 2.0 * cfg.c * t.kr * t.kr * t.kr;
  return t;
}

}  // namespace detail

/// Smallest point on the lattice floor + j * lattice_step beyond which the cone
/// and derivative conditions hold (sampled at 1/8 of the lattice step up to the
/// search horizon).
inline double find_tail_start(const PotentialSpec& p, cplx E, const Config& cfg,
                              std::optional<double> floor = std::nullopt) {
  const double f = floor.value_or(p.search_floor());
  const double hi = std::min(f + cfg.search_horizon, p.x_hi);
  const double ds = cfg.lattice_step / 8.0;
  const auto n = static_cast<long>(std::floor((hi - f) / ds));
  long last_fail = -1;
  for (long i = 0; i <= n; ++i) {
    const auto t = detail::probe_tail(p, E, f + i * ds, cfg, "find_tail_setup");
    if (!(t.cone && t.slope)) last_fail = i;
  }
  if (last_fail < 0) return f;
  const long lattice = last_fail / 8 + 1;
  const double xE = f + lattice * cfg.lattice_step;
  if (xE >= hi - cfg.lattice_step)
    fail(ErrorFamily::tail_conditions, "find_tail_setup",
         "cone/derivative conditions not satisfiable within the search horizon (c may be too small for this V)", E);
  return xE;
}

/// Builds the tail mesh from x_E. X_max is the first mesh point where the
/// truncation factor drops below tail_tol and, when `norm_delta` is given (the
/// largest |E - E_ref| the field will be compared across), where
/// max(1, norm_delta) / k_r^3 <= norm_tol so the asymptotic closure of the
/// normalization integral is accurate.
inline TailSetup find_tail_setup(const PotentialSpec& p, cplx E, const Config& cfg,
                                 std::optional<double> norm_delta = std::nullopt,
                                 std::optional<double> floor = std::nullopt) {
  cfg.validate();
  TailSetup s;
  s.E = E;
  s.c = cfg.c;
  s.eps = cfg.eps;
  s.beta = cfg.beta();
  s.x_E = find_tail_start(p, E, cfg, floor);

  const double need_k3 = norm_delta ? std::max(1.0, *norm_delta) / cfg.norm_tol : 0.0;
  double x = s.x_E;
  double phase = 0.0;  // int k_r from x_E
  auto t = detail::probe_tail(p, E, x, cfg, "find_tail_setup");
  s.mesh.push_back(x);
  std::vector<double> cumulative{0.0};
  double stop_at = kInf;
  while (x < stop_at) {
    double h = std::min(cfg.h_max, 1.0 / (cfg.mesh_density * t.kr));
    if (x + h > stop_at) h = stop_at - x;
    const double xn = x + h;
    if (xn > p.x_hi) fail(ErrorFamily::tail_conditions, "find_tail_setup", "tabulated range exhausted before truncation", E);
    const auto tn = detail::probe_tail(p, E, xn, cfg, "find_tail_setup");
    if (!(tn.cone && tn.slope))
      fail(ErrorFamily::tail_conditions, "find_tail_setup",
           "tail conditions fail at x = " + std::to_string(xn) + " beyond the search horizon", E);
    phase += 0.5 * h * (t.kr + tn.kr);
    x = xn;
    t = tn;
    s.mesh.push_back(x);
    cumulative.push_back(phase);
    if (s.mesh.size() > cfg.max_mesh)
      fail(ErrorFamily::tail_conditions, "find_tail_setup", "tail mesh exceeds max_mesh points", E);
    if (!std::isfinite(stop_at) && std::exp(-2.0 * phase) < cfg.tail_tol && t.kr * t.kr * t.kr >= need_k3)
      stop_at = x + cfg.x_max_extra;
  }
  s.X_max = x;
  s.truncation = std::exp(-2.0 * phase);

  // conditions must keep holding a little past X_max
  for (int i = 1; i <= 8; ++i) {
    const double xs = s.X_max + cfg.safety_margin * i / 8.0;
    if (xs > p.x_hi) break;
    const auto ts = detail::probe_tail(p, E, xs, cfg, "find_tail_setup");
    if (!(ts.cone && ts.slope))
      fail(ErrorFamily::tail_conditions, "find_tail_setup", "tail conditions fail just beyond X_max", E);
  }

  s.cert_end = 0;
  for (std::size_t i = 0; i < s.mesh.size(); ++i)
    if (std::exp(-2.0 * (phase - cumulative[i])) <= cfg.tail_tol) s.cert_end = i;
  return s;
}

/// Re-checks a TailSetup on the mesh refined by halving every step.
inline bool verify_tail_setup(const PotentialSpec& p, const TailSetup& s, const Config& cfg) {
  if (!(s.beta > 0.0) || !(s.truncation < cfg.tail_tol)) return false;
  for (std::size_t i = 0; i < s.mesh.size(); ++i) {
    for (int half = 0; half < 2; ++half) {
      if (half == 1 && i + 1 == s.mesh.size()) break;
      const double x = half == 0 ? s.mesh[i] : 0.5 * (s.mesh[i] + s.mesh[i + 1]);
      const double v = p.V(x);
      if (!std::isfinite(v)) return false;
      if (!(v - s.E.real() > cfg.cone_factor * std::abs(s.E.imag()))) return false;
      const double kr = std::sqrt(cplx(v) - s.E).real();
      if (!(std::abs(p.dV(x)) <= 2.0 * cfg.c * kr * kr * kr)) return false;
    }
  }
  // truncation certificate by the trapezoid on the refined mesh
  double refined = 0.0;
  for (std::size_t i = 0; i + 1 < s.mesh.size(); ++i) {
    const double a = s.mesh[i], b = s.mesh[i + 1], m = 0.5 * (a + b);
    auto kr = [&](double x) { return std::sqrt(cplx(p.V(x)) - s.E).real(); };
    refined += 0.25 * (b - a) * (kr(a) + 2.0 * kr(m) + kr(b));
  }
  return std::exp(-2.0 * refined) < cfg.tail_tol;
}

// ---------------------------------------------------------------------------
// width

namespace detail {

inline double bisect(const std::function<double(double)>& g, double lo, double hi, double tol) {
  double glo = g(lo);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Location of the minimum of a single-well potential.
inline double well_bottom(const PotentialSpec& p) {
  const double start = p.search_floor();
  if (p.half_line() && p.dV(start) >= 0.0) return start;
  // bracket a sign change of dV, expanding away from the start
  double lo = start, hi = start;
  double step = 0.25;
  for (int i = 0; i < 200 && p.dV(hi) < 0.0; ++i) hi += step, step *= 1.5;
  step = 0.25;
  if (!p.half_line())
    for (int i = 0; i < 200 && p.dV(lo) > 0.0; ++i) lo -= step, step *= 1.5;
  if (!(p.dV(hi) >= 0.0) || !(p.dV(lo) <= 0.0))
    fail(ErrorFamily::config, "width", "cannot bracket the bottom of the well");
  return bisect(p.dV, lo, hi, 1e-13);
}

}  // namespace detail

/// Length of the sublevel set {x : V(x) <= v} of a single-well potential;
/// 0 when v does not exceed the minimum. The left crossing is clamped at a hard
/// wall.
inline double width(const PotentialSpec& p, double v) {
  const double xm = detail::well_bottom(p);
  const double vmin = p.V(xm);
  if (!(v > vmin)) return 0.0;

  auto crossing = [&](double dir) {
    double step = 0.125, inner = xm, outer = xm;
    int n = 0;
    while (p.V(outer) <= v) {
      inner = outer;
      outer += dir * step;
      step *= 2.0;
      if (p.half_line() && dir < 0 && outer <= p.wall()) return p.wall();
      if (++n > 200) fail(ErrorFamily::config, "width", "level not reached");
    }
    // unimodality: V must be monotone between the bottom and the crossing
    const int probes = 64;
    double prev = p.V(xm);
    for (int i = 1; i <= probes; ++i) {
      const double x = xm + (outer - xm) * i / probes;
      const double vx = p.V(x);
      if (vx < prev - 1e-12 * std::abs(prev))
        fail(ErrorFamily::config, "width", "potential is not a single well (unsupported)");
      prev = vx;
    }
    auto g = [&](double x) { return p.V(x) - v; };
    return detail::bisect(g, std::min(inner, outer), std::max(inner, outer), 1e-10);
  };

  double left = xm;
  if (p.half_line() && xm <= p.wall()) {
    left = p.wall();
  } else {
    left = crossing(-1.0);
  }
  return crossing(+1.0) - left;
}

// ---------------------------------------------------------------------------
// Sturm-Liouville to Schrodinger

/// A coefficient function with its first two derivatives.
struct SLFunction {
  std::function<double(double)> f, d1, d2;
};

struct SLProblem {
  std::function<double(double)> q;
  SLFunction p, w;
  double z_lo = 0.0, z_hi = 1.0;
};

/// Potential of the Schrodinger form of -(p y')' + q y (weight w): with
/// Q = log(p w), dx/dz = sqrt(w/p) and psi = e^{Q/4} y,
/// V = Q''/4 + Q'^2/16 + q e^{-Q/2}, all derivatives in z.
inline double sl_potential_at(const SLProblem& sl, double z) {
  const double p = sl.p.f(z), w = sl.w.f(z);
  const double lp = sl.p.d1(z) / p, lw = sl.w.d1(z) / w;
  const double Q = std::log(p * w);
  const double Q1 = lp + lw;
  const double Q2 = sl.p.d2(z) / p - lp * lp + sl.w.d2(z) / w - lw * lw;
  return 0.25 * Q2 + Q1 * Q1 / 16.0 + sl.q(z) * std::exp(-0.5 * Q);
}

/// Result of the change of variables: the Schrodinger potential plus the map
/// z -> x on the sample grid.
struct SLTransform {
  PotentialSpec potential;
  std::vector<double> z, x;
};

/// Tabulates V on `n` uniform z samples, integrates x(z) = x_origin + int sqrt(w/p)
/// with 4-point Gauss-Legendre per cell, and interpolates V(x) by cubic Hermite
/// using fourth-order slopes dV/dz / (dx/dz); dV is the interpolant's
/// derivative (third order).
inline SLTransform sl_to_schrodinger(const SLProblem& sl, std::size_t n, Domain domain,
                                     std::optional<double> x_origin = std::nullopt) {
  if (n < 5 || !(sl.z_hi > sl.z_lo)) fail(ErrorFamily::config, "sl_to_schrodinger", "bad grid");
  SLTransform out;
  out.z.resize(n);
  out.x.resize(n);
  std::vector<double> Vz(n), jac(n);
  const double hz = (sl.z_hi - sl.z_lo) / double(n - 1);
  auto jacobian = [&](double z) {
    const double p = sl.p.f(z), w = sl.w.f(z);
    if (!(p > 0.0) || !(w > 0.0))
      fail(ErrorFamily::config, "sl_to_schrodinger", "p and w must be positive (z = " + std::to_string(z) + ")");
    return std::sqrt(w / p);
  };
  for (std::size_t i = 0; i < n; ++i) {
    out.z[i] = sl.z_lo + hz * double(i);
    jac[i] = jacobian(out.z[i]);
    Vz[i] = sl_potential_at(sl, out.z[i]);
  }
  out.x[0] = x_origin.value_or(sl.z_lo);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double acc = 0.0;
    for (std::size_t m = 0; m < 4; ++m)
      acc += detail::GaussLegendre4::weights[m] * jacobian(out.z[i] + hz * detail::GaussLegendre4::nodes[m]);
    out.x[i + 1] = out.x[i] + hz * acc;
    assert(out.x[i + 1] > out.x[i]);
  }
  const auto dVdz = detail::derivative_fd4<double>(out.z, Vz);
  TabulatedCurve t;
  t.x = out.x;
  t.V = Vz;
  t.dV.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.dV[i] = dVdz[i] / jac[i];
  out.potential = make_tabulated(std::move(t), domain, "sturm_liouville");
  return out;
}

}  // namespace shoot
