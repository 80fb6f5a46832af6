#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "shoot/characteristic.hpp"
#include "shoot/parallel.hpp"

namespace shoot {

struct Bracket {
  double lo = 0.0, hi = 0.0;
};

struct EigenvalueRecord {
  cplx E;
  int multiplicity = 1;
  double residual = 0.0;  ///< |P / dP| / max(1, |E|)
  std::optional<Bracket> bracket;
  int newton_steps = 0;
};

struct Rect {
  double re_lo, re_hi, im_lo, im_hi;
};

/// Prepares `f` for every energy in the closed rectangle (boundary and
/// interior sampled on a grid of `n` points per side).
inline void prepare_region(CharacteristicFunction& f, Rect r, int n = 33) {
  std::vector<cplx> Es;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= 4; ++j)
      Es.emplace_back(r.re_lo + (r.re_hi - r.re_lo) * i / n, r.im_lo + (r.im_hi - r.im_lo) * j / 4);
  f.prepare(Es);
}

// ---------------------------------------------------------------------------

struct RealScan {
  std::vector<double> E;
  std::vector<CharacteristicSample> samples;
  cplx gauge = 1.0;  ///< unit factor making P(E_min) real positive
  std::vector<Bracket> brackets;
  double max_imag_ratio = 0.0;  ///< max |Im(gauge P)| / |P| over the grid
};

/// Sign of gauge * P, checked to be real.
inline double gauged_real(const CharacteristicSample& s, cplx gauge, double* imag_ratio = nullptr) {
  const cplx v = gauge * s.P;
  if (imag_ratio) *imag_ratio = std::abs(v) > 0 ? std::abs(v.imag()) / std::abs(v) : 0.0;
  return v.real();
}

/// Samples P on n equally spaced real energies and returns the sign-change
/// brackets. `f` must be prepared for [E_min, E_max].
inline RealScan scan_real_axis(const CharacteristicFunction& f, double E_min, double E_max, int n,
                               unsigned threads = default_threads()) {
  if (!(E_min < E_max) || n < 2) fail(ErrorFamily::config, "scan_real_axis", "need E_min < E_max and n >= 2");
  RealScan out;
  out.E.resize(n);
  for (int i = 0; i < n; ++i) out.E[i] = E_min + (E_max - E_min) * i / (n - 1);
  out.samples = parallel_map<CharacteristicSample>(
      n, [&](std::size_t i) { return f.evaluate(out.E[i]); }, threads);
  const cplx p0 = out.samples.front().P;
  if (p0 == 0.0) fail(ErrorFamily::config, "scan_real_axis", "P vanishes at E_min", E_min);
  out.gauge = std::conj(p0) / std::abs(p0);
  std::vector<double> sgn(n);
  for (int i = 0; i < n; ++i) {
    double ratio = 0.0;
    sgn[i] = gauged_real(out.samples[i], out.gauge, &ratio);
    out.max_imag_ratio = std::max(out.max_imag_ratio, ratio);
    if (ratio > 1e-6)
      fail(ErrorFamily::certificate, "scan_real_axis", "P is not real on the real axis after gauge fixing", out.E[i]);
  }
  for (int i = 0; i + 1 < n; ++i) {
    if (sgn[i] == 0.0) {
      out.brackets.push_back({out.E[i], out.E[i]});
      continue;
    }
    if (sgn[i + 1] != 0.0 && (sgn[i] < 0) != (sgn[i + 1] < 0)) out.brackets.push_back({out.E[i], out.E[i + 1]});
  }
  return out;
}

// ---------------------------------------------------------------------------

inline double zero_residual(const CharacteristicSample& s) {
  if (s.P == 0.0) return 0.0;
  return std::abs(s.P / s.dP) / std::max(1.0, std::abs(s.E));
}

namespace detail {

/// Flags a multiple zero: for a simple zero |P(E + h)| ~ |dP(E)| h.
inline void check_simple(const CharacteristicFunction& f, const CharacteristicSample& s, double h) {
  const CharacteristicSample t = f.evaluate(s.E + h);
  const double lhs = std::log(std::abs(s.dP) * h) + s.log_scale;
  const double rhs = t.log_abs();
  if (!(lhs > rhs - std::log(10.0)))
    fail(ErrorFamily::certificate, "refine_eigenvalue", "dP vanishes at the zero (multiple eigenvalue?)", s.E);
}

}  // namespace detail

/// Newton E <- E - P/dP from a complex seed, at most 50 steps.
inline EigenvalueRecord refine_eigenvalue(const CharacteristicFunction& f, cplx seed) {
  const Config& cfg = f.config();
  EigenvalueRecord rec;
  cplx E = seed;
  for (int it = 0; it < 50; ++it) {
    const CharacteristicSample s = f.evaluate(E);
    rec.residual = zero_residual(s);
    rec.E = E;
    rec.newton_steps = it;
    if (rec.residual <= 1e-3 * cfg.res_tol) break;
    const cplx step = s.P / s.dP;
    if (!std::isfinite(step.real()) || !std::isfinite(step.imag()))
      fail(ErrorFamily::convergence, "refine_eigenvalue", "Newton step is not finite", E);
    E -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(E))) {
      const CharacteristicSample t = f.evaluate(E);
      rec.E = E;
      rec.residual = zero_residual(t);
      rec.newton_steps = it + 1;
      break;
    }
  }
  if (!(rec.residual <= cfg.res_tol))
    fail(ErrorFamily::convergence, "refine_eigenvalue", "Newton did not reach the residual tolerance", rec.E);
  detail::check_simple(f, f.evaluate(rec.E), 1e-4 * std::max(1.0, std::abs(rec.E)));
  return rec;
}

/// Newton inside a real bracket with a bisection fallback whenever the step
/// leaves the current bracket. `gauge` makes P real on the axis.
inline EigenvalueRecord refine_eigenvalue(const CharacteristicFunction& f, Bracket br, cplx gauge) {
  const Config& cfg = f.config();
  EigenvalueRecord rec;
  rec.bracket = br;
  double lo = br.lo, hi = br.hi;
  auto val = [&](const CharacteristicSample& s) { return gauged_real(s, gauge); };
  if (lo == hi) {
    rec.E = lo;
    rec.residual = zero_residual(f.evaluate(lo));
    return rec;
  }
  const double flo = val(f.evaluate(lo));
  double E = 0.5 * (lo + hi);
  for (int it = 1; it <= 50; ++it) {
    const CharacteristicSample s = f.evaluate(E);
    rec.E = E;
    rec.newton_steps = it;
    rec.residual = zero_residual(s);
    if (rec.residual <= 1e-3 * cfg.res_tol) break;
    const double fe = val(s);
    if ((fe < 0) == (flo < 0))
      lo = E;
    else
      hi = E;
    const double step = (s.P / s.dP).real();
    double next = E - step;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - E) <= 1e-15 * std::max(1.0, std::abs(E))) {
      rec.E = next;
      rec.residual = zero_residual(f.evaluate(next));
      break;
    }
    E = next;
  }
  if (!(rec.residual <= cfg.res_tol))
    fail(ErrorFamily::convergence, "refine_eigenvalue", "bracketed Newton did not reach the residual tolerance", rec.E);
  const CharacteristicSample s = f.evaluate(rec.E);
  if (std::abs(rec.E.imag()) > 1e-9 * std::max(1.0, std::abs(rec.E)))
    fail(ErrorFamily::certificate, "refine_eigenvalue", "eigenvalue left the real axis", rec.E);
  detail::check_simple(f, s, 1e-4 * std::max(1.0, std::abs(rec.E)));
  return rec;
}

/// Scan plus bracketed Newton on [E_min, E_max]; refinement runs in parallel
/// across brackets.
inline std::vector<EigenvalueRecord> real_eigenvalues(const CharacteristicFunction& f, double E_min, double E_max,
                                                      int n, unsigned threads = default_threads(),
                                                      RealScan* scan_out = nullptr) {
  RealScan scan = scan_real_axis(f, E_min, E_max, n, threads);
  auto recs = parallel_map<EigenvalueRecord>(
      scan.brackets.size(), [&](std::size_t i) { return refine_eigenvalue(f, scan.brackets[i], scan.gauge); },
      threads);
  if (scan_out) *scan_out = std::move(scan);
  return recs;
}

// ---------------------------------------------------------------------------

struct ContourCount {
  int count = 0;
  double raw = 0.0;        ///< (1/2 pi i) of the trapezoid sum of dP/P, before rounding
  double winding = 0.0;    ///< unwrapped phase change / 2 pi
  std::size_t samples = 0;
  int perturbations = 0;
  Rect rect{};
};

namespace detail {

struct ContourNode {
  cplx E;
  CharacteristicSample s;
};

/// One attempt at the argument principle on the boundary of r. Returns
/// nullopt when a boundary sample is (nearly) a zero.
inline std::optional<ContourCount> contour_attempt(const CharacteristicFunction& f, Rect r, unsigned threads,
                                                   int per_edge, int max_rounds) {
  const std::array<cplx, 4> corners = {cplx(r.re_lo, r.im_lo), cplx(r.re_hi, r.im_lo), cplx(r.re_hi, r.im_hi),
                                       cplx(r.re_lo, r.im_hi)};
  std::vector<cplx> pts;
  for (int e = 0; e < 4; ++e)
    for (int i = 0; i < per_edge; ++i)
      pts.push_back(corners[e] + (corners[(e + 1) % 4] - corners[e]) * (double(i) / per_edge));
  auto eval = [&](const std::vector<cplx>& Es) {
    return parallel_map<CharacteristicSample>(Es.size(), [&](std::size_t i) { return f.evaluate(Es[i]); }, threads);
  };
  auto samples = eval(pts);
  std::vector<ContourNode> nodes;
  for (std::size_t i = 0; i < pts.size(); ++i) nodes.push_back({pts[i], samples[i]});

  auto seg_ok = [](const ContourNode& a, const ContourNode& b) {
    const cplx ga = a.s.dP / a.s.P, gb = b.s.dP / b.s.P;
    const cplx trap = 0.5 * (b.E - a.E) * (ga + gb);
    const cplx jump = std::log(b.s.P / a.s.P) + (b.s.log_scale - a.s.log_scale);
    return std::abs(jump.imag()) < std::numbers::pi / 4 && std::abs(trap - jump) < 0.005;
  };
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (!seg_ok(nodes[i], nodes[(i + 1) % nodes.size()])) bad.push_back(i);
    if (bad.empty()) break;
    if (round + 1 == max_rounds) return std::nullopt;
    std::vector<cplx> mids;
    for (std::size_t i : bad) mids.push_back(0.5 * (nodes[i].E + nodes[(i + 1) % nodes.size()].E));
    auto ms = eval(mids);
    std::vector<ContourNode> next;
    std::size_t k = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      next.push_back(nodes[i]);
      if (k < bad.size() && bad[k] == i) next.push_back({mids[k], ms[k]}), ++k;
    }
    nodes = std::move(next);
  }
  cplx trap = 0.0;
  double phase = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const ContourNode& a = nodes[i];
    const ContourNode& b = nodes[(i + 1) % nodes.size()];
    trap += 0.5 * (b.E - a.E) * (a.s.dP / a.s.P + b.s.dP / b.s.P);
    phase += std::arg(b.s.P / a.s.P);
  }
  ContourCount c;
  c.raw = (trap / cplx(0.0, 2 * std::numbers::pi)).real();
  c.winding = phase / (2 * std::numbers::pi);
  c.count = static_cast<int>(std::lround(c.winding));
  c.samples = nodes.size();
  c.rect = r;
  return c;
}

}  // namespace detail

/// Number of zeros of P inside r by the argument principle. The boundary is
/// refined adaptively until every segment's phase change is small and agrees
/// with the trapezoid integral of dP/P. If that fails (a zero close to the
/// boundary) the rectangle is moved outward by a random offset <= 1e-3.
inline ContourCount count_zeros_rectangle(const CharacteristicFunction& f, Rect r,
                                          unsigned threads = default_threads(), int per_edge = 32,
                                          unsigned seed = 12345) {
  if (!(r.re_lo < r.re_hi && r.im_lo < r.im_hi)) fail(ErrorFamily::config, "count_zeros_rectangle", "empty rectangle");
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1e-3);
  Rect cur = r;
  for (int attempt = 0; attempt < 4; ++attempt) {
    auto c = detail::contour_attempt(f, cur, threads, per_edge, 10);
    if (c && std::abs(c->raw - c->count) <= 0.05) {
      c->perturbations = attempt;
      return *c;
    }
    cur = {r.re_lo - u(rng), r.re_hi + u(rng), r.im_lo - u(rng), r.im_hi + u(rng)};
  }
  fail(ErrorFamily::certificate, "count_zeros_rectangle", "contour count is not within 0.05 of an integer",
       cplx(r.re_lo, r.im_lo));
}

// ---------------------------------------------------------------------------

struct GrowthFit {
  double exponent = 0.0;
  double ci_half_width = 0.0;  ///< 2 standard errors
  std::vector<double> r;
  std::vector<double> log_abs;  ///< ln|P(-r) / P(0)|
};

/// Least-squares slope of ln ln|P(-r)/P(0)| against ln r.
inline GrowthFit growth_order_estimate(const PotentialSpec& p, std::vector<double> r_list, const Config& cfg = {},
                                       unsigned threads = default_threads()) {
  if (r_list.size() < 4 || !std::is_sorted(r_list.begin(), r_list.end()) || r_list.front() <= 0 ||
      r_list.back() / r_list.front() < 1e3)
    fail(ErrorFamily::config, "growth_order_estimate", "need >= 4 increasing r spanning >= 3 decades");
  CharacteristicFunction f(p, cfg);
  std::vector<cplx> Es{0.0};
  for (double r : r_list) Es.push_back(-r);
  f.prepare(Es);
  auto samples = parallel_map<CharacteristicSample>(
      Es.size(), [&](std::size_t i) { return f.evaluate(Es[i]); }, threads);
  GrowthFit g;
  g.r = r_list;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < r_list.size(); ++i) {
    const double la = samples[i + 1].log_abs() - samples[0].log_abs();
    if (!std::isfinite(la)) fail(ErrorFamily::convergence, "growth_order_estimate", "log|P| is not finite", Es[i + 1]);
    if (!(la > 0)) fail(ErrorFamily::certificate, "growth_order_estimate", "|P(-r)| <= |P(0)|", Es[i + 1]);
    g.log_abs.push_back(la);
    xs.push_back(std::log(r_list[i]));
    ys.push_back(std::log(la));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
  g.exponent = sxy / sxx;
  double rss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - my - g.exponent * (xs[i] - mx);
    rss += e * e;
  }
  g.ci_half_width = 2.0 * std::sqrt(rss / (n - 2) / sxx);
  return g;
}

// ---------------------------------------------------------------------------
// naive finite-b shooting

/// psi(a) and d psi/dE (a) for the solution with psi(b) = 0, psi'(b) = 1,
/// integrated leftwards to the wall.
inline CharacteristicSample naive_characteristic(const PotentialSpec& p, cplx E, double b, const Config& cfg = {}) {
  if (!p.half_line()) fail(ErrorFamily::config, "naive_characteristic", "naive shooting needs a hard wall", E);
  WaveState start{0.0, 1.0, 0.0, 0.0, 0.0};
  const WaveState w = propagate_left(p, E, b, start, p.wall(), cfg);
  CharacteristicSample s;
  s.E = E;
  s.P = w.psi;
  s.dP = w.psi_E;
  s.log_scale = w.log_scale;
  s.x0 = b;
  return s;
}

/// Real Newton on the naive characteristic function from `seed`.
inline double naive_eigenvalue(const PotentialSpec& p, double seed, double b, const Config& cfg = {}) {
  double E = seed;
  for (int it = 0; it < 50; ++it) {
    const CharacteristicSample s = naive_characteristic(p, E, b, cfg);
    const double step = (s.P / s.dP).real();
    E -= step;
    if (std::abs(step) <= 1e-14 * std::max(1.0, std::abs(E))) return E;
  }
  fail(ErrorFamily::convergence, "naive_eigenvalue", "Newton did not converge", seed);
}

struct ConvergenceRow {
  int index = 0;
  double b = 0.0;
  double E_naive = 0.0;
  double error = 0.0;
};

struct ConvergenceReport {
  std::vector<double> exact;           ///< eigenvalues with the default tail mesh
  std::vector<double> exact_extended;  ///< same with X_max extended by `extension`
  double max_shift = 0.0;
  std::vector<ConvergenceRow> rows;
  bool monotone = true;
};

/// Naive finite-b shooting against the exact start for the eigenvalues of
/// index `indices` (1-based) in the first `E_max` of the spectrum.
inline ConvergenceReport convergence_report(const PotentialSpec& p, std::vector<int> indices, std::vector<double> bs,
                                            double E_max, const Config& cfg = {}, double extension = 2.0,
                                            int scan_points = 100, unsigned threads = default_threads()) {
  if (!p.half_line()) fail(ErrorFamily::config, "convergence_report", "needs a hard-wall potential");
  auto eigs = [&](const Config& c) {
    CharacteristicFunction f(p, c);
    prepare_region(f, {p.search_floor(), E_max, -1.0, 1.0}, 16);
    auto recs = real_eigenvalues(f, p.search_floor(), E_max, scan_points, threads);
    std::vector<double> out;
    for (auto& r : recs) out.push_back(r.E.real());
    return out;
  };
  ConvergenceReport rep;
  rep.exact = eigs(cfg);
  Config ext = cfg;
  ext.x_max_extra += extension;
  rep.exact_extended = eigs(ext);
  if (rep.exact.size() != rep.exact_extended.size())
    fail(ErrorFamily::certificate, "convergence_report", "eigenvalue count changed under X_max extension");
  for (std::size_t i = 0; i < rep.exact.size(); ++i)
    rep.max_shift = std::max(rep.max_shift, std::abs(rep.exact[i] - rep.exact_extended[i]));
  for (int idx : indices) {
    if (idx < 1 || idx > static_cast<int>(rep.exact.size()))
      fail(ErrorFamily::config, "convergence_report", "eigenvalue index out of range");
    const double Ex = rep.exact[idx - 1];
    const double xt = p.wall() + width(p, Ex);
    double prev = kInf;
    for (double b : bs) {
      if (b <= xt) fail(ErrorFamily::config, "convergence_report", "b lies below the turning point", Ex);
      const double En = naive_eigenvalue(p, Ex, b, cfg);
      const double err = std::abs(En - Ex);
      rep.rows.push_back({idx, b, En, err});
      if (!(err < prev) && err > 1e-13 * std::max(1.0, std::abs(Ex))) rep.monotone = false;
      prev = err;
    }
  }
  return rep;
}

}  // namespace shoot
