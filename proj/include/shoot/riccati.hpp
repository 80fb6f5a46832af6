#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "shoot/config.hpp"
#include "shoot/detail/numerics.hpp"
#include "shoot/potentials.hpp"

namespace shoot {

/// k = sqrt(V(x) - E) on the branch with Re k > 0. Requires the cone condition
/// V - Re E > cone_factor |Im E|, under which |Im k| < Re k.
inline cplx wavenumber(const PotentialSpec& p, cplx E, double x, const Config& cfg = {}) {
  const double v = p.V(x);
  if (!std::isfinite(v)) fail(ErrorFamily::tail_conditions, "wavenumber", "nonfinite V", E);
  if (!(v - E.real() > cfg.cone_factor * std::abs(E.imag())))
    fail(ErrorFamily::tail_conditions, "wavenumber",
         "cone condition violated at x = " + std::to_string(x) + "; square-root branch is ambiguous", E);
  return std::sqrt(cplx(v) - E);
}

/// Samples of a field and its x-derivative on a tail mesh.
struct FieldSamples {
  std::vector<cplx> value, deriv;
};

/// max( sup |f|/|k|, sup |f'|/|k|^2 ) over the mesh.
inline double weighted_norm(std::span<const cplx> f, std::span<const cplx> df, std::span<const cplx> k) {
  if (f.size() != k.size() || df.size() != k.size())
    fail(ErrorFamily::config, "weighted_norm", "fields sampled on different meshes");
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double ak = std::abs(k[i]);
    a = std::max(a, std::abs(f[i]) / ak);
    b = std::max(b, std::abs(df[i]) / (ak * ak));
  }
  return std::max(a, b);
}

/// Weighted norm with f' taken from fourth-order finite differences on `mesh`.
inline double weighted_norm(std::span<const double> mesh, std::span<const cplx> f, std::span<const cplx> k) {
  if (f.size() != mesh.size() || k.size() != mesh.size())
    fail(ErrorFamily::config, "weighted_norm", "fields sampled on different meshes");
  const auto df = detail::derivative_fd4<cplx>(mesh, f);
  return weighted_norm(f, df, k);
}

// ---------------------------------------------------------------------------
// quadrature data on the tail mesh

/// Everything about the mesh that depends on (V, E) but not on the slope
/// iterate: k and k' at mesh points, k^2 at four Gauss nodes per cell, the
/// damping weights h w_m exp(-2 int_{x_j}^{y_m} k) and the cell transfer
/// factors exp(-2 int_cell k).
struct TailGrid {
  TailSetup setup;
  std::vector<cplx> k, dk;
  std::vector<std::array<cplx, 4>> k2_node;
  std::vector<std::array<cplx, 4>> damp;
  std::vector<cplx> transfer;

  std::size_t size() const { return k.size(); }
  double step(std::size_t j) const { return setup.mesh[j + 1] - setup.mesh[j]; }
};

inline TailGrid make_tail_grid(const PotentialSpec& p, const TailSetup& setup, const Config& cfg = {}) {
  using GL = detail::GaussLegendre4;
  TailGrid g;
  g.setup = setup;
  const auto& x = setup.mesh;
  const std::size_t n = x.size();
  if (n < 5) fail(ErrorFamily::tail_conditions, "tail_grid", "tail mesh too short", setup.E);
  g.k.resize(n);
  g.dk.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.k[i] = wavenumber(p, setup.E, x[i], cfg);
    g.dk[i] = p.dV(x[i]) / (2.0 * g.k[i]);
  }
  g.k2_node.resize(n - 1);
  g.damp.resize(n - 1);
  g.transfer.resize(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double h = x[j + 1] - x[j];
    const detail::HermiteCell<cplx> kc{g.k[j], g.k[j + 1], g.dk[j], g.dk[j + 1], h};
    for (std::size_t m = 0; m < 4; ++m) {
      g.k2_node[j][m] = cplx(p.V(x[j] + h * GL::nodes[m])) - setup.E;
      g.damp[j][m] = h * GL::weights[m] * std::exp(-2.0 * kc.integral(GL::nodes[m]));
    }
    g.transfer[j] = std::exp(-2.0 * kc.integral());
  }
  return g;
}

namespace detail {

/// Hermite basis values and derivatives at the four Gauss nodes.
struct NodeBasis {
  std::array<std::array<double, 4>, 4> val{}, der{};  // [node][h00,h10,h01,h11]
  NodeBasis() {
    for (std::size_t m = 0; m < 4; ++m) {
      const double t = GaussLegendre4::nodes[m], t2 = t * t, t3 = t2 * t;
      val[m] = {2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t, -2 * t3 + 3 * t2, t3 - t2};
      der[m] = {6 * t2 - 6 * t, 3 * t2 - 4 * t + 1, -6 * t2 + 6 * t, 3 * t2 - 2 * t};
    }
  }
};

inline const NodeBasis& node_basis() {
  static const NodeBasis b;
  return b;
}

}  // namespace detail

/// One application of the contraction map
///   C[S](x) = S(x) + int_x^inf exp(-2 int_x^y k) (S' + S^2 - k^2)(y) dy,
/// with C[S]' = (k^2 - S^2) + 2k (C[S] - S) taken from the closed form. The
/// integral is accumulated right to left cell by cell (Gauss nodes, Hermite
/// interpolation of S). Beyond X_max the integral is closed by its leading
/// term f(X)/(2k(X)); `closure_bound`, when given, receives the bound
/// |f| k_r / (|k|^2 (1 - c/2)) on the neglected remainder at X_max.
inline FieldSamples contraction_step(const TailGrid& g, const FieldSamples& S, double* closure_bound = nullptr) {
  const std::size_t n = g.size();
  if (S.value.size() != n || S.deriv.size() != n)
    fail(ErrorFamily::config, "contraction_step", "iterate not sampled on the tail mesh", g.setup.E);
  const auto& B = detail::node_basis();
  FieldSamples out;
  out.value.resize(n);
  out.deriv.resize(n);

  const cplx fN = S.deriv[n - 1] + S.value[n - 1] * S.value[n - 1] - g.k[n - 1] * g.k[n - 1];
  cplx D = fN / (2.0 * g.k[n - 1]);
  if (closure_bound) {
    const double ak = std::abs(g.k[n - 1]);
    *closure_bound = std::abs(fN) * g.k[n - 1].real() / (ak * ak * (1.0 - g.setup.c / 2.0));
  }
  auto emit = [&](std::size_t i, cplx Di) {
    out.value[i] = S.value[i] + Di;
    out.deriv[i] = (g.k[i] * g.k[i] - S.value[i] * S.value[i]) + 2.0 * g.k[i] * Di;
  };
  emit(n - 1, D);
  for (std::size_t jj = n - 1; jj-- > 0;) {
    const std::size_t j = jj;
    const double h = g.step(j);
    const cplx s0 = S.value[j], s1 = S.value[j + 1], d0 = S.deriv[j] * h, d1 = S.deriv[j + 1] * h;
    cplx cell{};
    for (std::size_t m = 0; m < 4; ++m) {
      const auto& v = B.val[m];
      const auto& w = B.der[m];
      const cplx s = v[0] * s0 + v[1] * d0 + v[2] * s1 + v[3] * d1;
      const cplx ds = (w[0] * s0 + w[1] * d0 + w[2] * s1 + w[3] * d1) / h;
      cell += g.damp[j][m] * (ds + s * s - g.k2_node[j][m]);
    }
    D = g.transfer[j] * D + cell;
    emit(j, D);
  }
  return out;
}

// ---------------------------------------------------------------------------
// the slope field

/// The decaying-subspace slope S = psi'/psi on the tail mesh and its energy
/// derivative sigma = dS/dE.
struct SlopeField {
  TailSetup setup;
  std::vector<cplx> k, dk;
  std::vector<cplx> S, dS;
  std::vector<cplx> sigma, dsigma;
  double norm_dist = 0.0;          ///< ||S + k||
  double first_step = 0.0;         ///< ||C[-k] + k||
  double closure_bound = 0.0;      ///< tail closure of the last contraction step
  double sigma_closure = 0.0;      ///< |sigma| bound at X_max
  int iters = 0;
  std::vector<double> increments;  ///< ||S_{n+1} - S_n|| per iteration

  cplx E() const { return setup.E; }
  const std::vector<double>& mesh() const { return setup.mesh; }

  /// Largest ratio of successive increments, ignoring increments below `floor`
  /// (rounding noise).
  double max_contraction_ratio(double floor = 1e-11) const {
    double r = 0.0;
    for (std::size_t i = 1; i < increments.size(); ++i)
      if (increments[i - 1] > floor && increments[i] > floor) r = std::max(r, increments[i] / increments[i - 1]);
    return r;
  }

  cplx slope_at(double x) const { return interp(S, dS, x); }
  cplx sigma_at(double x) const { return interp(sigma, dsigma, x); }

  /// int_a^b S dx and int_a^b sigma dx over the Hermite interpolants.
  cplx integral_S(double a, double b) const { return cumulative(cumS_, S, dS, b) - cumulative(cumS_, S, dS, a); }
  cplx integral_sigma(double a, double b) const {
    return cumulative(cumSigma_, sigma, dsigma, b) - cumulative(cumSigma_, sigma, dsigma, a);
  }

  void finalize_integrals() {
    cumS_ = running(S, dS);
    cumSigma_ = running(sigma, dsigma);
  }

 private:
  std::vector<cplx> cumS_, cumSigma_;

  detail::HermiteCell<cplx> cell(const std::vector<cplx>& f, const std::vector<cplx>& d, std::size_t j) const {
    return {f[j], f[j + 1], d[j], d[j + 1], setup.mesh[j + 1] - setup.mesh[j]};
  }
  void check_range(double x) const {
    if (!(x >= setup.mesh.front() - 1e-12 && x <= setup.mesh.back() + 1e-12))
      fail(ErrorFamily::config, "slope_field", "x = " + std::to_string(x) + " outside the tail mesh", setup.E);
  }
  cplx interp(const std::vector<cplx>& f, const std::vector<cplx>& d, double x) const {
    check_range(x);
    const auto j = detail::locate_cell(setup.mesh, x);
    return cell(f, d, j).value(std::clamp((x - setup.mesh[j]) / (setup.mesh[j + 1] - setup.mesh[j]), 0.0, 1.0));
  }
  std::vector<cplx> running(const std::vector<cplx>& f, const std::vector<cplx>& d) const {
    std::vector<cplx> c(f.size());
    for (std::size_t j = 0; j + 1 < f.size(); ++j) c[j + 1] = c[j] + cell(f, d, j).integral();
    return c;
  }
  cplx cumulative(const std::vector<cplx>& cum, const std::vector<cplx>& f, const std::vector<cplx>& d,
                  double x) const {
    check_range(x);
    const auto j = detail::locate_cell(setup.mesh, x);
    const double t = std::clamp((x - setup.mesh[j]) / (setup.mesh[j + 1] - setup.mesh[j]), 0.0, 1.0);
    return cum[j] + cell(f, d, j).integral(t);
  }
};

/// Fills sigma = dS/dE from sigma(x) = int_x^inf exp(2 int_x^y S) dy, using the
/// same cell recursion as the contraction map; beyond X_max the asymptotic
/// value -1/(2S) - S'/(4S^3) closes the integral.
inline void slope_energy_derivative(SlopeField& f, const Config& cfg = {}) {
  using GL = detail::GaussLegendre4;
  const std::size_t n = f.S.size();
  f.sigma.assign(n, {});
  f.dsigma.assign(n, {});
  const cplx SN = f.S[n - 1];
  cplx sig = -1.0 / (2.0 * SN) - f.dS[n - 1] / (4.0 * SN * SN * SN);
  f.sigma_closure = cfg.sigma_bound_factor() / std::abs(f.k[n - 1]);
  if (!std::isfinite(std::abs(sig)))
    fail(ErrorFamily::certificate, "slope_energy_derivative", "tail closure is not finite", f.E());
  f.sigma[n - 1] = sig;
  for (std::size_t j = n - 1; j-- > 0;) {
    const double h = f.setup.mesh[j + 1] - f.setup.mesh[j];
    const detail::HermiteCell<cplx> sc{f.S[j], f.S[j + 1], f.dS[j], f.dS[j + 1], h};
    cplx cell{};
    for (std::size_t m = 0; m < 4; ++m) cell += h * GL::weights[m] * std::exp(2.0 * sc.integral(GL::nodes[m]));
    sig = std::exp(2.0 * sc.integral()) * sig + cell;
    f.sigma[j] = sig;
  }
  for (std::size_t i = 0; i < n; ++i) f.dsigma[i] = -1.0 - 2.0 * f.S[i] * f.sigma[i];
}

/// Diagnostics of the SlopeField invariants.
struct SlopeCheck {
  double worst_decay = -kInf;    ///< max of (Re S + beta k_r) / k_r, must be <= 0
  double worst_sigma = 0.0;      ///< max |sigma| |k| / bound, must be <= 1
  double worst_residual = 0.0;   ///< max |S'_fd - (k^2 - S^2)| / |k|^2 on the certified interior
  double worst_sigma_residual = 0.0;  ///< same for sigma' = -1 - 2 S sigma, relative to 1
  bool branch_ok = true;         ///< Re k > 0 and |Im k| < Re k
  bool in_ball = true;
};

inline SlopeCheck check_slope_field(const SlopeField& f, const Config& cfg) {
  SlopeCheck c;
  const double beta = cfg.beta();
  const double sb = cfg.sigma_bound_factor();
  const std::size_t n = f.S.size();
  for (std::size_t i = 0; i < n; ++i) {
    const cplx k = f.k[i];
    if (!(k.real() > 0.0 && std::abs(k.imag()) < k.real())) c.branch_ok = false;
    c.worst_decay = std::max(c.worst_decay, (f.S[i].real() + beta * k.real()) / k.real());
    if (!f.sigma.empty()) c.worst_sigma = std::max(c.worst_sigma, std::abs(f.sigma[i]) * std::abs(k) / sb);
  }
  c.in_ball = f.norm_dist <= cfg.eps;
  // residuals use the finite-difference derivative of the weighted norm
  const auto& x = f.setup.mesh;
  const std::size_t hi = std::min(f.setup.cert_end, n - 1);
  if (hi >= 6) {
    const std::size_t lo = 2, top = hi - 2;
    for (std::size_t i = lo; i <= top; ++i) {
      const std::size_t s = std::min(i - 2, n - 5);
      const auto w = detail::fd_weights_first(x[i], std::span<const double>(x).subspan(s, 5));
      cplx dS{}, dsig{};
      for (std::size_t j = 0; j < 5; ++j) {
        dS += w[j] * f.S[s + j];
        if (!f.sigma.empty()) dsig += w[j] * f.sigma[s + j];
      }
      const cplx k2 = f.k[i] * f.k[i];
      c.worst_residual = std::max(c.worst_residual, std::abs(dS - (k2 - f.S[i] * f.S[i])) / std::abs(k2));
      if (!f.sigma.empty())
        c.worst_sigma_residual = std::max(c.worst_sigma_residual, std::abs(dsig - (-1.0 - 2.0 * f.S[i] * f.sigma[i])));
    }
  }
  return c;
}

/// Fixed point of the contraction map by iteration from S = -k. Stops when
/// ||S_{n+1} - S_n|| < tol (1 - alpha); leaving the eps-ball or exceeding
/// max_iters is an error. Also fills sigma and verifies the field invariants.
inline SlopeField solve_slope(const PotentialSpec& p, cplx E, const TailSetup& setup, const Config& cfg = {},
                              bool verify = true) {
  const TailGrid g = make_tail_grid(p, setup, cfg);
  const std::size_t n = g.size();
  SlopeField f;
  f.setup = setup;
  f.k = g.k;
  f.dk = g.dk;
  FieldSamples cur;
  cur.value.resize(n);
  cur.deriv.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cur.value[i] = -g.k[i];
    cur.deriv[i] = -g.dk[i];
  }
  std::vector<cplx> diff(n), ddiff(n);
  auto distance = [&](const FieldSamples& a, const FieldSamples& b) {
    for (std::size_t i = 0; i < n; ++i) {
      diff[i] = a.value[i] - b.value[i];
      ddiff[i] = a.deriv[i] - b.deriv[i];
    }
    return weighted_norm(diff, ddiff, g.k);
  };
  auto ball = [&](const FieldSamples& a) {
    for (std::size_t i = 0; i < n; ++i) {
      diff[i] = a.value[i] + g.k[i];
      ddiff[i] = a.deriv[i] + g.dk[i];
    }
    return weighted_norm(diff, ddiff, g.k);
  };
  const double stop = cfg.tol * (1.0 - cfg.alpha());
  for (int it = 1;; ++it) {
    FieldSamples next = contraction_step(g, cur, &f.closure_bound);
    const double inc = distance(next, cur);
    f.increments.push_back(inc);
    if (it == 1) f.first_step = inc;
    const double dist = ball(next);
    if (!(dist <= cfg.eps))
      fail(ErrorFamily::convergence, "solve_slope",
           "iterate left the contraction ball (||S + k|| = " + std::to_string(dist) + ")", E);
    cur = std::move(next);
    f.iters = it;
    f.norm_dist = dist;
    if (inc < stop) break;
    if (it >= cfg.max_iters)
      fail(ErrorFamily::convergence, "solve_slope", "no convergence within max_iters", E);
  }
  f.S = std::move(cur.value);
  f.dS = std::move(cur.deriv);
  slope_energy_derivative(f, cfg);
  f.finalize_integrals();

  if (verify) {
    const auto c = check_slope_field(f, cfg);
    if (!c.branch_ok) fail(ErrorFamily::certificate, "solve_slope", "wavenumber branch inequality violated", E);
    if (!c.in_ball) fail(ErrorFamily::certificate, "solve_slope", "fixed point outside the contraction ball", E);
    if (c.worst_decay > 0.0) fail(ErrorFamily::certificate, "solve_slope", "Re S > -beta k_r", E);
    if (c.worst_sigma > 1.0) fail(ErrorFamily::certificate, "solve_slope", "|sigma| exceeds its bound", E);
    if (c.worst_residual > cfg.res_tol)
      fail(ErrorFamily::certificate, "solve_slope",
           "Riccati residual " + std::to_string(c.worst_residual) + " above res_tol (mesh too coarse?)", E);
    if (c.worst_sigma_residual > cfg.res_tol * 1e2)
      fail(ErrorFamily::certificate, "slope_energy_derivative",
           "sigma residual " + std::to_string(c.worst_sigma_residual) + " too large", E);
  }
  return f;
}

/// Convenience: tail setup plus slope for a single energy.
inline SlopeField solve_slope(const PotentialSpec& p, cplx E, const Config& cfg = {},
                              std::optional<double> norm_delta = std::nullopt) {
  return solve_slope(p, E, find_tail_setup(p, E, cfg, norm_delta), cfg);
}

/// Square-integrability certificate for a unit-normalized decaying solution:
/// int_{x_E}^inf |psi|^2 <= 1 / ((2 beta - c) k_r(x_E)).
struct DecayBound {
  double bound = 0.0;
  double quadrature = 0.0;
};

inline DecayBound decay_l2_bound(const SlopeField& f, const Config& cfg = {}) {
  using GL = detail::GaussLegendre4;
  DecayBound d;
  d.bound = 1.0 / ((2.0 * cfg.beta() - cfg.c) * f.k.front().real());
  const auto& x = f.setup.mesh;
  double phase = 0.0;  // int_{x_E}^{x_j} Re S
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < x.size(); ++j) {
    const double h = x[j + 1] - x[j];
    const detail::HermiteCell<cplx> sc{f.S[j], f.S[j + 1], f.dS[j], f.dS[j + 1], h};
    for (std::size_t m = 0; m < 4; ++m)
      acc += h * GL::weights[m] * std::exp(2.0 * (phase + sc.integral(GL::nodes[m]).real()));
    phase += sc.integral().real();
  }
  acc += std::exp(2.0 * phase) / (2.0 * std::abs(f.S.back().real()));
  d.quadrature = acc;
  if (!(d.quadrature <= d.bound))
    fail(ErrorFamily::certificate, "decay_l2_bound", "L2 quadrature exceeds the decay bound", f.E());
  return d;
}

}  // namespace shoot
