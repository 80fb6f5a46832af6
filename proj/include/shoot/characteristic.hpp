#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/numeric/odeint.hpp>

#include "shoot/config.hpp"
#include "shoot/potentials.hpp"
#include "shoot/riccati.hpp"

namespace shoot {

/// Cauchy data of a solution together with its energy derivatives. The true
/// values are the stored ones times exp(log_scale).
struct WaveState {
  cplx psi, dpsi;          ///< psi, psi'
  cplx psi_E, dpsi_E;      ///< d psi / dE, d psi' / dE
  double log_scale = 0.0;
};

struct NormalizationReport {
  double X = 0.0;               ///< where the mesh integrals stop and the closure starts
  double closure_estimate = 0.0;  ///< max(1, |E - E_ref|) / k_r(X)^3, neglected closure order
  double raw_tail_bound = 0.0;    ///< |E - E_ref| * sigma bound * int_X^inf 1/|k|
};

namespace detail {

/// int_X^inf g(x) dx for a complex integrand by double-exponential quadrature.
template <class G>
cplx tail_integral(G&& g, double X) {
  thread_local boost::math::quadrature::exp_sinh<double> integrator;
  auto part = [&](bool imag) {
    auto h = [&](double t) -> double {
      const cplx v = g(X + t);
      const double r = imag ? v.imag() : v.real();
      return std::isfinite(r) ? r : 0.0;
    };
    double err = 0.0, l1 = 0.0;
    std::size_t levels = 0;
    return integrator.integrate(h, 1e-14, &err, &l1, &levels);
  };
  return {part(false), part(true)};
}

}  // namespace detail

/// Decaying solution at x0, normalized so that psi_E / psi_ref -> 1 as
/// x -> inf with psi_ref(x0) = 1:
///   log psi_E(x0) = int_{x0}^inf (S_ref - S_E).
/// The integral is taken over both meshes up to X = min(X_max) and closed with
/// the first two WKB terms,
///   int_X^inf (k_E - k_ref) dx - (1/2) log(k_E(X) / k_ref(X)).
/// The E-derivatives come from d psi/dE = -psi int_{x0}^inf sigma and
/// d psi'/dE = sigma psi + S d psi/dE, closed in the same way.
inline WaveState normalize_at(const PotentialSpec& p, const SlopeField& SE, const SlopeField& Sref, double x0,
                              NormalizationReport* report = nullptr, const Config& cfg = {}) {
  const cplx E = SE.E(), Eref = Sref.E();
  if (x0 < SE.setup.x_E - 1e-12 || x0 < Sref.setup.x_E - 1e-12)
    fail(ErrorFamily::config, "normalize_at", "x0 lies below a tail start", E);
  const double X = std::min(SE.setup.X_max, Sref.setup.X_max);
  if (!(x0 < X)) fail(ErrorFamily::config, "normalize_at", "x0 beyond the tail meshes", E);

  auto kE = [&](double x) { return std::sqrt(cplx(p.V(x)) - E); };
  auto kR = [&](double x) { return std::sqrt(cplx(p.V(x)) - Eref); };

  cplx logpsi = Sref.integral_S(x0, X) - SE.integral_S(x0, X);
  cplx int_sigma = SE.integral_sigma(x0, X);
  if (E != Eref) {
    logpsi += detail::tail_integral([&](double x) { return (Eref - E) / (kE(x) + kR(x)); }, X);
    logpsi -= 0.5 * std::log(kE(X) / kR(X));
  }
  int_sigma += detail::tail_integral([&](double x) { return 1.0 / (2.0 * kE(x)); }, X);
  int_sigma -= 1.0 / (4.0 * kE(X) * kE(X));

  const double kr = std::min(kE(X).real(), kR(X).real());
  const double estimate = std::max(1.0, std::abs(E - Eref)) / (kr * kr * kr);
  if (!std::isfinite(logpsi.real()) || !std::isfinite(int_sigma.real()))
    fail(ErrorFamily::certificate, "normalize_at", "normalization integral is not finite", E);
  if (estimate > 2.0 * cfg.norm_tol)
    fail(ErrorFamily::certificate, "normalize_at",
         "tail meshes too short for the normalization closure (estimate " + std::to_string(estimate) + ")", E);
  if (report) {
    report->X = X;
    report->closure_estimate = estimate;
    report->raw_tail_bound = std::abs(E - Eref) * cfg.sigma_bound_factor() *
                             detail::tail_integral([&](double x) { return cplx(1.0 / std::abs(kE(x))); }, X).real();
  }

  WaveState w;
  w.log_scale = logpsi.real();
  w.psi = std::polar(1.0, logpsi.imag());
  const cplx S0 = SE.slope_at(x0), sig0 = SE.sigma_at(x0);
  w.dpsi = S0 * w.psi;
  w.psi_E = -w.psi * int_sigma;
  w.dpsi_E = sig0 * w.psi + S0 * w.psi_E;
  return w;
}

struct PropagationReport {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  int rescalings = 0;
};

/// Integrates psi'' = (V - E) psi together with its energy derivative
/// (d psi/dE)'' = -psi + (V - E) d psi/dE from x0 down to a with the embedded
/// Runge-Kutta-Fehlberg 7(8) pair. Integration restarts at every breakpoint of
/// V. Whenever the state exceeds 1e250 it is rescaled by a power of two and
/// the scale is carried in log_scale.
inline WaveState propagate_left(const PotentialSpec& p, cplx E, double x0, WaveState start, double a,
                                const Config& cfg = {}, PropagationReport* report = nullptr) {
  namespace ode = boost::numeric::odeint;
  using State = std::array<cplx, 4>;
  if (!(a <= x0)) fail(ErrorFamily::config, "propagate_left", "target lies to the right of x0", E);

  auto rhs = [&](const State& y, State& dy, double x) {
    const cplx q = cplx(p.V(x)) - E;
    dy[0] = y[1];
    dy[1] = q * y[0];
    dy[2] = y[3];
    dy[3] = q * y[2] - y[0];
  };
  auto stepper = ode::make_controlled(cfg.ode_abs, cfg.ode_rel, ode::runge_kutta_fehlberg78<State>());

  State y{start.psi, start.dpsi, start.psi_E, start.dpsi_E};
  double log_scale = start.log_scale;
  PropagationReport rep;

  std::vector<double> stops;
  for (double b : p.breakpoints)
    if (b > a && b < x0) stops.push_back(b);
  std::sort(stops.begin(), stops.end(), std::greater<>());
  stops.push_back(a);

  double x = x0;
  const double q0 = std::sqrt(std::abs(cplx(p.V(x0)) - E));
  double dt = -std::min(0.01, 0.1 / std::max(q0, 1e-3));
  for (double target : stops) {
    while (x > target) {
      if (x + dt < target) dt = target - x;
      const double before = x;
      int tries = 0;
      while (stepper.try_step(rhs, y, x, dt) == ode::fail) {
        ++rep.rejected;
        if (++tries > 500 || std::abs(dt) < 1e-14 * std::max(1.0, std::abs(x)))
          fail(ErrorFamily::convergence, "propagate_left",
               "step size underflow near x = " + std::to_string(x) + " (singular V?)", E);
      }
      if (x == before) fail(ErrorFamily::convergence, "propagate_left", "no progress", E);
      ++rep.steps;
      double mx = 0.0;
      for (const auto& v : y) mx = std::max(mx, std::abs(v));
      if (!std::isfinite(mx)) fail(ErrorFamily::convergence, "propagate_left", "state overflowed", E);
      if (mx > 1e250) {
        int e = 0;
        std::frexp(mx, &e);
        for (auto& v : y) v = std::ldexp(v.real(), -e) + cplx(0.0, std::ldexp(v.imag(), -e));
        log_scale += e * std::numbers::ln2;
        ++rep.rescalings;
      }
    }
    x = target;
  }
  if (report) *report = rep;
  return {y[0], y[1], y[2], y[3], log_scale};
}

// ---------------------------------------------------------------------------

/// One evaluation of the characteristic function. The value is P e^{log_scale}
/// and the derivative dP e^{log_scale}; the common scale cancels in ratios
/// and in dP/P.
struct CharacteristicSample {
  cplx E;
  cplx P;
  cplx dP;
  double log_scale = 0.0;
  double x0 = 0.0;
  struct Diagnostics {
    int iters = 0;                  ///< contraction iterations for E (max over sides)
    double riccati_residual = 0.0;
    double truncation = 0.0;        ///< exp(-2 int k_r) certificate of the E mesh
    double norm_closure = 0.0;      ///< closure estimate of the normalization
    double raw_tail_bound = 0.0;
    std::size_t ode_steps = 0;
  } diag;

  double log_abs() const { return std::log(std::abs(P)) + log_scale; }
  cplx log_derivative() const { return dP / P; }
};

/// Characteristic function P_L of a confining potential. For a hard wall at a,
/// P_L(E) = psi_E(a); on the whole line P_L(E) is the Wronskian
/// (psi+' psi- - psi-' psi+)(a) of the normalized decaying solutions. Decaying
/// solutions are normalized against the reference energy E_ref = 0 after V is
/// shifted so that min V >= 1.
///
/// prepare() fixes the gauge for a batch of energies: the shared normalization
/// point x0 and the reference slope field. After that evaluate() is const and
/// may run concurrently.
class CharacteristicFunction {
 public:
  explicit CharacteristicFunction(PotentialSpec p, Config cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    if (!p.V || !p.dV) fail(ErrorFamily::config, "characteristic", "potential has no V or dV");
    gamma_ = compute_shift(p);
    p_ = gamma_ != 0.0 ? shifted(std::move(p), gamma_) : std::move(p);
    right_.p = p_;
    if (!p_.half_line()) {
      left_.emplace();
      left_->p = reflected(p_);
    }
  }

  const PotentialSpec& potential() const { return p_; }
  const Config& config() const { return cfg_; }
  /// Constant added to V; reported energies are always unshifted.
  double shift() const { return gamma_; }
  bool two_sided() const { return left_.has_value(); }
  bool prepared() const { return right_.ref.has_value(); }
  double x0() const { return right_.x0; }
  double x0_left() const { return left_ ? left_->x0 : 0.0; }

  /// Fixes x0 (max of the tail starts, including E_ref and small
  /// neighbourhoods of each E used by derivative checks) and builds the
  /// reference field. `x0_floor` raises x0 further.
  void prepare(std::span<const cplx> energies, double x0_floor = -kInf) {
    std::vector<cplx> Es;
    for (cplx E : energies) {
      const cplx e = E + gamma_;
      const double r = 1e-3 * std::max(1.0, std::abs(e));
      for (cplx d : {cplx(0), cplx(r), cplx(-r), cplx(0, r), cplx(0, -r)}) Es.push_back(e + d);
    }
    Es.push_back(0.0);
    prepare_side(right_, Es, x0_floor);
    if (left_) prepare_side(*left_, Es, x0_floor);
  }

  void prepare(cplx E) { prepare(std::span<const cplx>(&E, 1)); }

  /// Half line: psi_E at the wall. Whole line: the Wronskian at a = 0 (or
  /// the matching point given to evaluate_at).
  CharacteristicSample evaluate(cplx E) const {
    return two_sided() ? evaluate_at(E, 0.0) : evaluate_half_line(E);
  }

  CharacteristicSample evaluate_at(cplx E, double a) const {
    if (!two_sided()) {
      if (a != p_.wall()) fail(ErrorFamily::config, "characteristic", "half-line problems are evaluated at the wall", E);
      return evaluate_half_line(E);
    }
    require_prepared(E);
    const cplx e = E + gamma_;
    CharacteristicSample s;
    s.E = E;
    s.x0 = right_.x0;
    const WaveState r = side_state(right_, e, a, s.diag);
    const WaveState l = side_state(*left_, e, -a, s.diag);
    // left solution in the original coordinate: psi-(a) = u(-a), psi-'(a) = -u'(-a)
    const cplx lm = l.psi, dlm = -l.dpsi, lmE = l.psi_E, dlmE = -l.dpsi_E;
    s.P = r.dpsi * lm - dlm * r.psi;
    s.dP = r.dpsi_E * lm + r.dpsi * lmE - dlmE * r.psi - dlm * r.psi_E;
    s.log_scale = r.log_scale + l.log_scale;
    return s;
  }

  /// Solution decaying at +inf (or at -inf with `left`), propagated to x and
  /// reported in the original coordinate.
  WaveState decaying_solution(cplx E, double x, bool left = false) const {
    require_prepared(E);
    CharacteristicSample::Diagnostics d;
    if (!left) return side_state(right_, E + gamma_, x, d);
    if (!left_) fail(ErrorFamily::config, "characteristic", "no left tail on a half line", E);
    WaveState w = side_state(*left_, E + gamma_, -x, d);
    w.dpsi = -w.dpsi;
    w.dpsi_E = -w.dpsi_E;
    return w;
  }

 private:
  struct Side {
    PotentialSpec p;
    std::optional<SlopeField> ref;
    double x0 = 0.0;
    double delta = 0.0;  ///< largest |E - E_ref| covered
  };

  PotentialSpec p_;
  Config cfg_;
  double gamma_ = 0.0;
  Side right_;
  std::optional<Side> left_;

  static double compute_shift(const PotentialSpec& p) {
    const double lo = p.half_line() ? p.wall() : p.center - 8.0;
    const double hi = p.search_floor() + 8.0;
    double vmin = kInf;
    for (int i = 0; i <= 4096; ++i) {
      const double x = lo + (hi - lo) * i / 4096.0;
      if (x < p.x_lo || x > p.x_hi) continue;
      const double v = p.V(x);
      if (std::isfinite(v)) vmin = std::min(vmin, v);
    }
    return vmin < 1.0 ? 1.0 - vmin : 0.0;
  }

  void prepare_side(Side& s, const std::vector<cplx>& Es, double x0_floor) {
    double x0 = x0_floor;
    double delta = 0.0;
    for (cplx e : Es) {
      x0 = std::max(x0, find_tail_start(s.p, e, cfg_));
      delta = std::max(delta, std::abs(e));
    }
    s.x0 = x0;
    s.delta = delta;
    s.ref = solve_slope(s.p, cplx(0.0), find_tail_setup(s.p, cplx(0.0), cfg_, delta), cfg_);
    if (!(s.ref->setup.X_max > x0))
      fail(ErrorFamily::tail_conditions, "characteristic", "reference mesh does not reach past x0");
  }

  void require_prepared(cplx E) const {
    if (!prepared()) fail(ErrorFamily::config, "characteristic", "prepare() must be called before evaluation", E);
    const double need = std::abs(E + gamma_);
    if (need > right_.delta * (1.0 + 1e-12) + 1e-12)
      fail(ErrorFamily::config, "characteristic", "energy outside the prepared batch", E);
  }

  WaveState side_state(const Side& s, cplx e, double target, CharacteristicSample::Diagnostics& d) const {
    const TailSetup setup = find_tail_setup(s.p, e, cfg_, std::abs(e));
    if (setup.x_E > s.x0 + 1e-12)
      fail(ErrorFamily::config, "characteristic", "tail start lies beyond the prepared x0", e - gamma_);
    const SlopeField f = solve_slope(s.p, e, setup, cfg_);
    NormalizationReport nr;
    WaveState start = normalize_at(s.p, f, *s.ref, s.x0, &nr, cfg_);
    if (target > s.x0) fail(ErrorFamily::config, "characteristic", "matching point lies in the tail", e - gamma_);
    PropagationReport pr;
    WaveState w = propagate_left(s.p, e, s.x0, start, target, cfg_, &pr);
    d.iters = std::max(d.iters, f.iters);
    d.riccati_residual = std::max(d.riccati_residual, check_slope_field(f, cfg_).worst_residual);
    d.truncation = std::max(d.truncation, setup.truncation);
    d.norm_closure = std::max(d.norm_closure, nr.closure_estimate);
    d.raw_tail_bound = std::max(d.raw_tail_bound, nr.raw_tail_bound);
    d.ode_steps += pr.steps;
    return w;
  }

  CharacteristicSample evaluate_half_line(cplx E) const {
    require_prepared(E);
    CharacteristicSample s;
    s.E = E;
    s.x0 = right_.x0;
    const WaveState w = side_state(right_, E + gamma_, p_.wall(), s.diag);
    s.P = w.psi;
    s.dP = w.psi_E;
    s.log_scale = w.log_scale;
    return s;
  }
};

/// One-off evaluation of P_L at E (half line at the wall, whole line at a = 0).
inline CharacteristicSample characteristic_value(const PotentialSpec& p, cplx E, const Config& cfg = {}) {
  CharacteristicFunction f(p, cfg);
  f.prepare(E);
  return f.evaluate(E);
}

/// Two-sided Wronskian form at matching point a.
inline CharacteristicSample characteristic_two_sided(const PotentialSpec& p, cplx E, double a,
                                                     const Config& cfg = {}) {
  if (p.half_line()) fail(ErrorFamily::config, "characteristic_two_sided", "potential is not on the whole line", E);
  CharacteristicFunction f(p, cfg);
  f.prepare(E);
  return f.evaluate_at(E, a);
}

}  // namespace shoot
