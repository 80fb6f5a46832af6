// Acceptance checks for the shooting method: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "shoot/characteristic.hpp"
#include "shoot/oracles.hpp"
#include "shoot/spectra.hpp"

using namespace shoot;
using std::numbers::pi;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

cplx ratio(const CharacteristicSample& a, const CharacteristicSample& b) {
  return a.P / b.P * std::exp(a.log_scale - b.log_scale);
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

struct Outcome {
  bool ok;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

std::vector<cplx> random_energies(int n, unsigned seed, double re_lo, double re_hi, double im) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> re(re_lo, re_hi), ir(-im, im);
  std::vector<cplx> out;
  for (int i = 0; i < n; ++i) out.emplace_back(re(rng), ir(rng));
  return out;
}

Outcome contraction() {
  auto p = make_builtin("exp_wall");
  Config cfg;
  double first = 0.0, ratio_max = 0.0, slowest = 0.0;
  std::vector<cplx> Es;
  for (double e : linspace(-50, 200, 11)) Es.push_back(e);
  for (cplx e : random_energies(9, 1, -50, 200, 30)) Es.push_back(e);
  for (cplx E : Es) {
    const auto t0 = Clock::now();
    const auto s = solve_slope(p, E, cfg);
    characteristic_value(p, E, cfg);
    slowest = std::max(slowest, seconds_since(t0));
    first = std::max(first, s.first_step);
    ratio_max = std::max(ratio_max, s.max_contraction_ratio());
  }
  return {first <= 0.0504 && ratio_max <= 0.51 && slowest < 1.0,
          fmt("first step %.5f, ratio %.4f, slowest energy %.3f s", first, ratio_max, slowest)};
}

Outcome constant_tail() {
  PotentialSpec p;
  p.V = [](double) { return 100.0; };
  p.dV = [](double) { return 0.0; };
  p.label = "constant";
  Config cfg;
  TailSetup s;
  s.E = 0.0;
  s.x_E = 0.0;
  s.c = cfg.c;
  s.eps = cfg.eps;
  s.beta = cfg.beta();
  s.X_max = 5.0;
  s.mesh = linspace(0.0, 5.0, 501);
  s.cert_end = s.mesh.size() - 1;
  const auto f = solve_slope(p, 0.0, s, cfg, false);
  double dev = 0.0;
  for (cplx v : f.S) dev = std::max(dev, std::abs(v + 10.0));
  return {f.iters == 1 && dev <= 1e-12, fmt("%d iteration(s), max |S + 10| = %.2e", f.iters, dev)};
}

Outcome bessel_ratios() {
  const auto t0 = Clock::now();
  CharacteristicFunction f(make_builtin("exp_wall"));
  std::vector<cplx> Es;
  for (double e : linspace(-50, 200, 20)) Es.push_back(e);
  Es.push_back(-4.0);
  f.prepare(Es);
  const auto ref = f.evaluate(-4.0);
  const cplx oref = oracles::exp_wall(-4.0).value;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i)
    worst = std::max(worst, rel(ratio(f.evaluate(Es[i]), ref), oracles::exp_wall(Es[i]).value / oref));
  const double t = seconds_since(t0);
  return {worst <= 1e-6 && t < 60.0, fmt("max relative error %.2e over 20 energies in %.1f s", worst, t)};
}

Outcome whittaker_ratios() {
  const double kappa = 2.25;
  CharacteristicFunction f(make_builtin("truncated_morse", kappa));
  const std::vector<cplx> Es{-4.0, -5.0, -6.0, -8.0, -10.0, -15.0, -20.0, -30.0, -40.0, -50.0};
  f.prepare(Es);
  const double z = 4 * pi;
  const auto ref = f.evaluate(-10.0);
  const cplx oref = oracles::whittaker_w(kappa, std::sqrt(10.0), z).value;
  double worst = 0.0;
  int valid = 0;
  for (cplx E : Es) {
    const cplx mu = std::sqrt(-E);
    if ((mu - kappa + 0.5).real() <= 0) continue;
    ++valid;
    worst = std::max(worst, rel(ratio(f.evaluate(E), ref), oracles::whittaker_w(kappa, mu, z).value / oref));
  }
  return {valid == 10 && worst <= 1e-6, fmt("max relative error %.2e over %d energies", worst, valid)};
}

Outcome eigenvalue_count() {
  CharacteristicFunction f(make_builtin("exp_wall"));
  const Rect r{0.0, 200.0, -5.0, 5.0};
  prepare_region(f, {r.re_lo - 0.01, r.re_hi + 0.01, r.im_lo - 0.01, r.im_hi + 0.01});
  const auto recs = real_eigenvalues(f, 0.0, 200.0, 400, 1);
  const auto c = count_zeros_rectangle(f, r, 1);
  const auto exact = oracles::exp_wall_zeros(0.0, 200.0);
  double res = 0.0, err = 0.0;
  for (const auto& e : recs) res = std::max(res, e.residual);
  const bool same = recs.size() == exact.size();
  for (std::size_t i = 0; same && i < recs.size(); ++i)
    err = std::max(err, std::abs(recs[i].E - exact[i]) / std::max(1.0, exact[i]));
  return {same && c.count == static_cast<int>(recs.size()) && res <= 1e-8 && err <= 1e-6,
          fmt("contour %d (raw %.4f), scan+Newton %zu, oracle %zu, residual %.1e, max error %.1e", c.count, c.raw,
              recs.size(), exact.size(), res, err)};
}

Outcome symmetric_two_sided() {
  CharacteristicFunction f(make_builtin("symmetric_exp"));
  std::vector<cplx> Es;
  for (double e : linspace(-20, 150, 8)) Es.push_back(e);
  for (cplx e : random_energies(4, 2, 0, 120, 10)) Es.push_back(e);
  Es.push_back(-4.0);
  f.prepare(Es);
  const auto ref = f.evaluate(-4.0);
  const cplx oref = oracles::symmetric_exp(-4.0).value;
  double split = 0.0, orc = 0.0;
  for (cplx E : Es) {
    const auto a = f.evaluate_at(E, 0.0), b = f.evaluate_at(E, 0.7);
    split = std::max(split, std::abs(ratio(b, a) - 1.0));
    orc = std::max(orc, rel(ratio(a, ref), oracles::symmetric_exp(E).value / oref));
  }
  return {split <= 1e-8 && orc <= 1e-6, fmt("a=0 vs a=0.7 %.2e, K'K ratios %.2e", split, orc)};
}

Outcome derivatives() {
  auto p = make_builtin("exp_wall");
  Config cfg;
  CharacteristicFunction f(p, cfg);
  const auto Es = random_energies(20, 3, -40, 180, 15);
  f.prepare(Es);
  double dp = 0.0;
  for (cplx E : Es) {
    const double h = 1e-4 * std::max(1.0, std::abs(E));
    const auto s = f.evaluate(E);
    const cplx fd = (ratio(f.evaluate(E + h), s) - ratio(f.evaluate(E - h), s)) / (2 * h);
    dp = std::max(dp, std::abs(fd - s.log_derivative()) / std::max(std::abs(s.log_derivative()), 1e-3));
  }
  double sg = 0.0;
  for (cplx E : random_energies(10, 4, -40, 180, 15)) {
    const double h = 1e-4 * std::max(1.0, std::abs(E));
    const auto setup = find_tail_setup(p, E, cfg, 2 * h);
    const auto s0 = solve_slope(p, E, setup, cfg);
    const auto sp = solve_slope(p, E + h, find_tail_setup(p, E + h, cfg, 2 * h), cfg);
    const auto sm = solve_slope(p, E - h, find_tail_setup(p, E - h, cfg, 2 * h), cfg);
    for (double dx : {0.05, 0.3, 1.0}) {
      const double x = setup.x_E + dx;
      const cplx fd = (sp.slope_at(x) - sm.slope_at(x)) / (2 * h);
      sg = std::max(sg, std::abs(fd - s0.sigma_at(x)) / std::abs(s0.sigma_at(x)));
    }
  }
  return {dp <= 1e-5 && sg <= 1e-5, fmt("dP/P vs differences %.2e, sigma vs dS/dE %.2e", dp, sg)};
}

Outcome mean_value() {
  CharacteristicFunction f(make_builtin("exp_wall"));
  const auto Es = random_energies(10, 5, -30, 180, 10);
  f.prepare(Es);
  const double r = 0.05;
  double worst = 0.0;
  for (cplx E : Es) {
    const auto c = f.evaluate(E);
    cplx mean = 0.0;
    for (int k = 0; k < 5; ++k) mean += ratio(f.evaluate(E + std::polar(r, 2 * pi * k / 5)), c);
    worst = std::max(worst, std::abs(mean / 5.0 - 1.0));
  }
  return {worst <= 1e-6, fmt("max relative deviation %.2e at 10 energies, radius %.2f", worst, r)};
}

Outcome asymptotics() {
  const double kappa = 2.25;
  auto p = make_builtin("truncated_morse", kappa);
  auto residual = [&](double E) {
    const auto s = characteristic_value(p, E);
    return std::abs(s.log_derivative() - oracles::whittaker_logderiv_asymptotic(kappa, E).value);
  };
  const double a = residual(-1e4), b = residual(-1e6);
  const double shrink = a / b;
  return {shrink >= 1000.0 / 3 && shrink <= 3000.0,
          fmt("residual %.3e at -1e4, %.3e at -1e6, shrink %.0f", a, b, shrink)};
}

Outcome widths() {
  std::vector<PotentialSpec> ps{make_builtin("exp_wall"), make_builtin("symmetric_exp"), make_builtin("cosh_pot"),
                                make_builtin("truncated_morse", 2.25)};
  double worst = 0.0;
  for (const auto& p : ps)
    for (double lv : linspace(3, 9, 25)) {
      const double v = std::pow(10.0, lv);
      worst = std::max(worst, std::abs(width(p, v) - std::log(std::sqrt(v) / (2 * pi))) * std::sqrt(v) / std::log(v));
    }
  return {std::isfinite(worst) && worst <= 1.0, fmt("sup of scaled residual %.3f over 4 potentials", worst)};
}

Outcome growth() {
  const auto g = growth_order_estimate(make_builtin("exp_wall"), {1e2, 1e3, 1e4, 1e5, 1e6}, {}, 1);
  return {g.exponent >= 0.4 && g.exponent <= 1.1, fmt("exponent %.3f +- %.3f", g.exponent, g.ci_half_width)};
}

Outcome naive_convergence() {
  const auto rep =
      convergence_report(make_builtin("exp_wall"), {1, 2}, {0.8, 0.9, 1.0, 1.1, 1.2, 1.3}, 200.0, {}, 2.0, 100, 1);
  double last = 0.0;
  for (const auto& r : rep.rows) last = r.b == 1.3 ? std::max(last, r.error) : last;
  return {rep.monotone && rep.max_shift < 1e-9,
          fmt("monotone %s, largest error at b=1.3 %.1e, exact shift %.1e", rep.monotone ? "yes" : "no", last,
              rep.max_shift)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"contraction", contraction},         {"constant tail", constant_tail},
      {"Bessel ratios", bessel_ratios},     {"Whittaker ratios", whittaker_ratios},
      {"eigenvalue count", eigenvalue_count}, {"two-sided Wronskian", symmetric_two_sided},
      {"derivatives", derivatives},         {"mean value", mean_value},
      {"large -E asymptotics", asymptotics}, {"width asymptotics", widths},
      {"growth order", growth},             {"finite-b convergence", naive_convergence}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.ok;
    std::printf("%s criterion %zu (%s): %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
