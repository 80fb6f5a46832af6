#include <chrono>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "shoot/riccati.hpp"

using namespace shoot;

namespace {

TailSetup uniform_setup(cplx E, double lo, double hi, std::size_t n, const Config& cfg) {
  TailSetup s;
  s.E = E;
  s.x_E = lo;
  s.c = cfg.c;
  s.eps = cfg.eps;
  s.beta = cfg.beta();
  s.X_max = hi;
  for (std::size_t i = 0; i < n; ++i) s.mesh.push_back(lo + (hi - lo) * double(i) / double(n - 1));
  s.truncation = 0.0;
  s.cert_end = n - 1;
  return s;
}

PotentialSpec constant(double v) {
  PotentialSpec p;
  p.V = [v](double) { return v; };
  p.dV = [](double) { return 0.0; };
  p.label = "constant";
  return p;
}

}  // namespace

TEST(Wavenumber, PrincipalBranch) {
  auto p = make_builtin("exp_wall");
  const cplx k = wavenumber(p, cplx(10, 3), 1.0);
  EXPECT_GT(k.real(), 0.0);
  EXPECT_NEAR(std::abs(k * k - (p.V(1.0) - cplx(10, 3))), 0.0, 1e-9);
}

TEST(Wavenumber, ConeViolationIsTailError) {
  auto p = make_builtin("exp_wall");
  try {
    wavenumber(p, cplx(40, 100), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.family(), ErrorFamily::tail_conditions);
    EXPECT_TRUE(e.has_energy());
  }
}

TEST(WeightedNorm, MismatchedMeshes) {
  std::vector<cplx> a(3), b(4);
  EXPECT_THROW(weighted_norm(a, a, b), Error);
}

TEST(WeightedNorm, ScalesWithK) {
  std::vector<cplx> f{2.0, 2.0}, df{0.0, 0.0}, k{4.0, 8.0};
  EXPECT_DOUBLE_EQ(weighted_norm(f, df, k), 0.5);
  std::vector<cplx> df2{32.0, 0.0};
  EXPECT_DOUBLE_EQ(weighted_norm(f, df2, k), 2.0);
}

TEST(Contraction, ConstantTailIsExactInOneStep) {
  Config cfg;
  auto p = constant(100.0);
  auto s = uniform_setup(0.0, 0.0, 4.0, 400, cfg);
  auto f = solve_slope(p, 0.0, s, cfg, false);
  EXPECT_EQ(f.iters, 1);
  double dev = 0.0;
  for (auto v : f.S) dev = std::max(dev, std::abs(v + 10.0));
  EXPECT_LT(dev, 1e-12);
  // sigma = -1/(2S) for a constant field
  EXPECT_NEAR(std::abs(f.sigma[10] - 1.0 / 20.0), 0.0, 1e-12);
}

TEST(Contraction, FirstStepAndRatioWithinBounds) {
  auto p = make_builtin("exp_wall");
  Config cfg;
  for (cplx E : {cplx(-4), cplx(0), cplx(100, 30)}) {
    auto f = solve_slope(p, E, cfg);
    EXPECT_LE(f.first_step, cfg.first_step_bound() + 1e-12);
    EXPECT_LE(f.max_contraction_ratio(), cfg.alpha() + 1e-9);
    EXPECT_LE(f.norm_dist, cfg.eps);
  }
}

TEST(Contraction, AlphaAndFirstStepConstants) {
  Config cfg;
  EXPECT_NEAR(cfg.alpha(), 0.5032, 1e-4);
  EXPECT_NEAR(cfg.first_step_bound(), 0.0503, 1e-4);
  EXPECT_NEAR(cfg.sigma_bound_factor(), 0.6914, 1e-4);
}

TEST(Contraction, TooManyIterationsIsConvergenceError) {
  auto p = make_builtin("exp_wall");
  Config cfg;
  cfg.max_iters = 1;
  try {
    solve_slope(p, cplx(-4), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.family(), ErrorFamily::convergence);
  }
}

TEST(SlopeField, InvariantsHold) {
  auto p = make_builtin("exp_wall");
  Config cfg;
  auto f = solve_slope(p, cplx(-4), cfg);
  auto c = check_slope_field(f, cfg);
  EXPECT_TRUE(c.branch_ok);
  EXPECT_TRUE(c.in_ball);
  EXPECT_LE(c.worst_decay, 0.0);
  EXPECT_LE(c.worst_sigma, 1.0);
  EXPECT_LT(c.worst_residual, 1e-8);
}

TEST(SlopeField, SigmaMatchesFiniteDifference) {
  auto p = make_builtin("exp_wall");
  Config cfg;
  const cplx E(-4);
  const double h = 1e-4;
  auto s0 = find_tail_setup(p, E, cfg, 4.0);
  auto f = solve_slope(p, E, s0, cfg);
  auto fp = solve_slope(p, E + h, find_tail_setup(p, E + h, cfg, 4.0), cfg);
  auto fm = solve_slope(p, E - h, find_tail_setup(p, E - h, cfg, 4.0), cfg);
  for (double x : {s0.x_E + 0.1, s0.x_E + 0.5, s0.x_E + 1.0}) {
    const cplx fd = (fp.slope_at(x) - fm.slope_at(x)) / (2 * h);
    EXPECT_LT(std::abs(fd - f.sigma_at(x)) / std::abs(f.sigma_at(x)), 1e-5) << x;
  }
}

TEST(SlopeField, SigmaBound) {
  auto p = make_builtin("exp_wall");
  Config cfg;
  auto f = solve_slope(p, cplx(30, 20), cfg);
  for (std::size_t i = 0; i < f.S.size(); i += 50)
    EXPECT_LE(std::abs(f.sigma[i]) * std::abs(f.k[i]), cfg.sigma_bound_factor() * (1 + 1e-12));
}

TEST(SlopeField, IntegralsOfConstant) {
  Config cfg;
  auto p = constant(25.0);
  auto f = solve_slope(p, 0.0, uniform_setup(0.0, 0.0, 3.0, 200, cfg), cfg, false);
  EXPECT_NEAR(std::abs(f.integral_S(0.5, 2.5) + 10.0), 0.0, 1e-12);
  EXPECT_THROW(f.slope_at(5.0), Error);
}

TEST(Decay, L2BoundHolds) {
  auto p = make_builtin("exp_wall");
  Config cfg;
  auto f = solve_slope(p, cplx(-4), cfg);
  auto d = decay_l2_bound(f, cfg);
  EXPECT_GT(d.quadrature, 0.0);
  EXPECT_LE(d.quadrature, d.bound);
}

TEST(Performance, OneEnergyUnderOneSecond) {
  auto p = make_builtin("exp_wall");
  Config cfg;
  const auto t0 = std::chrono::steady_clock::now();
  solve_slope(p, cplx(200), cfg, 200.0);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(s, 1.0);
}
