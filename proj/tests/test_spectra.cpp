#include <cmath>
#include <memory>
#include <numbers>

#include <gtest/gtest.h>

#include "shoot/oracles.hpp"
#include "shoot/spectra.hpp"

using namespace shoot;

class ExpWallSpectrum : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    f = std::make_unique<CharacteristicFunction>(make_builtin("exp_wall"));
    prepare_region(*f, {-20.0, 201.0, -6.0, 6.0});
    recs = real_eigenvalues(*f, 0.0, 200.0, 200, 1, &scan);
    exact = oracles::exp_wall_zeros(0, 200);
  }
  static void TearDownTestSuite() { f.reset(); }

  static inline std::unique_ptr<CharacteristicFunction> f;
  static inline std::vector<EigenvalueRecord> recs;
  static inline RealScan scan;
  static inline std::vector<double> exact;
};

TEST_F(ExpWallSpectrum, RealZerosMatchOracle) {
  ASSERT_EQ(recs.size(), exact.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_NEAR(recs[i].E.real(), exact[i], 1e-6 * exact[i]);
    EXPECT_LE(recs[i].residual, 1e-8);
    EXPECT_EQ(recs[i].multiplicity, 1);
    ASSERT_TRUE(recs[i].bracket.has_value());
    EXPECT_LE(recs[i].bracket->lo, exact[i]);
    EXPECT_GE(recs[i].bracket->hi, exact[i]);
  }
}

TEST_F(ExpWallSpectrum, ScanIsRealInGauge) {
  EXPECT_LE(scan.max_imag_ratio, 1e-6);
  EXPECT_EQ(scan.brackets.size(), exact.size());
  EXPECT_NEAR(std::abs(scan.gauge), 1.0, 1e-12);
}

TEST_F(ExpWallSpectrum, ContourCountMatchesScan) {
  const auto c = count_zeros_rectangle(*f, {0.0, 200.0, -5.0, 5.0}, 1);
  EXPECT_EQ(c.count, static_cast<int>(recs.size()));
  EXPECT_NEAR(c.raw, c.count, 0.05);
}

TEST_F(ExpWallSpectrum, EmptyRectangleBelowSpectrum) {
  const auto c = count_zeros_rectangle(*f, {-15.0, 50.0, -5.0, 5.0}, 1);
  EXPECT_EQ(c.count, 0);
}

TEST_F(ExpWallSpectrum, CountIsAdditive) {
  const auto a = count_zeros_rectangle(*f, {60.0, 120.0, -4.0, 4.0}, 1);
  const auto b = count_zeros_rectangle(*f, {120.0, 190.0, -4.0, 4.0}, 1);
  const auto ab = count_zeros_rectangle(*f, {60.0, 190.0, -4.0, 4.0}, 1);
  EXPECT_EQ(a.count, 1);
  EXPECT_EQ(b.count, 1);
  EXPECT_EQ(a.count + b.count, ab.count);
}

TEST_F(ExpWallSpectrum, NewtonFromNearbySeed) {
  const auto r = refine_eigenvalue(*f, cplx(exact[0] * 1.01, 0.5));
  EXPECT_NEAR(r.E.real(), exact[0], 1e-6 * exact[0]);
  EXPECT_NEAR(r.E.imag(), 0.0, 1e-6);
  EXPECT_LE(r.newton_steps, 6);
}

TEST_F(ExpWallSpectrum, DegenerateRectangleRejected) {
  EXPECT_THROW(count_zeros_rectangle(*f, {10.0, 10.0, -1.0, 1.0}, 1), Error);
}

TEST(Spectra, MorseZerosMatchWhittaker) {
  const double kappa = 2.25;
  CharacteristicFunction f(make_builtin("truncated_morse", kappa));
  prepare_region(f, {0.0, 120.0, -1.0, 1.0});
  const auto recs = real_eigenvalues(f, 0.0, 120.0, 120, 1);
  const auto want = oracles::truncated_morse_zeros(kappa, 0.0, 120.0);
  ASSERT_EQ(recs.size(), want.size());
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_NEAR(recs[i].E.real(), want[i], 1e-6 * want[i]);
}

TEST(Spectra, ShiftMovesEigenvalues) {
  const double c = 12.5;
  CharacteristicFunction f(shifted(make_builtin("exp_wall"), c));
  prepare_region(f, {80.0 + c, 110.0 + c, -1.0, 1.0});
  const auto recs = real_eigenvalues(f, 80.0 + c, 110.0 + c, 30, 1);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_NEAR(recs[0].E.real(), 95.42886894447956 + c, 1e-6);
}

TEST(Spectra, ScanNeedsInterval) {
  CharacteristicFunction f(make_builtin("exp_wall"));
  f.prepare(1.0);
  EXPECT_THROW(scan_real_axis(f, 5.0, 1.0, 10, 1), Error);
}

TEST(Growth, ExpWallOrderInRange) {
  const auto g = growth_order_estimate(make_builtin("exp_wall"), {1e2, 1e3, 1e4, 1e5, 1e6}, {}, 1);
  EXPECT_GE(g.exponent, 0.4);
  EXPECT_LE(g.exponent, 1.1);
  EXPECT_GT(g.ci_half_width, 0.0);
  ASSERT_EQ(g.log_abs.size(), 5u);
  for (std::size_t i = 1; i < g.log_abs.size(); ++i) EXPECT_GT(g.log_abs[i], g.log_abs[i - 1]);
}

TEST(Growth, NeedsThreeDecades) {
  EXPECT_THROW(growth_order_estimate(make_builtin("exp_wall"), {1e2, 2e2, 5e2, 1e3}, {}, 1), Error);
}

TEST(Naive, ErrorShrinksWithB) {
  auto p = make_builtin("exp_wall");
  const double E0 = 95.42886894447956;
  double prev = 1e9;
  for (double b : {0.9, 1.1, 1.3}) {
    const double err = std::abs(naive_eigenvalue(p, E0, b) - E0);
    EXPECT_LT(err, prev) << b;
    prev = err;
  }
}

TEST(Naive, RequiresWall) {
  EXPECT_THROW(naive_characteristic(make_builtin("symmetric_exp"), 1.0, 2.0), Error);
}
