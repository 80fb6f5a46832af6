#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

namespace shoot::detail {

/// 4-point Gauss-Legendre rule on [0, 1].
struct GaussLegendre4 {
  static constexpr std::array<double, 4> nodes = {
      0.0694318442029737123880267555535953,
      0.3300094782075718675986671204483777,
      0.6699905217924281324013328795516223,
      0.9305681557970262876119732444464048,
  };
  static constexpr std::array<double, 4> weights = {
      0.1739274225687269286865319746109997,
      0.3260725774312730713134680253890003,
      0.3260725774312730713134680253890003,
      0.1739274225687269286865319746109997,
  };
};

/// Cubic Hermite interpolant on one cell [x0, x0 + h] from end values and
/// end derivatives. `t` is the fractional position in [0, 1].
template <class T>
struct HermiteCell {
  T f0, f1, d0, d1;
  double h;

  T value(double t) const {
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * f1 +
           (t3 - t2) * h * d1;
  }

  T derivative(double t) const {
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * f0 + (-6 * t2 + 6 * t) * f1) / h + (3 * t2 - 4 * t + 1) * d0 +
           (3 * t2 - 2 * t) * d1;
  }

  /// Integral of the interpolant from the left end to fractional position t.
  T integral(double t) const {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    return h * ((t - t3 + t4 / 2) * f0 + (t3 - t4 / 2) * f1) +
           h * h * ((t2 / 2 - 2 * t3 / 3 + t4 / 4) * d0 + (-t3 / 3 + t4 / 4) * d1);
  }

  /// Integral over the whole cell.
  T integral() const { return h * (f0 + f1) / 2.0 + h * h * (d0 - d1) / 12.0; }
};

/// Finite-difference weights for the first derivative at `x0` over the stencil
/// `xs` (Fornberg's recursion, restricted to orders 0 and 1).
inline std::vector<double> fd_weights_first(double x0, std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::array<double, 2>> c(n, {0.0, 0.0});
  double c1 = 1.0;
  double c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min<std::size_t>(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k)
          c[i][k] = c1 * (double(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - double(k) * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = c[i][1];
  return w;
}

/// Fourth-order first derivative of samples `f` on the (possibly nonuniform)
/// grid `x`: centred five-point stencils inside, one-sided at the ends.
template <class T>
std::vector<T> derivative_fd4(std::span<const double> x, std::span<const T> f) {
  const std::size_t n = x.size();
  assert(f.size() == n && n >= 5);
  std::vector<T> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = std::min(i < 2 ? 0 : i - 2, n - 5);
    const auto w = fd_weights_first(x[i], x.subspan(lo, 5));
    T acc{};
    for (std::size_t j = 0; j < 5; ++j) acc += w[j] * f[lo + j];
    d[i] = acc;
  }
  return d;
}

/// Index of the cell [x[j], x[j+1]] containing `v` (clamped to the grid).
inline std::size_t locate_cell(std::span<const double> x, double v) {
  auto it = std::upper_bound(x.begin(), x.end(), v);
  std::size_t j = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
  return std::min(j, x.size() - 2);
}

}  // namespace shoot::detail
