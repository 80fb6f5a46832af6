#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "shoot/config.hpp"
#include "shoot/error.hpp"

namespace shoot::oracles {

enum class Method { integral_quadrature, asymptotic_series, recurrence };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::integral_quadrature: return "integral_quadrature";
    case Method::asymptotic_series: return "asymptotic_series";
    case Method::recurrence: return "recurrence";
  }
  return "?";
}

struct OracleValue {
  cplx value;
  double abs_err_estimate = 0.0;
  Method method = Method::integral_quadrature;
  bool warning = false;  ///< set outside the asymptotic regime
};

namespace detail {

/// Trapezoid sums of g over s in R on the grid h Z, halving h until two
/// successive sums agree. The error estimate also covers cancellation
/// against the integrand peak. The range is cut where log|g| falls 45 below its
/// peak; `logmag` is a cheap upper model of log|g|.
template <class G, class L>
OracleValue trapezoid_line(G&& g, L&& logmag, double tol = 1e-15) {
  double peak = -std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = 0.0;
  for (double s = 0.0; s < 200.0; s += 0.125) peak = std::max({peak, logmag(s), logmag(-s)});
  for (hi = 0.0; hi < 200.0 && !(logmag(hi) < peak - 45.0 && hi > 1.0); hi += 0.125) {}
  for (lo = 0.0; lo > -200.0 && !(logmag(lo) < peak - 45.0 && lo < -1.0); lo -= 0.125) {}

  double h = 0.5;
  auto sum = [&](double step, double offset) {
    cplx acc = 0.0;
    const long n0 = static_cast<long>(std::floor((lo - offset) / step));
    const long n1 = static_cast<long>(std::ceil((hi - offset) / step));
    for (long n = n0; n <= n1; ++n) acc += g(offset + n * step);
    return acc;
  };
  const double roundoff = 1e-15 * std::exp(peak);
  cplx I = sum(h, 0.0) * h;
  for (int level = 0; level < 16; ++level) {
    const cplx mid = sum(h, h / 2) * h;
    const cplx next = (I + mid) / 2.0;
    const double diff = std::abs(next - I);
    I = next;
    h /= 2;
    if (level >= 2 && diff <= tol * std::max(std::abs(I), std::exp(peak)))
      return {I, std::max({diff, roundoff, 1e-16 * std::abs(I)})};
  }
  return {I, std::abs(I)};
}

}  // namespace detail

/// log Gamma(z) for complex z (Lanczos g = 7, n = 9, with reflection).
inline cplx lgamma(cplx z) {
  static constexpr std::array<double, 9> c = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double pi = std::numbers::pi;
  if (z.real() < 0.5) return std::log(pi / std::sin(pi * z)) - lgamma(1.0 - z);
  z -= 1.0;
  cplx x = c[0];
  for (int i = 1; i < 9; ++i) x += c[i] / (z + double(i));
  const cplx t = z + 7.5;
  return 0.5 * std::log(2 * pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

inline cplx tgamma(cplx z) { return std::exp(lgamma(z)); }

/// K_nu(z) = (1/2) int_R exp(-z cosh t - nu t) dt, evaluated on the shifted
/// line t = s - i theta (sign chosen so the integrand is not much larger than
/// the result when nu has a large imaginary part).
inline OracleValue bessel_k(cplx nu, double z) {
  if (!(z > 0)) fail(ErrorFamily::config, "bessel_k", "z must be positive");
  if (std::abs(nu.real()) > 30.0) fail(ErrorFamily::config, "bessel_k", "|Re nu| > 30 is outside the supported range");
  if (nu.imag() < 0) nu = -nu;
  const double tau = nu.imag(), a = nu.real();
  const double theta = std::atan(tau / z);
  const cplx shift(0.0, -theta);
  auto g = [&](double s) {
    const cplx t = s + shift;
    return std::exp(-z * std::cosh(t) - nu * t);
  };
  auto logmag = [&](double s) { return -z * std::cosh(s) * std::cos(theta) - a * s - tau * theta; };
  OracleValue v = detail::trapezoid_line(g, logmag);
  v.value *= 0.5;
  v.abs_err_estimate *= 0.5;
  return v;
}

/// K'_nu(z) = -(K_{nu-1}(z) + K_{nu+1}(z)) / 2.
inline OracleValue bessel_k_prime(cplx nu, double z) {
  const OracleValue m = bessel_k(nu - 1.0, z), p = bessel_k(nu + 1.0, z);
  return {-0.5 * (m.value + p.value), 0.5 * (m.abs_err_estimate + p.abs_err_estimate)};
}

/// W_{kappa,mu}(z) = e^{-z/2} z^kappa / Gamma(b) int_0^inf e^{-t} t^{b-1} (1 + t/z)^c dt,
/// b = mu - kappa + 1/2, c = mu + kappa - 1/2. The integral runs along the ray
/// t = e^{i phi} exp(s - e^{-s}).
inline OracleValue whittaker_w(double kappa, cplx mu, double z) {
  if (!(z > 0)) fail(ErrorFamily::config, "whittaker_w", "z must be positive");
  if (mu.real() < 0) mu = -mu;
  const bool flip = mu.imag() < 0;
  if (flip) mu = std::conj(mu);
  const cplx b = mu - kappa + 0.5, c = mu + kappa - 0.5;
  if (!(b.real() > 0)) fail(ErrorFamily::config, "whittaker_w", "Re(mu - kappa + 1/2) <= 0: integral representation invalid");
  const double tau = b.imag();
  const double phi = tau > 0 ? std::numbers::pi / 2 - std::min(std::numbers::pi / 2, 2.0 / tau) : 0.0;
  const cplx rot = std::polar(1.0, phi);
  auto g = [&](double s) -> cplx {
    const double e = std::exp(-s);
    const double r = std::exp(s - e);
    if (r == 0.0 || !std::isfinite(r)) return 0.0;
    const cplx t = rot * r;
    const double jac = 1.0 + e;
    return std::exp(-t + b * (std::log(r) + cplx(0.0, phi)) + c * std::log(1.0 + t / z)) * jac;
  };
  auto logmag = [&](double s) {
    const double e = std::exp(-s);
    const double lr = s - e;
    const double r = std::exp(lr);
    const double arg = std::atan2(r * std::sin(phi), z + r * std::cos(phi));
    return -r * std::cos(phi) + b.real() * lr - tau * (phi + arg) + std::max(0.0, c.real()) * std::log1p(r / z) +
           std::log1p(e);
  };
  OracleValue v = detail::trapezoid_line(g, logmag);
  const cplx pref = std::exp(-z / 2 + kappa * std::log(z) - lgamma(b));
  v.value *= pref;
  v.abs_err_estimate *= std::abs(pref);
  if (flip) v.value = std::conj(v.value);
  return v;
}

/// W_{kappa,mu}(z) for any real kappa: kappa is lowered by whole steps until
/// the integral representation holds, then raised again with
/// W_{k+1} = (z - 2k) W_k + (mu^2 - (k - 1/2)^2) W_{k-1}.
inline OracleValue whittaker_w_continued(double kappa, cplx mu, double z) {
  if (mu.real() < 0) mu = -mu;
  int down = 0;
  while (!((mu - (kappa - down) + 0.5).real() > 0.1)) ++down;
  if (down == 0) return whittaker_w(kappa, mu, z);
  double k = kappa - down;
  OracleValue lo = whittaker_w(k - 1.0, mu, z), cur = whittaker_w(k, mu, z);
  cplx wm = lo.value, w = cur.value;
  double err_m = lo.abs_err_estimate, err = cur.abs_err_estimate;
  for (int i = 0; i < down; ++i) {
    const cplx A = z - 2.0 * k, B = mu * mu - (k - 0.5) * (k - 0.5);
    const cplx wn = A * w + B * wm;
    const double en = std::abs(A) * err + std::abs(B) * err_m;
    wm = w, err_m = err;
    w = wn, err = en;
    k += 1.0;
  }
  return {w, err, Method::recurrence};
}

/// The two printed terms of d/dE log P at large negative E for the Whittaker
/// characteristic function: -(1/(2 sqrt(-E))) log(sqrt(-E)/pi) + (kappa - 1/2)/(2E).
inline OracleValue whittaker_logderiv_asymptotic(double kappa, double E) {
  if (!(E < 0)) fail(ErrorFamily::config, "whittaker_logderiv_asymptotic", "E must be negative");
  const double r = std::sqrt(-E);
  OracleValue v;
  v.value = -std::log(r / std::numbers::pi) / (2 * r) + (kappa - 0.5) / (2 * E);
  v.abs_err_estimate = std::pow(-E, -1.5);
  v.method = Method::asymptotic_series;
  v.warning = E > -100.0;
  return v;
}

// ---------------------------------------------------------------------------
// closed-form characteristic functions (up to a constant)

/// exp_wall: K_{sqrt(-E)}(2 pi).
inline OracleValue exp_wall(cplx E) { return bessel_k(std::sqrt(-E), 2 * std::numbers::pi); }

/// symmetric_exp: K'_nu(pi) K_nu(pi), nu = sqrt(-E)/2.
inline OracleValue symmetric_exp(cplx E) {
  const cplx nu = 0.5 * std::sqrt(-E);
  const OracleValue k = bessel_k(nu, std::numbers::pi), kp = bessel_k_prime(nu, std::numbers::pi);
  return {k.value * kp.value, std::abs(k.value) * kp.abs_err_estimate + std::abs(kp.value) * k.abs_err_estimate};
}

/// truncated_morse(kappa): W_{kappa, sqrt(-E)}(4 pi).
inline OracleValue truncated_morse(double kappa, cplx E) {
  return whittaker_w_continued(kappa, std::sqrt(-E), 4 * std::numbers::pi);
}

/// Real zeros in [E_lo, E_hi] of a real-on-the-axis characteristic function
/// f(E): sign scan on n cells, then TOMS 748 to full precision.
template <class F>
std::vector<double> real_zeros(F&& f, double E_lo, double E_hi, int n = 400) {
  std::vector<double> out;
  std::vector<double> xs(n + 1), fs(n + 1);
  for (int i = 0; i <= n; ++i) {
    xs[i] = E_lo + (E_hi - E_lo) * i / n;
    fs[i] = f(xs[i]);
  }
  for (int i = 0; i < n; ++i) {
    if (fs[i] == 0.0) {
      out.push_back(xs[i]);
      continue;
    }
    if ((fs[i] < 0) == (fs[i + 1] < 0) || fs[i + 1] == 0.0) continue;
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(a - b) <= 4e-16 * std::max(1.0, std::abs(a)); };
    auto [a, b] = boost::math::tools::toms748_solve(f, xs[i], xs[i + 1], fs[i], fs[i + 1], tol, iters);
    out.push_back(0.5 * (a + b));
  }
  return out;
}

/// Eigenvalues of exp_wall in [E_lo, E_hi]: E = tau^2 with K_{i tau}(2 pi) = 0.
inline std::vector<double> exp_wall_zeros(double E_lo, double E_hi, int n = 400) {
  return real_zeros(
      [](double E) {
        const double t = std::sqrt(std::max(E, 0.0));
        return (exp_wall(E).value * std::exp(std::numbers::pi * t / 2)).real();
      },
      std::max(E_lo, 0.0), E_hi, n);
}

/// Eigenvalues of truncated_morse(kappa) in [E_lo, E_hi].
inline std::vector<double> truncated_morse_zeros(double kappa, double E_lo, double E_hi, int n = 400) {
  return real_zeros(
      [kappa](double E) {
        const double t = std::sqrt(std::max(E, 0.0));
        return (truncated_morse(kappa, E).value * std::exp(std::numbers::pi * t / 2)).real();
      },
      E_lo, E_hi, n);
}

}  // namespace shoot::oracles
