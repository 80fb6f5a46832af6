#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "shoot/error.hpp"

namespace shoot {

using cplx = std::complex<double>;

/// Numerical constants of the tail construction. Defaults are the contraction
/// constants c = 1/40, eps = 1/8 together with mesh and tolerance choices.
struct Config {
  // contraction constants
  double c = 1.0 / 40.0;              ///< |V'| <= 2 c k_r^3 on the tail
  double eps = 1.0 / 8.0;             ///< radius of the ball around -k
  double cone_factor = std::numbers::sqrt2;  ///< V - Re E > cone_factor |Im E|

  // tail search and mesh
  double lattice_step = 1.0 / 16.0;   ///< search lattice for x_E
  double search_horizon = 60.0;       ///< how far past the floor x_E may be sought
  double safety_margin = 0.5;         ///< conditions re-verified this far past X_max
  double tail_tol = 1e-14;            ///< exp(-2 int k_r) truncation certificate
  double norm_tol = 1e-9;             ///< normalization closure: max(1,|dE|)/k_r(X)^3
  double mesh_density = 2.0;          ///< local step <= 1/(density k_r)
  double h_max = 1.0 / 16.0;
  double x_max_extra = 0.0;           ///< extend X_max by this much (convergence studies)
  std::size_t max_mesh = 3'000'000;

  // fixed-point iteration
  double tol = 1e-12;
  double res_tol = 1e-8;
  int max_iters = 200;

  // leftward ODE propagation
  double ode_rel = 1e-12;
  double ode_abs = 1e-14;

  double beta() const { return 1.0 - 2.0 * eps; }

  /// Contraction factor alpha = 2 eps (2 - c/2) / (1 - c/2).
  double alpha() const { return 2.0 * eps * (2.0 - c / 2.0) / (1.0 - c / 2.0); }

  /// Bound on the first step ||C[-k] + k||: (2 - c/2) c / (1 - c/2).
  double first_step_bound() const { return (2.0 - c / 2.0) * c / (1.0 - c / 2.0); }

  /// |sigma| |k| <= (1 - eps) / (2 - 6 eps + eps^2).
  double sigma_bound_factor() const { return (1.0 - eps) / (2.0 - 6.0 * eps + eps * eps); }

  void validate() const {
    auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!(pos(c) && c < 2.0)) fail(ErrorFamily::config, "config", "c must lie in (0, 2)");
    if (!(pos(eps) && eps < 0.5)) fail(ErrorFamily::config, "config", "eps must lie in (0, 1/2)");
    if (!(alpha() < 1.0 && first_step_bound() <= (1.0 - alpha()) * eps))
      fail(ErrorFamily::config, "config", "c and eps do not give a contraction of the eps-ball");
    if (!pos(cone_factor)) fail(ErrorFamily::config, "config", "cone_factor must be positive");
    if (!(pos(lattice_step) && pos(search_horizon) && pos(safety_margin)))
      fail(ErrorFamily::config, "config", "search parameters must be positive");
    if (!(pos(tail_tol) && pos(norm_tol) && pos(tol) && pos(res_tol) && pos(ode_rel) && pos(ode_abs)))
      fail(ErrorFamily::config, "config", "all tolerances must be positive");
    if (!(pos(mesh_density) && pos(h_max))) fail(ErrorFamily::config, "config", "mesh parameters must be positive");
    if (!(x_max_extra >= 0.0)) fail(ErrorFamily::config, "config", "x_max_extra must be nonnegative");
    if (max_iters < 1) fail(ErrorFamily::config, "config", "max_iters must be at least 1");
  }
};

}  // namespace shoot
