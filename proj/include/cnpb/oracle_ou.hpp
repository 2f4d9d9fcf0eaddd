#pragma once

// Closed-form laws of dx = -a x dt + sigma dW + eta dB for a fixed common
// path beta, and the stationary densities used as references.

#include <cmath>
#include <cstdint>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cnpb/density.hpp"
#include "cnpb/error.hpp"
#include "cnpb/gibbs.hpp"
#include "cnpb/noise.hpp"
#include "cnpb/potential.hpp"

namespace cnpb {

struct OuParams {
  double a = 1.0;
  double sigma = 1.0;
  double eta = 0.0;

  void validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) throw InvalidParameter("OU rate a must be positive");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidParameter("OU sigma must be positive");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidParameter("OU eta must be non-negative");
  }
};

// Left-point sums are the default; the exact rule integrates the kernel
// against the piecewise-linear interpolant of beta, which is what a solver
// that interpolates beta linearly actually sees.
enum class StieltjesRule { left_point, piecewise_linear_exact };

/// x_s e^{-a(t-s)} + eta * integral_s^t e^{-a(t-u)} dbeta(u).
inline double ou_mbeta(const OuParams& p, const BrownianPath& beta, double t, double s, double x_s,
                       StieltjesRule rule = StieltjesRule::left_point) {
  p.validate();
  if (t < s) throw InvalidParameter("ou_mbeta needs t >= s");
  if (!beta.covers(s, t)) throw WindowError("path does not cover the integration window");
  double integral = 0.0;
  if (p.eta != 0.0 && t > s) {
    const double h = beta.dt();
    // Break points: s, the grid times strictly inside (s, t), t.
    const auto j_lo = static_cast<std::int64_t>(std::floor(s / h + 1e-9)) + 1;
    const auto j_hi = static_cast<std::int64_t>(std::ceil(t / h - 1e-9)) - 1;
    double u0 = s, b0 = beta.value_at(s);
    auto add = [&](double u1, double b1) {
      const double db = b1 - b0;
      if (rule == StieltjesRule::left_point || u1 - u0 <= 0.0) {
        integral += std::exp(-p.a * (t - u0)) * db;
      } else {
        // exp(-a(t-u1)) - exp(-a(t-u0)) written to avoid cancellation.
        const double w = std::exp(-p.a * (t - u1)) * -std::expm1(-p.a * (u1 - u0)) / (p.a * (u1 - u0));
        integral += w * db;
      }
      u0 = u1;
      b0 = b1;
    };
    for (std::int64_t j = j_lo; j <= j_hi; ++j) add(beta.time(j), beta.at_index(j));
    add(t, beta.value_at(t));
  }
  return x_s * std::exp(-p.a * (t - s)) + p.eta * integral;
}

inline double ou_transition_variance(const OuParams& p, double t, double s) {
  return p.sigma * p.sigma * -std::expm1(-2.0 * p.a * (t - s)) / (2.0 * p.a);
}

/// Law of x(t) given x(s) = x_s, as cell averages on the grid.
inline GridDensity ou_transition_density(const OuParams& p, const BrownianPath& beta, double t, double s,
                                         double x_s, const GridSpec& grid,
                                         StieltjesRule rule = StieltjesRule::left_point) {
  if (!(t > s)) throw InvalidParameter("transition density needs t > s");
  return gaussian_density(grid, ou_mbeta(p, beta, t, s, x_s, rule), ou_transition_variance(p, t, s));
}

/// Mean and variance at t of the law started from N(mean0, var0) at s.
inline std::pair<double, double> ou_propagate_gaussian(const OuParams& p, const BrownianPath& beta, double t,
                                                       double s, double mean0, double var0,
                                                       StieltjesRule rule = StieltjesRule::left_point) {
  const double decay = std::exp(-2.0 * p.a * (t - s));
  return {ou_mbeta(p, beta, t, s, mean0, rule), var0 * decay + ou_transition_variance(p, t, s)};
}

inline double default_truncation_tau(const OuParams& p) { return 20.0 / p.a; }

/// eta * integral_{-tau}^0 e^{a u} dbeta(u); truncation error of order e^{-a tau}.
inline double ou_pullback_mean(const OuParams& p, const BrownianPath& beta, double tau = -1.0,
                               StieltjesRule rule = StieltjesRule::left_point) {
  if (tau < 0.0) tau = default_truncation_tau(p);
  return ou_mbeta(p, beta, 0.0, -tau, 0.0, rule);
}

inline GridDensity ou_pullback_density(const OuParams& p, const BrownianPath& beta, const GridSpec& grid,
                                       double tau = -1.0, StieltjesRule rule = StieltjesRule::left_point) {
  return gaussian_density(grid, ou_pullback_mean(p, beta, tau, rule), p.sigma * p.sigma / (2.0 * p.a));
}

inline GridDensity ou_stationary_density(const OuParams& p, const GridSpec& grid) {
  p.validate();
  return gaussian_density(grid, 0.0, (p.sigma * p.sigma + p.eta * p.eta) / (2.0 * p.a));
}

/// Cell averages of exp(-2V/D)/N for a Gibbs law, 15-point Gauss-Kronrod per cell.
inline GridDensity gibbs_density(const Potential& pot, double noise_variance, const GridSpec& grid) {
  const auto gm = gibbs_moments(pot, noise_variance);
  std::vector<double> v(grid.n_cells);
  auto f = [&](double x) { return gibbs_pdf(pot, noise_variance, gm, x); };
  using boost::math::quadrature::gauss_kronrod;
  for (std::size_t i = 0; i < grid.n_cells; ++i)
    v[i] = gauss_kronrod<double, 15>::integrate(f, grid.edge(i), grid.edge(i + 1), 0) / grid.dx();
  return GridDensity(grid, std::move(v));
}

inline GridDensity dw_stationary_density(double a, double noise_variance, const GridSpec& grid) {
  return gibbs_density(Potential::double_well(a), noise_variance, grid);
}

}  // namespace cnpb
