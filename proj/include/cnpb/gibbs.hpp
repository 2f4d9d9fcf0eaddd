#pragma once

// Gibbs densities exp(-2 V / D) / N of 1D gradient diffusions with total
// noise variance D. Normalizer and moments by adaptive Gauss-Kronrod.

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cnpb/error.hpp"
#include "cnpb/potential.hpp"

namespace cnpb {

struct GibbsMoments {
  double log_normalizer = 0.0;  // log of the integral of exp(-2 (V - V_min) / D)
  double v_min = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double half_width = 0.0;  // exp(-2 (V - V_min) / D) < e^-80 outside
};

inline GibbsMoments gibbs_moments(const Potential& pot, double noise_variance) {
  if (!(noise_variance > 0.0)) throw InvalidParameter("noise variance must be positive");
  const auto crit = poly::real_roots(poly::derivative(pot.coefficients()));
  double v_min = pot.value(0.0);
  double scale = 1.0;
  for (double x : crit) {
    v_min = std::min(v_min, pot.value(x));
    scale = std::max(scale, std::abs(x));
  }
  double X = scale;
  while (2.0 * (pot.value(X) - v_min) / noise_variance < 80.0 ||
         2.0 * (pot.value(-X) - v_min) / noise_variance < 80.0)
    X *= 1.25;

  using boost::math::quadrature::gauss_kronrod;
  auto w = [&](double x) { return std::exp(-2.0 * (pot.value(x) - v_min) / noise_variance); };
  // Split at the critical points so each piece is smooth and unimodal-ish.
  std::vector<double> cuts{-X};
  for (double x : crit)
    if (x > -X && x < X) cuts.push_back(x);
  cuts.push_back(X);
  auto integrate = [&](auto&& f) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      s += gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-13);
    return s;
  };
  const double z = integrate(w);
  const double m = integrate([&](double x) { return x * w(x); }) / z;
  const double v = integrate([&](double x) { return (x - m) * (x - m) * w(x); }) / z;
  return {std::log(z), v_min, m, v, X};
}

/// Normalized Gibbs density at x.
inline double gibbs_pdf(const Potential& pot, double noise_variance, const GibbsMoments& gm,
                        double x) {
  return std::exp(-2.0 * (pot.value(x) - gm.v_min) / noise_variance - gm.log_normalizer);
}

}  // namespace cnpb
