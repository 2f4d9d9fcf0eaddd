#pragma once

// Polynomial potentials V with exact derivatives and the structural checks
// used to decide whether a potential is covered by the pullback theory:
// the sextic dissipation bound and convexity outside a ball.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/Polynomials>

#include "cnpb/error.hpp"

namespace cnpb {

enum class PotentialKind { quadratic, double_well, polynomial };

inline std::string_view to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::quadratic: return "quadratic";
    case PotentialKind::double_well: return "double_well";
    case PotentialKind::polynomial: return "polynomial";
  }
  return "unknown";
}

inline PotentialKind potential_kind_from_string(std::string_view s) {
  if (s == "quadratic") return PotentialKind::quadratic;
  if (s == "double_well") return PotentialKind::double_well;
  if (s == "polynomial") return PotentialKind::polynomial;
  throw InvalidParameter("unknown potential kind '" + std::string(s) + "'");
}

namespace poly {

// Coefficients are stored in ascending order: c[0] + c[1] x + c[2] x^2 + ...
inline double eval(std::span<const double> c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

inline std::vector<double> derivative(std::span<const double> c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = static_cast<double>(i) * c[i];
  return d;
}

inline std::vector<double> trimmed(std::vector<double> c, double tol = 0.0) {
  while (c.size() > 1 && std::abs(c.back()) <= tol) c.pop_back();
  return c;
}

/// Real roots of a polynomial, each polished with a few Newton steps.
inline std::vector<double> real_roots(std::span<const double> coeffs) {
  auto c = trimmed(std::vector<double>(coeffs.begin(), coeffs.end()));
  if (c.size() <= 1) return {};
  if (c.size() == 2) return {-c[0] / c[1]};
  Eigen::VectorXd v(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) v[static_cast<Eigen::Index>(i)] = c[i];
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(v);
  double scale = 1.0;
  for (double x : c) scale = std::max(scale, std::abs(x / c.back()));
  const auto d = derivative(c);
  std::vector<double> out;
  for (const auto& z : solver.roots()) {
    if (std::abs(z.imag()) > 1e-7 * scale) continue;
    double x = z.real();
    for (int it = 0; it < 4; ++it) {
      const double dv = eval(d, x);
      if (dv == 0.0) break;
      x -= eval(c, x) / dv;
    }
    out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace poly

/// An analytic potential. In one dimension any even-degree polynomial with
/// positive leading coefficient is accepted; in d > 1 the polynomial must
/// be even and is applied radially, V(x) = sum_j c_{2j} |x|^{2j}.
class Potential {
 public:
  Potential(PotentialKind kind, std::vector<double> params)
      : kind_(kind), params_(std::move(params)) {
    switch (kind_) {
      case PotentialKind::quadratic: {
        const double a = single_positive("quadratic");
        coeffs_ = {0.0, 0.0, 0.5 * a};
        break;
      }
      case PotentialKind::double_well: {
        const double a = single_positive("double_well");
        coeffs_ = {0.0, 0.0, -0.5 * a, 0.0, 0.25};
        break;
      }
      case PotentialKind::polynomial: {
        coeffs_ = poly::trimmed(params_);
        const std::size_t degree = coeffs_.size() - 1;
        if (degree < 2 || degree % 2 != 0)
          throw InvalidParameter("polynomial potential must have even degree >= 2");
        if (!(coeffs_.back() > 0.0))
          throw InvalidParameter("polynomial potential needs a positive leading coefficient");
        for (double c : coeffs_)
          if (!std::isfinite(c)) throw InvalidParameter("polynomial coefficient is not finite");
        break;
      }
    }
    d1_ = poly::derivative(coeffs_);
    d2_ = poly::derivative(d1_);
    even_ = true;
    for (std::size_t i = 1; i < coeffs_.size(); i += 2)
      if (coeffs_[i] != 0.0) even_ = false;
  }

  static Potential quadratic(double a) { return {PotentialKind::quadratic, {a}}; }
  static Potential double_well(double a) { return {PotentialKind::double_well, {a}}; }
  static Potential polynomial(std::vector<double> ascending) {
    return {PotentialKind::polynomial, std::move(ascending)};
  }

  PotentialKind kind() const noexcept { return kind_; }
  const std::vector<double>& params() const noexcept { return params_; }
  /// Ascending monomial coefficients of V in one dimension.
  const std::vector<double>& coefficients() const noexcept { return coeffs_; }
  bool is_even() const noexcept { return even_; }

  double value(double x) const { return poly::eval(coeffs_, x); }
  double derivative(double x) const { return poly::eval(d1_, x); }
  double second_derivative(double x) const { return poly::eval(d2_, x); }

  double eval(std::span<const double> x) const {
    if (x.size() == 1) return value(x[0]);
    require_radial();
    const double s = squared_norm(x);
    double acc = 0.0;
    for (std::size_t i = coeffs_.size(); i-- > 0;)
      if (i % 2 == 0) acc = acc * s + coeffs_[i];
    return acc;
  }

  std::vector<double> grad(std::span<const double> x) const {
    if (x.size() == 1) return {derivative(x[0])};
    require_radial();
    const double g = 2.0 * radial_ds(squared_norm(x));
    std::vector<double> out(x.begin(), x.end());
    for (double& v : out) v *= g;
    return out;
  }

  /// Writes grad V(x) into `out` without allocating.
  void grad_into(std::span<const double> x, std::span<double> out) const {
    if (x.size() == 1) {
      out[0] = derivative(x[0]);
      return;
    }
    const double g = 2.0 * radial_ds(squared_norm(x));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = g * x[i];
  }

  double laplacian(std::span<const double> x) const {
    if (x.size() == 1) return second_derivative(x[0]);
    require_radial();
    const double s = squared_norm(x);
    return 4.0 * s * radial_dss(s) + 2.0 * static_cast<double>(x.size()) * radial_ds(s);
  }

  /// Throws unless the potential can be evaluated in dimension d.
  void check_dimension(std::size_t d) const {
    if (d == 0) throw InvalidParameter("dimension must be at least 1");
    if (d > 1) require_radial();
  }

 private:
  double single_positive(const char* name) const {
    if (params_.size() != 1)
      throw InvalidParameter(std::string(name) + " potential takes exactly one parameter a");
    const double a = params_[0];
    if (!(a > 0.0) || !std::isfinite(a))
      throw InvalidParameter(std::string(name) + " potential requires a > 0");
    return a;
  }

  void require_radial() const {
    if (!even_)
      throw InvalidParameter("only even polynomials can be used in dimension > 1");
  }

  static double squared_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  }

  // dV/ds and d2V/ds2 for V written as a polynomial in s = |x|^2.
  double radial_ds(double s) const {
    double acc = 0.0;
    for (std::size_t j = coeffs_.size() / 2; j >= 1; --j)
      acc = acc * s + static_cast<double>(j) * coeffs_[2 * j];
    return acc;
  }
  double radial_dss(double s) const {
    double acc = 0.0;
    for (std::size_t j = coeffs_.size() / 2; j >= 2; --j)
      acc = acc * s + static_cast<double>(j * (j - 1)) * coeffs_[2 * j];
    return acc;
  }

  PotentialKind kind_;
  std::vector<double> params_;
  std::vector<double> coeffs_;
  std::vector<double> d1_;
  std::vector<double> d2_;
  bool even_ = true;
};

struct DissipationResult {
  bool satisfied = false;
  std::optional<double> constant_C;
};

/// Decides whether V'(x) x |x|^2 >= |x|^6 / 2 - C holds for a finite C.
/// The behaviour at infinity is settled from the leading coefficient of
/// h(x) = V'(x) x^3 - x^6 / 2; the constant comes from a grid minimum of h
/// over |x| <= 20 (widened while h still decreases at the edge), polished
/// by golden-section search.
inline DissipationResult check_dissipation(const Potential& pot) {
  std::vector<double> h(pot.coefficients().size() + 3, 0.0);
  const auto d1 = poly::derivative(pot.coefficients());
  for (std::size_t i = 0; i < d1.size(); ++i) h[i + 3] += d1[i];
  if (h.size() < 7) h.resize(7, 0.0);
  h[6] -= 0.5;
  double scale = 0.0;
  for (double c : h) scale = std::max(scale, std::abs(c));
  h = poly::trimmed(std::move(h), 1e-14 * scale);
  const std::size_t degree = h.size() - 1;
  if (degree > 0 && (degree % 2 != 0 || h.back() < 0.0)) return {false, std::nullopt};

  const auto hp = poly::derivative(h);
  double half_width = 20.0;
  // The minimum lies where h is still decreasing towards the origin.
  while (half_width < 1e6 &&
         (poly::eval(hp, half_width) < 0.0 || poly::eval(hp, -half_width) > 0.0))
    half_width *= 2.0;

  constexpr int n_points = 100001;
  const double step = 2.0 * half_width / (n_points - 1);
  double best_x = -half_width;
  double best = poly::eval(h, best_x);
  for (int i = 1; i < n_points; ++i) {
    const double x = -half_width + step * i;
    const double v = poly::eval(h, x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  double lo = best_x - step, hi = best_x + step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double m1 = hi - inv_phi * (hi - lo);
    const double m2 = lo + inv_phi * (hi - lo);
    if (poly::eval(h, m1) < poly::eval(h, m2)) hi = m2;
    else lo = m1;
  }
  best = std::min(best, poly::eval(h, 0.5 * (lo + hi)));
  return {true, std::max(0.0, -best)};
}

/// Smallest R with V'' > 0 for |x| > R; zero for globally convex V.
inline double convexity_radius(const Potential& pot) {
  const auto d2 = poly::trimmed(poly::derivative(poly::derivative(pot.coefficients())));
  if (d2.size() == 1) {
    if (d2[0] > 0.0) return 0.0;
    throw InvalidParameter("potential is nowhere strictly convex");
  }
  double r = 0.0;
  for (double root : poly::real_roots(d2)) r = std::max(r, std::abs(root));
  return r;
}

}  // namespace cnpb
