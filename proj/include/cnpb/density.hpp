#pragma once

// Probability densities on a uniform 1D grid, estimators from particle
// clouds, moments, and the distances used to compare densities:
// total variation (L1), Wasserstein-1, and an upper bound on the
// Kantorovich-Rubinstein distance W_f through the monotone coupling.
//
// Values are cell averages; within a cell the density is taken as uniform,
// so the CDF is piecewise linear and quantile functions are piecewise linear.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cnpb/error.hpp"
#include "cnpb/profile.hpp"

namespace cnpb {

struct GridSpec {
  double x_min = -1.0;
  double x_max = 1.0;
  std::size_t n_cells = 1;

  GridSpec() = default;
  GridSpec(double lo, double hi, std::size_t n) : x_min(lo), x_max(hi), n_cells(n) {
    if (!(hi > lo) || n == 0 || !std::isfinite(lo) || !std::isfinite(hi))
      throw InvalidParameter("grid needs x_max > x_min and at least one cell");
  }

  static GridSpec symmetric(double half_width, std::size_t n) {
    return {-half_width, half_width, n};
  }

  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(n_cells); }
  double edge(std::size_t i) const noexcept { return x_min + dx() * static_cast<double>(i); }
  double center(std::size_t i) const noexcept {
    return x_min + dx() * (static_cast<double>(i) + 0.5);
  }
  bool contains(double x) const noexcept { return x >= x_min && x <= x_max; }

  /// Same cell count and edges within a tiny fraction of a cell.
  bool matches(const GridSpec& o, double rel_tol = 1e-9) const noexcept {
    const double tol = rel_tol * dx();
    return n_cells == o.n_cells && std::abs(x_min - o.x_min) <= tol &&
           std::abs(x_max - o.x_max) <= tol;
  }
};

class GridDensity {
 public:
  GridDensity() = default;

  /// Normalizes `values` to unit mass. Values must be finite and
  /// non-negative with positive total.
  GridDensity(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.n_cells) throw InvalidParameter("density size does not match grid");
    double total = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v) || v < 0.0) throw InvalidParameter("density values must be finite and >= 0");
      total += v;
    }
    total *= grid_.dx();
    if (!(total > 0.0)) throw InvalidParameter("density has zero mass");
    for (double& v : values_) v /= total;
  }

  /// Wraps values without renormalizing (used where the raw mass itself is
  /// the quantity of interest, e.g. solver snapshots).
  static GridDensity unnormalized(GridSpec grid, std::vector<double> values) {
    if (values.size() != grid.n_cells) throw InvalidParameter("density size does not match grid");
    GridDensity d;
    d.grid_ = grid;
    d.values_ = std::move(values);
    return d;
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double dx() const noexcept { return grid_.dx(); }

  double mass() const noexcept {
    return std::accumulate(values_.begin(), values_.end(), 0.0) * grid_.dx();
  }

  /// Density at x by cell lookup; zero outside the grid.
  double at(double x) const noexcept {
    if (x < grid_.x_min || x > grid_.x_max) return 0.0;
    auto i = static_cast<std::size_t>((x - grid_.x_min) / grid_.dx());
    return values_[std::min(i, values_.size() - 1)];
  }

  /// Cumulative masses at the n+1 cell edges.
  std::vector<double> cdf() const {
    std::vector<double> F(values_.size() + 1, 0.0);
    const double h = grid_.dx();
    for (std::size_t i = 0; i < values_.size(); ++i) F[i + 1] = F[i] + values_[i] * h;
    return F;
  }

 private:
  GridSpec grid_;
  std::vector<double> values_{1.0};
};

// ---------------------------------------------------------------- estimators

struct Histogram {};
struct GaussianKde {
  double bandwidth = 0.0;  // <= 0 selects Silverman's rule
};
using DensityEstimator = std::variant<Histogram, GaussianKde>;

inline std::size_t count_out_of_range(std::span<const double> xs, const GridSpec& grid) {
  return static_cast<std::size_t>(std::count_if(xs.begin(), xs.end(), [&](double x) {
    return !(x >= grid.x_min && x <= grid.x_max);
  }));
}

inline double silverman_bandwidth(std::span<const double> xs) {
  const auto n = static_cast<double>(xs.size());
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? sorted[i] * (1 - w) + sorted[i + 1] * w : sorted[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(n, -0.2);
}

/// Density estimate from particle positions. Particles outside the grid
/// are folded into the boundary cells if they carry less than 0.1% of the
/// mass; otherwise the estimate is rejected.
inline GridDensity from_particles(std::span<const double> xs, const GridSpec& grid,
                                  const DensityEstimator& method = Histogram{}) {
  if (xs.empty()) throw InvalidParameter("density estimate needs at least one particle");
  for (double x : xs)
    if (!std::isfinite(x)) throw NumericalFailure("non-finite particle position");
  const std::size_t outside = count_out_of_range(xs, grid);
  if (static_cast<double>(outside) > 1e-3 * static_cast<double>(xs.size()))
    throw NumericalFailure(std::to_string(outside) + " of " + std::to_string(xs.size()) +
                           " particles fall outside the density grid");
  const std::size_t n = grid.n_cells;
  const double h = grid.dx();
  std::vector<double> counts(n, 0.0);
  auto cell_of = [&](double x) {
    const double u = (x - grid.x_min) / h;
    if (u <= 0.0) return std::size_t{0};
    return std::min(static_cast<std::size_t>(u), n - 1);
  };

  double bw = 0.0;
  if (const auto* kde = std::get_if<GaussianKde>(&method))
    bw = kde->bandwidth > 0.0 ? kde->bandwidth : silverman_bandwidth(xs);

  if (bw <= 0.0) {
    for (double x : xs) counts[cell_of(x)] += 1.0;
  } else {
    // Exact cell integrals of each Gaussian kernel, truncated at 8 bandwidths.
    const double inv = 1.0 / (bw * std::sqrt(2.0));
    const auto reach = static_cast<std::size_t>(std::ceil(8.0 * bw / h)) + 1;
    for (double x : xs) {
      const std::size_t c = cell_of(x);
      const std::size_t lo = c > reach ? c - reach : 0;
      const std::size_t hi = std::min(n - 1, c + reach);
      double prev = std::erf((grid.edge(lo) - x) * inv);
      for (std::size_t i = lo; i <= hi; ++i) {
        const double next = std::erf((grid.edge(i + 1) - x) * inv);
        counts[i] += 0.5 * (next - prev);
        prev = next;
      }
    }
  }
  return GridDensity(grid, std::move(counts));
}

/// Cell averages of N(mean, var); var = 0 gives a single-cell spike.
inline GridDensity gaussian_density(const GridSpec& grid, double mean, double var) {
  std::vector<double> v(grid.n_cells, 0.0);
  if (var <= 0.0) {
    if (!grid.contains(mean)) throw WindowError("point mass outside the grid");
    const auto i = std::min(static_cast<std::size_t>((mean - grid.x_min) / grid.dx()), grid.n_cells - 1);
    v[i] = 1.0;
    return GridDensity(grid, std::move(v));
  }
  const double inv = 1.0 / std::sqrt(2.0 * var);
  double prev = std::erf((grid.edge(0) - mean) * inv);
  for (std::size_t i = 0; i < grid.n_cells; ++i) {
    const double next = std::erf((grid.edge(i + 1) - mean) * inv);
    v[i] = 0.5 * (next - prev);
    prev = next;
  }
  return GridDensity(grid, std::move(v));
}

// ------------------------------------------------------------------ moments

/// Grid quadrature of the integral of h against the density.
template <class H>
double expectation(const GridDensity& d, H&& h) {
  double acc = 0.0;
  const auto& g = d.grid();
  for (std::size_t i = 0; i < d.size(); ++i) acc += h(g.center(i)) * d.values()[i];
  return acc * g.dx();
}

inline double mean(const GridDensity& d) {
  return expectation(d, [](double x) { return x; });
}

inline double variance(const GridDensity& d) {
  const double m = mean(d);
  return expectation(d, [m](double x) { return (x - m) * (x - m); });
}

// ---------------------------------------------------------------- distances

inline void require_same_grid(const GridDensity& a, const GridDensity& b) {
  if (!a.grid().matches(b.grid())) throw InvalidParameter("densities live on different grids");
}

inline double l1_distance(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.values()[i] - b.values()[i]);
  return acc * a.dx();
}

/// W1 = integral of |F1 - F2| dx. Both CDFs are linear inside a cell, so
/// each cell contributes exactly, including cells where F1 - F2 changes sign.
inline double wasserstein1(const GridDensity& a, const GridDensity& b) {
  require_same_grid(a, b);
  const double h = a.dx();
  double Fa = 0.0, Fb = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d0 = Fa - Fb;
    Fa += a.values()[i] * h;
    Fb += b.values()[i] * h;
    const double d1 = Fa - Fb;
    if ((d0 >= 0.0) == (d1 >= 0.0)) {
      acc += 0.5 * h * (std::abs(d0) + std::abs(d1));
    } else {
      acc += 0.5 * h * (d0 * d0 + d1 * d1) / (std::abs(d0) + std::abs(d1));
    }
  }
  return acc;
}

namespace detail {

// Walks the monotone (quantile) coupling of two grid densities. On each
// u-interval both quantile functions are linear; fn(u_length, dq_start,
// dq_end) receives the interval length and the quantile difference at its
// ends.
template <class Fn>
void walk_quantile_coupling(const GridDensity& a, const GridDensity& b, Fn&& fn) {
  const auto& ga = a.grid();
  const auto& gb = b.grid();
  const double ha = ga.dx(), hb = gb.dx();
  std::size_t i = 0, j = 0;
  const std::size_t na = a.size(), nb = b.size();
  auto skip_empty = [](const GridDensity& d, std::size_t& k) {
    while (k < d.size() && d.values()[k] <= 0.0) ++k;
  };
  skip_empty(a, i);
  skip_empty(b, j);
  if (i >= na || j >= nb) return;
  double used_a = 0.0, used_b = 0.0;  // mass consumed in the current cells
  double total = 0.0;
  const double end_mass = std::min(a.mass(), b.mass());
  while (i < na && j < nb && total < end_mass) {
    const double ma = a.values()[i] * ha, mb = b.values()[j] * hb;
    const double ra = ma - used_a, rb = mb - used_b;
    const double du = std::min(ra, rb);
    const double qa0 = ga.edge(i) + ha * used_a / ma;
    const double qb0 = gb.edge(j) + hb * used_b / mb;
    const double qa1 = ga.edge(i) + ha * (used_a + du) / ma;
    const double qb1 = gb.edge(j) + hb * (used_b + du) / mb;
    if (du > 0.0) fn(du, qa0 - qb0, qa1 - qb1);
    total += du;
    used_a += du;
    used_b += du;
    if (ra <= rb) {
      ++i;
      used_a = 0.0;
      skip_empty(a, i);
    }
    if (rb <= ra) {
      ++j;
      used_b = 0.0;
      skip_empty(b, j);
    }
  }
}

}  // namespace detail

/// W1 through the quantile coupling; equals wasserstein1 for normalized
/// densities on the same grid, and also accepts different grids.
inline double wasserstein1_quantile(const GridDensity& a, const GridDensity& b) {
  double acc = 0.0;
  detail::walk_quantile_coupling(a, b, [&](double du, double d0, double d1) {
    if ((d0 >= 0.0) == (d1 >= 0.0)) acc += 0.5 * du * (std::abs(d0) + std::abs(d1));
    else acc += 0.5 * du * (d0 * d0 + d1 * d1) / (std::abs(d0) + std::abs(d1));
  });
  return acc;
}

/// Upper bound on W_f(a, b): the cost of the monotone coupling under
/// d_f(x, y) = f(|x - y| / sigma). Any coupling bounds the infimum.
inline double wf_upper(const GridDensity& a, const GridDensity& b, const ContractionProfile& prof) {
  prof.validate();
  // Three-point Gauss-Legendre on each linear piece, split at sign changes.
  static constexpr std::array<double, 3> nodes{-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr std::array<double, 3> weights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double inv_sigma = 1.0 / prof.sigma;
  auto piece = [&](double du, double d0, double d1) {
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double s = 0.5 * (1.0 + nodes[k]);
      acc += weights[k] * prof.f_at(std::abs(d0 + s * (d1 - d0)) * inv_sigma);
    }
    return 0.5 * du * acc;
  };
  double total = 0.0;
  detail::walk_quantile_coupling(a, b, [&](double du, double d0, double d1) {
    if ((d0 >= 0.0) == (d1 >= 0.0)) {
      total += piece(du, d0, d1);
    } else {
      const double s = d0 / (d0 - d1);
      total += piece(du * s, d0, 0.0) + piece(du * (1.0 - s), 0.0, d1);
    }
  });
  return total;
}

struct DistanceReport {
  double l1 = 0.0;
  double w1 = 0.0;
  double wf_upper = 0.0;
  std::string f_profile_id;
};

/// l1 and w1 in x units; wf_upper in the sigma-weighted norm, so the
/// sandwich reads (phi(R0)/2) w1/sigma <= wf_upper <= w1/sigma.
inline DistanceReport compare(const GridDensity& a, const GridDensity& b,
                              const ContractionProfile& prof) {
  return {l1_distance(a, b), wasserstein1(a, b), wf_upper(a, b, prof), prof.id};
}

/// Exact W1 between two empirical measures (sorted-sample CDF integral).
inline double wasserstein1_samples(std::vector<double> xs, std::vector<double> ys) {
  if (xs.empty() || ys.empty()) throw InvalidParameter("empty sample");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  if (xs.size() == ys.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) acc += std::abs(xs[i] - ys[i]);
    return acc / static_cast<double>(xs.size());
  }
  const double wx = 1.0 / static_cast<double>(xs.size());
  const double wy = 1.0 / static_cast<double>(ys.size());
  std::size_t i = 0, j = 0;
  double Fx = 0.0, Fy = 0.0, acc = 0.0;
  double prev = std::min(xs[0], ys[0]);
  while (i < xs.size() || j < ys.size()) {
    const bool take_x = j >= ys.size() || (i < xs.size() && xs[i] <= ys[j]);
    const double x = take_x ? xs[i] : ys[j];
    acc += std::abs(Fx - Fy) * (x - prev);
    prev = x;
    if (take_x) {
      Fx += wx;
      ++i;
    } else {
      Fy += wy;
      ++j;
    }
  }
  return acc;
}

/// Mass-conserving transfer onto another grid by cell overlap. Used only to
/// put solver snapshots on a common output grid for plotting.
inline GridDensity remap_conservative(const GridDensity& d, const GridSpec& target) {
  const auto F = d.cdf();
  const auto& g = d.grid();
  auto cdf_at = [&](double x) {
    if (x <= g.x_min) return 0.0;
    if (x >= g.x_max) return F.back();
    const double u = (x - g.x_min) / g.dx();
    const auto i = std::min(static_cast<std::size_t>(u), d.size() - 1);
    return F[i] + (u - static_cast<double>(i)) * (F[i + 1] - F[i]);
  };
  std::vector<double> v(target.n_cells);
  double prev = cdf_at(target.edge(0));
  for (std::size_t i = 0; i < target.n_cells; ++i) {
    const double next = cdf_at(target.edge(i + 1));
    v[i] = std::max(0.0, next - prev) / target.dx();
    prev = next;
  }
  return GridDensity(target, std::move(v));
}

// ---------------------------------------------------------------------- CSV

inline constexpr int csv_schema_version = 1;

inline void write_density_csv(const GridDensity& d, std::ostream& os) {
  os << "schema_version,x,p\n";
  os.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i)
    os << csv_schema_version << ',' << d.grid().center(i) << ',' << d.values()[i] << '\n';
}

/// Several densities on one grid as columns p_0, p_1, ... (figure overlays).
inline void write_densities_csv(std::span<const GridDensity> ds, std::ostream& os,
                                std::span<const std::string> names = {}) {
  if (ds.empty()) return;
  for (const auto& d : ds) require_same_grid(ds[0], d);
  os << "schema_version,x";
  for (std::size_t k = 0; k < ds.size(); ++k)
    os << ',' << (k < names.size() ? names[k] : "p_" + std::to_string(k));
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < ds[0].size(); ++i) {
    os << csv_schema_version << ',' << ds[0].grid().center(i);
    for (const auto& d : ds) os << ',' << d.values()[i];
    os << '\n';
  }
}

}  // namespace cnpb
