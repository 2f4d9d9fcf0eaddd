#pragma once

// Fokker-Planck solver for the density of x under a fixed common path beta.
//
// Work in y = x - eta beta(t): q(y, t) solves
//   q_t = (U_y q + C q_y)_y,   U(y, t) = V(y + eta beta(t)),  C = sigma^2 / 2,
// which has no transport term in beta. The x-density at time t is q on the
// same cells translated by eta beta(t), so no interpolation is needed to
// map back. Cells carry averages; fluxes are Scharfetter-Gummel (Chang-
// Cooper) with B = (U_{i+1} - U_i) / dx, which makes exp(-U / C) an exact
// discrete equilibrium. Zero-flux walls; backward Euler in time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cnpb/density.hpp"
#include "cnpb/error.hpp"
#include "cnpb/noise.hpp"
#include "cnpb/potential.hpp"
#include "cnpb/sde.hpp"

namespace cnpb {

enum class FpScheme { chang_cooper, central_crank_nicolson };

inline std::string_view to_string(FpScheme s) {
  return s == FpScheme::chang_cooper ? "chang_cooper" : "central_crank_nicolson";
}

inline FpScheme fp_scheme_from_string(std::string_view s) {
  if (s == "chang_cooper") return FpScheme::chang_cooper;
  if (s == "central_crank_nicolson") return FpScheme::central_crank_nicolson;
  throw InvalidParameter("unknown Fokker-Planck scheme '" + std::string(s) + "'");
}

struct FpGrid {
  GridSpec space;  // used to build initial data; the solve runs on q0's cells
  double dt = 1e-4;
  FpScheme scheme = FpScheme::chang_cooper;
  double boundary_tol = 1e-6;        // mass allowed in the two wall cells
  bool fail_on_boundary_mass = true;
  double mass_tol = 1e-8;            // per-step mass drift allowed
  // Shift the y-window by whole cells to follow -eta beta(t), so the
  // x-window stays put over long runs. Mass leaving the window is logged.
  bool track_window = false;
};

struct FpSolution {
  std::vector<double> times;
  std::vector<GridDensity> snapshots;
  BrownianPath beta_used;
  std::vector<double> mass_log;  // mass after each step, entry 0 is the initial mass
  double max_boundary_mass = 0.0;
  double dropped_mass = 0.0;  // left the window while tracking
  double clamped_mass = 0.0;  // negative values removed by the central scheme
  std::int64_t steps = 0;

  const GridDensity& final_density() const { return snapshots.back(); }
};

using FpObserver = std::function<void(double t, const GridDensity& p)>;

namespace detail {

// z / (e^z - 1), continuous at 0.
inline double bernoulli_fn(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
  return z / std::expm1(z);
}

// Solves the tridiagonal system lo[i] x[i-1] + di[i] x[i] + up[i] x[i+1] = r[i].
inline void thomas(std::span<const double> lo, std::span<const double> di, std::span<const double> up,
                   std::span<double> r, std::vector<double>& work) {
  const std::size_t n = di.size();
  work.resize(n);
  double beta = di[0];
  r[0] /= beta;
  for (std::size_t i = 1; i < n; ++i) {
    work[i] = up[i - 1] / beta;
    beta = di[i] - lo[i] * work[i];
    r[i] = (r[i] - lo[i] * r[i - 1]) / beta;
  }
  for (std::size_t i = n - 1; i-- > 0;) r[i] -= work[i + 1] * r[i + 1];
}

}  // namespace detail

/// Evolves the x-density q0 (given at time t0) to t1 along beta.
/// Snapshots are taken at t0, at each requested output time, and at t1;
/// output times must fall on the solver step grid t0 + k dt.
inline FpSolution solve_nonautonomous(const GridDensity& q0, const SdeSpec& spec, const BrownianPath& beta,
                                      double t0, double t1, const FpGrid& fg,
                                      std::span<const double> output_times = {},
                                      const FpObserver& observer = {}, bool store_snapshots = true) {
  spec.require_1d();
  const double dt = fg.dt;
  const std::int64_t n_steps = detail::step_count(t0, t1, dt);
  const double eta = spec.eta1();
  const double C = 0.5 * spec.sigma1() * spec.sigma1();
  const std::size_t n = q0.size();
  const double h = q0.dx();
  if (n < 3) throw InvalidParameter("Fokker-Planck grid needs at least three cells");
  if (eta != 0.0 && !beta.covers(t0, t1)) throw WindowError("beta does not cover the solve window");
  if (fg.scheme == FpScheme::central_crank_nicolson && C > 0.0 && dt > 0.5 * h * h / (2.0 * C))
    throw NumericalFailure("time step violates dt <= 0.5 dx^2 / sigma^2 for the central scheme");

  auto shift_at = [&](double t) { return eta == 0.0 ? 0.0 : eta * beta.value_at(t); };

  // Output step indices.
  std::vector<std::int64_t> out_steps{0};
  for (double t : output_times) {
    const double u = (t - t0) / dt;
    const double k = std::round(u);
    if (std::abs(u - k) > 1e-6 || k < 0 || k > static_cast<double>(n_steps))
      throw InvalidParameter("output time " + std::to_string(t) + " is not on the solver step grid");
    out_steps.push_back(static_cast<std::int64_t>(k));
  }
  out_steps.push_back(n_steps);
  std::sort(out_steps.begin(), out_steps.end());
  out_steps.erase(std::unique(out_steps.begin(), out_steps.end()), out_steps.end());

  const double y_lo0 = q0.grid().x_min - shift_at(t0);
  const double x_lo0 = q0.grid().x_min;
  std::int64_t cell_offset = 0;  // y-window is y_lo0 + cell_offset * h
  std::vector<double> q = q0.values();

  FpSolution sol;
  sol.beta_used = beta;
  sol.steps = n_steps;
  sol.mass_log.reserve(static_cast<std::size_t>(n_steps) + 1);
  double mass = std::accumulate(q.begin(), q.end(), 0.0) * h;
  sol.mass_log.push_back(mass);

  auto emit = [&](std::int64_t k) {
    const double t = k == n_steps ? t1 : t0 + static_cast<double>(k) * dt;
    const double lo = y_lo0 + static_cast<double>(cell_offset) * h + shift_at(t);
    auto snap = GridDensity::unnormalized(GridSpec(lo, lo + static_cast<double>(n) * h, n), q);
    if (observer) observer(t, snap);
    if (store_snapshots) {
      sol.times.push_back(t);
      sol.snapshots.push_back(std::move(snap));
    }
  };

  std::vector<double> U(n), a(n - 1), b(n - 1), lo(n), di(n), up(n), rhs(n), work;
  std::vector<double> a_old, b_old;
  double cached_shift = std::numeric_limits<double>::quiet_NaN();
  std::int64_t cached_offset = -1;
  bool have_coeffs = false;

  // Interface coefficients: flux J_{i+1/2} = b_i q_i - a_i q_{i+1}.
  auto build = [&](double s) {
    if (have_coeffs && s == cached_shift && cell_offset == cached_offset) return;
    const double ylo = y_lo0 + static_cast<double>(cell_offset) * h;
    for (std::size_t i = 0; i < n; ++i)
      U[i] = spec.potential.value(ylo + (static_cast<double>(i) + 0.5) * h + s);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double B = (U[i + 1] - U[i]) / h;
      if (fg.scheme == FpScheme::chang_cooper) {
        if (C > 0.0) {
          const double w = B * h / C;
          b[i] = C / h * detail::bernoulli_fn(w);
          a[i] = C / h * detail::bernoulli_fn(-w);
        } else {
          b[i] = std::max(-B, 0.0);
          a[i] = std::max(B, 0.0);
        }
      } else {
        b[i] = C / h - 0.5 * B;
        a[i] = C / h + 0.5 * B;
      }
    }
    cached_shift = s;
    cached_offset = cell_offset;
    have_coeffs = true;
  };

  // (L q)_i = (b_{i-1} q_{i-1} - (a_{i-1} + b_i) q_i + a_i q_{i+1}) / h
  auto apply_L = [&](const std::vector<double>& aa, const std::vector<double>& bb, std::span<const double> v,
                     std::size_t i) {
    double r = 0.0;
    if (i > 0) r += bb[i - 1] * v[i - 1] - aa[i - 1] * v[i];
    if (i + 1 < n) r += aa[i] * v[i + 1] - bb[i] * v[i];
    return r / h;
  };

  const double theta = fg.scheme == FpScheme::chang_cooper ? 1.0 : 0.5;
  std::size_t next_out = 0;
  if (out_steps[next_out] == 0) {
    emit(0);
    ++next_out;
  }
  if (fg.scheme == FpScheme::central_crank_nicolson) build(shift_at(t0));

  for (std::int64_t k = 0; k < n_steps; ++k) {
    const double t_next = k + 1 == n_steps ? t1 : t0 + static_cast<double>(k + 1) * dt;
    const double s_next = shift_at(t_next);

    if (fg.track_window) {
      const auto target = static_cast<std::int64_t>(std::llround((x_lo0 - s_next - y_lo0) / h));
      const std::int64_t move = target - cell_offset;
      if (move != 0) {
        std::vector<double> moved(n, 0.0);
        double dropped = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const std::int64_t src = static_cast<std::int64_t>(i) + move;
          if (src >= 0 && src < static_cast<std::int64_t>(n)) moved[i] = q[static_cast<std::size_t>(src)];
        }
        for (std::size_t i = 0; i < n; ++i) {
          const std::int64_t dst = static_cast<std::int64_t>(i) - move;
          if (dst < 0 || dst >= static_cast<std::int64_t>(n)) dropped += q[i];
        }
        q.swap(moved);
        cell_offset = target;
        sol.dropped_mass += dropped * h;
        mass -= dropped * h;
        if (fg.scheme == FpScheme::central_crank_nicolson) {
          have_coeffs = false;
          build(shift_at(t0 + static_cast<double>(k) * dt));
        }
      }
    }

    if (theta < 1.0) {
      a_old = a;
      b_old = b;
    }
    build(s_next);
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = i > 0 ? -theta * dt * b[i - 1] / h : 0.0;
      up[i] = i + 1 < n ? -theta * dt * a[i] / h : 0.0;
      double out_rate = 0.0;
      if (i > 0) out_rate += a[i - 1];
      if (i + 1 < n) out_rate += b[i];
      di[i] = 1.0 + theta * dt * out_rate / h;
      rhs[i] = q[i];
      if (theta < 1.0) rhs[i] += (1.0 - theta) * dt * apply_L(a_old, b_old, q, i);
    }
    detail::thomas(lo, di, up, rhs, work);
    q.swap(rhs);

    if (fg.scheme == FpScheme::central_crank_nicolson) {
      double removed = 0.0, total = 0.0;
      for (double& v : q) {
        if (v < 0.0) {
          removed -= v;
          v = 0.0;
        }
        total += v;
      }
      if (removed > 0.0) {
        sol.clamped_mass += removed * h;
        const double scale = mass / (total * h);
        for (double& v : q) v *= scale;
      }
    }

    double new_mass = 0.0;
    for (double v : q) {
      if (!std::isfinite(v)) throw NumericalFailure("Fokker-Planck solve produced non-finite values");
      new_mass += v;
    }
    new_mass *= h;
    if (std::abs(new_mass - mass) > fg.mass_tol)
      throw NumericalFailure("mass drifted by " + std::to_string(new_mass - mass) + " in one step");
    mass = new_mass;
    sol.mass_log.push_back(mass);

    const double wall = (q.front() + q.back()) * h;
    sol.max_boundary_mass = std::max(sol.max_boundary_mass, wall);
    if (fg.fail_on_boundary_mass && wall > fg.boundary_tol)
      throw NumericalFailure("mass " + std::to_string(wall) + " reached the grid walls at t = " +
                             std::to_string(t_next) + "; widen the grid");

    while (next_out < out_steps.size() && out_steps[next_out] == k + 1) {
      emit(k + 1);
      ++next_out;
    }
  }
  return sol;
}

/// Autonomous equation with total noise variance D = sigma^2 + eta^2 and no
/// common path; its equilibrium is the stationary law of the SDE.
inline FpSolution autonomous_solve(const GridDensity& q0, const Potential& pot, double noise_variance,
                                   double t0, double t1, const FpGrid& fg,
                                   std::span<const double> output_times = {},
                                   const FpObserver& observer = {}, bool store_snapshots = true) {
  if (!(noise_variance >= 0.0)) throw InvalidParameter("noise variance must be non-negative");
  const auto spec = SdeSpec::scalar(pot, std::sqrt(noise_variance), 0.0);
  const auto zero = BrownianPath::zero(std::min(t0, 0.0), std::max(t1, 0.0) + 1.0, 1.0);
  return solve_nonautonomous(q0, spec, zero, t0, t1, fg, output_times, observer, store_snapshots);
}

/// Time integral over the run of the annulus integral of |V'(x)| / |x| p
/// over N < |x| < 2N, with 2N the largest radius inside every snapshot's
/// window. Trapezoid rule over snapshot times.
inline double check_wic(const FpSolution& sol, const Potential& pot) {
  if (sol.snapshots.empty()) return 0.0;
  double radius = std::numeric_limits<double>::infinity();
  for (const auto& s : sol.snapshots) radius = std::min({radius, -s.grid().x_min, s.grid().x_max});
  if (!(radius > 0.0)) return 0.0;
  const double N = 0.5 * radius;
  auto annulus = [&](const GridDensity& p) {
    double acc = 0.0;
    const auto& g = p.grid();
    for (std::size_t i = 0; i < p.size(); ++i) {
      // Exact overlap of the cell with the annulus; integrand at the centre.
      const double lo = g.edge(i), hi = g.edge(i + 1);
      double overlap = 0.0;
      overlap += std::max(0.0, std::min(hi, 2.0 * N) - std::max(lo, N));
      overlap += std::max(0.0, std::min(hi, -N) - std::max(lo, -2.0 * N));
      if (overlap <= 0.0 || p.values()[i] == 0.0) continue;
      const double x = g.center(i);
      acc += std::abs(pot.derivative(x)) / std::abs(x) * p.values()[i] * overlap;
    }
    return acc;
  };
  if (sol.snapshots.size() == 1) return 0.0;
  double total = 0.0;
  double prev = annulus(sol.snapshots[0]);
  for (std::size_t k = 1; k < sol.snapshots.size(); ++k) {
    const double cur = annulus(sol.snapshots[k]);
    total += 0.5 * (prev + cur) * (sol.times[k] - sol.times[k - 1]);
    prev = cur;
  }
  return total;
}

/// L1 gap between one solve over [0, t_end] and the composition of a solve
/// over [0, t_mid] with a solve over [0, t_end - t_mid] along the path
/// shifted by t_mid. t_mid must lie on the path grid.
inline double cocycle_check(const SdeSpec& spec, const BrownianPath& beta, const GridDensity& q0, double t_mid,
                            double t_end, FpGrid fg) {
  if (!(t_mid >= 0.0 && t_mid <= t_end)) throw InvalidParameter("need 0 <= t_mid <= t_end");
  fg.track_window = false;
  const auto direct = solve_nonautonomous(q0, spec, beta, 0.0, t_end, fg);
  const auto first = solve_nonautonomous(q0, spec, beta, 0.0, t_mid, fg);
  const auto shifted = wiener_shift(beta, t_mid);
  const auto second = solve_nonautonomous(first.final_density(), spec, shifted, 0.0, t_end - t_mid, fg);
  return l1_distance(direct.final_density(), second.final_density());
}

}  // namespace cnpb
