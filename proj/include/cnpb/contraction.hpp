#pragma once

// Contraction profile of a 1D gradient diffusion in the norm |x| / sigma:
//   k(r)   = inf over |x - y| = sigma r of 2 (V'(x) - V'(y)) / (sigma r)
//   phi(r) = exp(-1/4 int_0^r s k^-(s) ds),  Phi = int phi
//   R0     = inf{R : k >= 0 on [R, inf)}
//   R1     = inf{R >= R0 : k(r) R (R - R0) >= 8 for all r >= R}
//   c      = 1 / int_0^R1 Phi / phi          (alpha = 1 in 1D)
//   g      = 1 - int_0^r Phi / (2 phi) * c on [0, R1], 1/2 beyond
//   f      = int phi g
// and a check of the resulting W1 envelope on paired particle runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cnpb/density.hpp"
#include "cnpb/error.hpp"
#include "cnpb/noise.hpp"
#include "cnpb/potential.hpp"
#include "cnpb/profile.hpp"
#include "cnpb/sde.hpp"

namespace cnpb {

struct KSearch {
  double value = 0.0;
  double argmin_m = 0.0;
  bool at_boundary = false;
};

namespace detail {

inline double golden_min(auto&& f, double lo, double hi, int iters = 80) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double m1 = hi - inv_phi * (hi - lo), m2 = lo + inv_phi * (hi - lo);
  double f1 = f(m1), f2 = f(m2);
  for (int it = 0; it < iters; ++it) {
    if (f1 < f2) {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - inv_phi * (hi - lo);
      f1 = f(m1);
    } else {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + inv_phi * (hi - lo);
      f2 = f(m2);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// k at one r > 0: grid search over midpoints m in [-M, M], golden-section
/// polish around the best node. The window is doubled (up to 4 times) while
/// the minimum sits on its edge.
inline KSearch k_at(const Potential& pot, double sigma, double r, double M, std::size_t points = 20001) {
  if (!(r > 0.0)) throw InvalidParameter("k is evaluated at r > 0");
  if (!(sigma > 0.0)) throw InvalidParameter("sigma must be positive");
  const double half = 0.5 * sigma * r;
  const double scale = 2.0 / (sigma * r);
  auto q = [&](double m) { return scale * (pot.derivative(m + half) - pot.derivative(m - half)); };
  KSearch out;
  for (int widen = 0; widen < 5; ++widen) {
    const double step = 2.0 * M / static_cast<double>(points - 1);
    std::size_t best_i = 0;
    double best = q(-M);
    double interior = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < points; ++i) {
      const double v = q(-M + step * static_cast<double>(i));
      if (i + 1 < points) interior = std::min(interior, v);
      if (v < best) {
        best = v;
        best_i = i;
      }
    }
    const double m0 = -M + step * static_cast<double>(best_i);
    const double m = detail::golden_min(q, m0 - step, m0 + step);
    out.value = std::min(best, q(m));
    out.argmin_m = q(m) < best ? m : m0;
    // A flat k (quadratic V) has its minimum everywhere; only an edge that
    // beats the interior beyond roundoff counts.
    out.at_boundary = (best_i == 0 || best_i + 1 == points) &&
                      best < interior - 1e-12 * std::max(1.0, std::abs(interior));
    if (!out.at_boundary) return out;
    M *= 2.0;
  }
  return out;
}

inline double default_search_window(const Potential& pot) {
  return 3.0 * (convexity_radius(pot) + 1.0);
}

inline std::vector<double> compute_k(const Potential& pot, double sigma, std::span<const double> r_grid) {
  const double M = default_search_window(pot);
  std::vector<double> k(r_grid.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > prev) && i > 0) throw InvalidParameter("r grid must be increasing");
    prev = r_grid[i];
    const auto res = k_at(pot, sigma, r_grid[i], M);
    if (res.at_boundary)
      throw NumericalFailure("infimum for k(" + std::to_string(r_grid[i]) + ") stays on the search boundary");
    k[i] = res.value;
  }
  return k;
}

/// Limit of k as r -> 0: twice the infimum of V''.
inline double k_at_zero(const Potential& pot) {
  const double M = default_search_window(pot);
  auto v2 = [&](double x) { return pot.second_derivative(x); };
  double best = std::numeric_limits<double>::infinity();
  double best_x = 0.0;
  const std::size_t points = 20001;
  const double step = 2.0 * M / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = -M + step * static_cast<double>(i);
    if (v2(x) < best) {
      best = v2(x);
      best_x = x;
    }
  }
  return 2.0 * std::min(best, v2(detail::golden_min(v2, best_x - step, best_x + step)));
}

struct ProfileOptions {
  std::size_t n_log = 4000;
  double r_min = 1e-3;
  std::string id;
};

namespace detail {

inline double bisect(auto&& pred, double lo, double hi) {
  // pred(lo) false, pred(hi) true.
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (pred(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace detail

inline ContractionProfile build_profile(const Potential& pot, double sigma, const ProfileOptions& opt = {}) {
  if (!(sigma > 0.0)) throw InvalidParameter("contraction profile needs sigma > 0");
  const double M = default_search_window(pot);
  auto k = [&](double r) { return r > 0.0 ? k_at(pot, sigma, r, M).value : k_at_zero(pot); };

  // Coarse scan for the sign structure and the tail.
  double r_max = 1.0;
  while (r_max < 1e6 && !(k(r_max) > 0.0 && k(r_max) * r_max * r_max >= 32.0)) r_max *= 2.0;
  if (!(k(r_max) > 0.0)) throw NumericalFailure("k has no positive tail; no finite R1");
  const std::size_t n_scan = 2001;
  std::vector<double> scan_r(n_scan), scan_k(n_scan);
  for (std::size_t i = 0; i < n_scan; ++i) {
    scan_r[i] = r_max * static_cast<double>(i) / static_cast<double>(n_scan - 1);
    scan_k[i] = k(scan_r[i]);
  }
  // tail_min[i] = min of k over scan points >= i.
  std::vector<double> tail_min(n_scan);
  tail_min[n_scan - 1] = scan_k[n_scan - 1];
  for (std::size_t i = n_scan - 1; i-- > 0;) tail_min[i] = std::min(scan_k[i], tail_min[i + 1]);
  if (!(tail_min.back() > 0.0)) throw NumericalFailure("k tail is not positive; no finite R1");
  auto k_inf_from = [&](double R) {
    const auto it = std::upper_bound(scan_r.begin(), scan_r.end(), R);
    const auto i = static_cast<std::size_t>(it - scan_r.begin());
    return std::min(k(R), i < n_scan ? tail_min[i] : std::numeric_limits<double>::infinity());
  };

  double R0 = 0.0;
  {
    std::size_t last_neg = n_scan;
    for (std::size_t i = 0; i < n_scan; ++i)
      if (scan_k[i] < 0.0) last_neg = i;
    if (last_neg != n_scan) {
      if (last_neg + 1 >= n_scan) throw NumericalFailure("k negative at the end of the scan");
      R0 = detail::bisect([&](double r) { return k(r) >= 0.0; }, scan_r[last_neg], scan_r[last_neg + 1]);
    }
  }
  auto r1_pred = [&](double R) { return k_inf_from(R) * R * (R - R0) >= 8.0; };
  double hi = std::max(R0, 1e-12) * 2.0 + 1.0;
  while (!r1_pred(hi)) hi *= 2.0;
  const double R1 = detail::bisect(r1_pred, R0, hi);

  // Table grid: 0, a log grid from r_min to 4 R1, plus R0 and R1 themselves.
  ContractionProfile p;
  p.id = opt.id.empty() ? std::string(to_string(pot.kind())) + "_sigma" + std::to_string(sigma) : opt.id;
  p.sigma = sigma;
  p.R0 = R0;
  p.R1 = R1;
  auto& r = p.r_grid;
  r.push_back(0.0);
  const double r_top = 4.0 * std::max(R1, 1e-2);
  const double ratio = std::log(r_top / opt.r_min) / static_cast<double>(opt.n_log - 1);
  for (std::size_t i = 0; i < opt.n_log; ++i) r.push_back(opt.r_min * std::exp(ratio * static_cast<double>(i)));
  if (R0 > 0.0) r.push_back(R0);
  r.push_back(R1);
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end(), [](double x, double y) { return std::abs(x - y) < 1e-13; }), r.end());
  const std::size_t n = r.size();

  p.k_values.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.k_values[i] = k(r[i]);

  // log phi: trapezoid on s k^-(s); zero contribution beyond R0.
  p.phi.assign(n, 1.0);
  double log_phi = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    auto integrand = [&](std::size_t j) {
      return r[j] > R0 ? 0.0 : r[j] * std::max(-p.k_values[j], 0.0);
    };
    if (r[i - 1] < R0) log_phi -= 0.25 * 0.5 * (integrand(i - 1) + integrand(i)) * (r[i] - r[i - 1]);
    p.phi[i] = std::exp(log_phi);
  }
  p.Phi.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) p.Phi[i] = p.Phi[i - 1] + 0.5 * (p.phi[i - 1] + p.phi[i]) * (r[i] - r[i - 1]);

  // I = int_0^R1 Phi / phi, and the running integral for g.
  std::vector<double> J(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    J[i] = J[i - 1] + 0.5 * (p.Phi[i - 1] / p.phi[i - 1] + p.Phi[i] / p.phi[i]) * (r[i] - r[i - 1]);
  const auto i_r1 = static_cast<std::size_t>(std::lower_bound(r.begin(), r.end(), R1 - 1e-13) - r.begin());
  const double I = J[i_r1];
  if (!(I > 0.0)) throw NumericalFailure("degenerate contraction integral");
  p.alpha = 1.0;
  p.c = 1.0 / (p.alpha * I);

  p.g.resize(n);
  p.f_prime.resize(n);
  p.f.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = i <= i_r1 ? 1.0 - 0.5 * J[i] / I : 0.5;
    p.g[i] = std::clamp(gi, 0.5, 1.0);
    p.f_prime[i] = p.phi[i] * p.g[i];
    if (i > 0) p.f[i] = p.f[i - 1] + 0.5 * (p.f_prime[i - 1] + p.f_prime[i]) * (r[i] - r[i - 1]);
  }
  p.validate();
  return p;
}

inline void write_profile_csv(const ContractionProfile& p, std::ostream& os) {
  os << "schema_version,r,k,phi,Phi,g,f\n";
  os.precision(17);
  for (std::size_t i = 0; i < p.size(); ++i)
    os << csv_schema_version << ',' << p.r_grid[i] << ',' << p.k_values[i] << ',' << p.phi[i] << ','
       << p.Phi[i] << ',' << p.g[i] << ',' << p.f[i] << '\n';
}

struct ContractionCheck {
  double t = 0.0;
  double w1_sigma = 0.0;
  double bound = 0.0;
  bool ok = false;
};

struct ContractionReport {
  double w1_sigma_0 = 0.0;
  double K = 0.0;
  double c = 0.0;
  std::vector<ContractionCheck> checks;
  bool passed = false;
};

struct ContractionRun {
  std::size_t n_particles = 20000;
  std::uint64_t seed = 1;
  double slack = 1.1;
  double mc_allowance = 0.0;
  EngineOptions engine;
};

/// Evolves mu0 and nu0 along the same beta (independent intrinsic noise)
/// from time 0 and checks W1_sigma(t) <= slack K e^{-ct} W1_sigma(0) + allowance.
inline ContractionReport verify_contraction(const SdeSpec& spec, const BrownianPath& beta, const InitialLaw& mu0,
                                            const InitialLaw& nu0, const ContractionProfile& prof,
                                            std::vector<double> checkpoints, const ContractionRun& run = {}) {
  spec.require_1d();
  prof.validate();
  std::sort(checkpoints.begin(), checkpoints.end());
  auto mu = sample_initial(mu0, run.n_particles, 1, 0.0, mix_seed(run.seed, 1));
  auto nu = sample_initial(nu0, run.n_particles, 1, 0.0, mix_seed(run.seed, 2));
  const double s = spec.sigma1();
  ContractionReport rep;
  rep.K = prof.bridge_constant();
  rep.c = prof.c;
  rep.w1_sigma_0 = wasserstein1_samples(mu.positions, nu.positions) / s;
  rep.passed = true;
  for (double t : checkpoints) {
    evolve_in_place(mu, spec, beta, t, run.engine);
    evolve_in_place(nu, spec, beta, t, run.engine);
    ContractionCheck c;
    c.t = t;
    c.w1_sigma = wasserstein1_samples(mu.positions, nu.positions) / s;
    c.bound = run.slack * rep.K * std::exp(-prof.c * t) * rep.w1_sigma_0 + run.mc_allowance;
    c.ok = c.w1_sigma <= c.bound;
    rep.passed = rep.passed && c.ok;
    rep.checks.push_back(c);
  }
  return rep;
}

}  // namespace cnpb
