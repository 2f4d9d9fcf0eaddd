#pragma once

// Euler-Maruyama for dx = -grad V(x) dt + sigma dW + eta dB with one common
// path B shared by all particles and independent intrinsic noise W_i.
//
// Intrinsic increment of particle i at step k is normal number k*d + c of
// the stream (seed, intrinsic, i), where k = round((t + clock_offset) / dt)
// indexes the absolute step start time. Results therefore depend only on
// the seed, the path and dt, not on threads or on how a run is split.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cnpb/density.hpp"
#include "cnpb/error.hpp"
#include "cnpb/gibbs.hpp"
#include "cnpb/noise.hpp"
#include "cnpb/parallel.hpp"
#include "cnpb/potential.hpp"
#include "cnpb/random.hpp"

namespace cnpb {

struct SdeSpec {
  Potential potential = Potential::quadratic(1.0);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(1, 1);

  SdeSpec() = default;
  SdeSpec(Potential pot, Eigen::MatrixXd s, Eigen::MatrixXd e)
      : potential(std::move(pot)), sigma(std::move(s)), eta(std::move(e)) {
    validate();
  }

  static SdeSpec scalar(Potential pot, double s, double e) {
    return {std::move(pot), Eigen::MatrixXd::Constant(1, 1, s), Eigen::MatrixXd::Constant(1, 1, e)};
  }
  static SdeSpec isotropic(Potential pot, double s, double e, std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    return {std::move(pot), s * Eigen::MatrixXd::Identity(n, n), e * Eigen::MatrixXd::Identity(n, n)};
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(sigma.rows()); }
  double sigma1() const { return sigma(0, 0); }
  double eta1() const { return eta(0, 0); }
  /// sigma^2 + eta^2 in 1D; the stationary law solves the autonomous
  /// equation with this total variance.
  double noise_variance() const { return sigma1() * sigma1() + eta1() * eta1(); }

  void require_1d() const {
    if (dim() != 1) throw InvalidParameter("this operation is one-dimensional");
  }

  /// sigma and eta must be symmetric positive semi-definite of equal size.
  void validate() const {
    auto check = [](const Eigen::MatrixXd& m, const char* name) {
      if (m.rows() == 0 || m.rows() != m.cols())
        throw InvalidParameter(std::string(name) + " must be a non-empty square matrix");
      if (!m.allFinite()) throw InvalidParameter(std::string(name) + " has non-finite entries");
      const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InvalidParameter(std::string(name) + " must be symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-12 * scale)
        throw InvalidParameter(std::string(name) + " must be positive semi-definite");
    };
    check(sigma, "sigma");
    check(eta, "eta");
    if (sigma.rows() != eta.rows()) throw InvalidParameter("sigma and eta differ in dimension");
    potential.check_dimension(dim());
  }
};

/// One Euler-Maruyama step; dW and dB are Brownian increments over dt.
inline std::vector<double> em_step(std::span<const double> x, const SdeSpec& spec,
                                   std::span<const double> dW, std::span<const double> dB,
                                   double dt) {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  const std::size_t d = spec.dim();
  if (x.size() != d || dW.size() != d || dB.size() != d)
    throw InvalidParameter("state and increments must match the dimension");
  std::vector<double> g(d);
  spec.potential.grad_into(x, g);
  std::vector<double> out(d);
  for (std::size_t r = 0; r < d; ++r) {
    double v = x[r] - g[r] * dt;
    for (std::size_t c = 0; c < d; ++c) {
      const auto ri = static_cast<Eigen::Index>(r), ci = static_cast<Eigen::Index>(c);
      v += spec.sigma(ri, ci) * dW[c] + spec.eta(ri, ci) * dB[c];
    }
    if (!std::isfinite(v)) throw NumericalFailure("Euler-Maruyama step produced a non-finite state");
    out[r] = v;
  }
  return out;
}

struct ParticleEnsemble {
  std::vector<double> positions;  // row-major, dim per particle
  std::size_t dim = 1;
  double time = 0.0;
  std::uint64_t master_seed = 0;
  // Absolute time = time + clock_offset; selects intrinsic stream blocks.
  double clock_offset = 0.0;

  std::size_t size() const noexcept { return positions.size() / dim; }
  std::span<const double> particle(std::size_t i) const {
    return {positions.data() + i * dim, dim};
  }
  std::vector<double> component(std::size_t c = 0) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = positions[i * dim + c];
    return out;
  }
  /// Moves the local time origin to s (used with a path shifted by s), so
  /// that later steps keep drawing the same intrinsic numbers.
  void reframe(double s) {
    time -= s;
    clock_offset += s;
  }
};

struct EngineOptions {
  double dt = 1e-3;
  int threads = 1;
  double blowup = 1e6;
};

namespace detail {

inline std::int64_t step_count(double t_from, double t_to, double dt) {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  if (t_to < t_from) throw InvalidParameter("cannot evolve backwards in time");
  const double steps = (t_to - t_from) / dt;
  const double n = std::round(steps);
  if (std::abs(steps - n) > 1e-6 * std::max(1.0, n))
    throw InvalidParameter("evolution interval is not a whole number of steps");
  return static_cast<std::int64_t>(n);
}

[[noreturn]] inline void blowup_failure(std::size_t i, double t) {
  throw NumericalFailure("particle " + std::to_string(i) + " blew up near t = " + std::to_string(t));
}

}  // namespace detail

/// Advances every particle from ens.time to t_to in place.
inline void evolve_in_place(ParticleEnsemble& ens, const SdeSpec& spec, const BrownianPath& path,
                            double t_to, const EngineOptions& opt = {}) {
  const std::size_t d = spec.dim();
  if (ens.dim != d || path.dim() != d) throw InvalidParameter("ensemble, path and spec dimensions differ");
  const double t_from = ens.time;
  const std::int64_t n = detail::step_count(t_from, t_to, opt.dt);
  if (n == 0) return;
  if (!path.covers(t_from, t_to))
    throw WindowError("common path does not cover [" + std::to_string(t_from) + ", " +
                      std::to_string(t_to) + "]");
  const double dt = opt.dt;

  // eta * dB for every step, shared by all particles.
  std::vector<double> edB(static_cast<std::size_t>(n) * d);
  {
    std::vector<double> prev(d), next(d);
    for (std::size_t c = 0; c < d; ++c) prev[c] = path.value_at(t_from, c);
    for (std::int64_t k = 0; k < n; ++k) {
      const double t1 = k + 1 == n ? t_to : t_from + static_cast<double>(k + 1) * dt;
      for (std::size_t c = 0; c < d; ++c) next[c] = path.value_at(t1, c);
      for (std::size_t r = 0; r < d; ++r) {
        double v = 0.0;
        for (std::size_t c = 0; c < d; ++c)
          v += spec.eta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * (next[c] - prev[c]);
        edB[static_cast<std::size_t>(k) * d + r] = v;
      }
      prev = next;
    }
  }

  const auto g0 = static_cast<std::int64_t>(std::llround((t_from + ens.clock_offset) / dt));
  const double sqdt = std::sqrt(dt);
  const bool has_intrinsic = spec.sigma.cwiseAbs().maxCoeff() > 0.0;
  const std::uint64_t seed = ens.master_seed;
  const double bound = opt.blowup;
  const Potential& pot = spec.potential;
  double* pos = ens.positions.data();

  if (d == 1) {
    // Particles advance in groups of G so that independent dependency
    // chains interleave; each particle still sees exactly its own stream.
    constexpr std::size_t G = 8;
    const double s = spec.sigma1() * sqdt;
    parallel_for(ens.size(), opt.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i0 = lo; i0 < hi; i0 += G) {
        const std::size_t m = std::min(G, hi - i0);
        std::array<double, G> x{};
        std::array<std::array<double, 4>, G> z{};
        for (std::size_t l = 0; l < m; ++l) x[l] = pos[i0 + l];
        std::int64_t idx = g0;
        std::int64_t block = std::numeric_limits<std::int64_t>::min();
        for (std::int64_t k = 0; k < n; ++k, ++idx) {
          const double common = edB[static_cast<std::size_t>(k)];
          if (has_intrinsic && (idx >> 2) != block) {
            block = idx >> 2;
            for (std::size_t l = 0; l < m; ++l) z[l] = normal_block({seed, StreamRole::intrinsic, i0 + l, block});
          }
          const auto lane = static_cast<std::size_t>(idx & 3);
          bool bad = false;
          for (std::size_t l = 0; l < m; ++l) {
            const double noise = has_intrinsic ? common + s * z[l][lane] : common;
            x[l] = x[l] - pot.derivative(x[l]) * dt + noise;
            bad |= !(std::abs(x[l]) <= bound);
          }
          if (bad)
            for (std::size_t l = 0; l < m; ++l)
              if (!(std::abs(x[l]) <= bound)) detail::blowup_failure(i0 + l, t_from + static_cast<double>(k + 1) * dt);
        }
        for (std::size_t l = 0; l < m; ++l) pos[i0 + l] = x[l];
      }
    });
  } else {
    parallel_for(ens.size(), opt.threads, [&](std::size_t lo, std::size_t hi) {
      std::vector<double> grad(d), w(d);
      for (std::size_t i = lo; i < hi; ++i) {
        std::span<double> x(pos + i * d, d);
        for (std::int64_t k = 0; k < n; ++k) {
          pot.grad_into(x, grad);
          if (has_intrinsic) {
            const std::int64_t base = (g0 + k) * static_cast<std::int64_t>(d);
            for (std::size_t c = 0; c < d; ++c)
              w[c] = sqdt * stream_normal(seed, StreamRole::intrinsic, i, base + static_cast<std::int64_t>(c));
          }
          for (std::size_t r = 0; r < d; ++r) {
            double v = x[r] - grad[r] * dt + edB[static_cast<std::size_t>(k) * d + r];
            if (has_intrinsic)
              for (std::size_t c = 0; c < d; ++c)
                v += spec.sigma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * w[c];
            x[r] = v;
          }
          for (std::size_t r = 0; r < d; ++r)
            if (!(std::abs(x[r]) <= bound)) detail::blowup_failure(i, t_from + static_cast<double>(k + 1) * dt);
        }
      }
    });
  }
  ens.time = t_to;
}

inline ParticleEnsemble evolve_ensemble(ParticleEnsemble ens, const SdeSpec& spec,
                                        const BrownianPath& path, double t_to,
                                        const EngineOptions& opt = {}) {
  evolve_in_place(ens, spec, path, t_to, opt);
  return ens;
}

// ------------------------------------------------------------ initial laws

struct Dirac {
  std::vector<double> x{0.0};
};
struct GaussianLaw {
  double mean = 0.0;
  double variance = 1.0;  // per component, isotropic
};
using InitialLaw = std::variant<Dirac, GaussianLaw, GridDensity>;

/// Draws N particles at time t0. Particle i uses only the stream
/// (seed, initial, i), so its position does not depend on N or threads.
inline ParticleEnsemble sample_initial(const InitialLaw& law, std::size_t n, std::size_t d, double t0,
                                       std::uint64_t seed) {
  if (n == 0) throw InvalidParameter("ensemble needs at least one particle");
  ParticleEnsemble ens;
  ens.dim = d;
  ens.time = t0;
  ens.master_seed = seed;
  ens.positions.assign(n * d, 0.0);
  if (const auto* dirac = std::get_if<Dirac>(&law)) {
    if (dirac->x.size() != d) throw InvalidParameter("Dirac location has the wrong dimension");
    for (std::size_t i = 0; i < n; ++i) std::copy(dirac->x.begin(), dirac->x.end(), ens.positions.begin() + static_cast<std::ptrdiff_t>(i * d));
  } else if (const auto* g = std::get_if<GaussianLaw>(&law)) {
    if (g->variance < 0.0) throw InvalidParameter("initial variance must be non-negative");
    const double sd = std::sqrt(g->variance);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c)
        ens.positions[i * d + c] =
            g->mean + sd * stream_normal(seed, StreamRole::initial, i, static_cast<std::int64_t>(c));
  } else {
    const auto& dens = std::get<GridDensity>(law);
    if (d != 1) throw InvalidParameter("grid initial densities are one-dimensional");
    const auto F = dens.cdf();
    const double total = F.back();
    for (std::size_t i = 0; i < n; ++i) {
      const double u = total * to_unit_open(random_block({seed, StreamRole::initial, i, 0})[0]);
      auto it = std::upper_bound(F.begin() + 1, F.end(), u);
      auto j = static_cast<std::size_t>(it - F.begin()) - 1;
      j = std::min(j, dens.size() - 1);
      const double w = F[j + 1] > F[j] ? (u - F[j]) / (F[j + 1] - F[j]) : 0.5;
      ens.positions[i] = dens.grid().edge(j) + dens.dx() * std::clamp(w, 0.0, 1.0);
    }
  }
  return ens;
}

// ----------------------------------------------------------------- pullback

/// Standard deviation of the stationary law exp(-2V/(sigma^2+eta^2)) in 1D.
inline double stationary_std(const SdeSpec& spec) {
  spec.require_1d();
  const double D = spec.noise_variance();
  if (D <= 0.0) {
    double r = 1.0;
    for (double x : poly::real_roots(poly::derivative(spec.potential.coefficients())))
      r = std::max(r, std::abs(x));
    return r / 3.0;
  }
  return std::sqrt(gibbs_moments(spec.potential, D).variance);
}

/// [-L, L] with L = 6 stationary standard deviations, 1024 cells.
inline GridSpec default_density_grid(const SdeSpec& spec, std::size_t n_cells = 1024) {
  return GridSpec::symmetric(6.0 * stationary_std(spec), n_cells);
}

/// Particles drawn from p0 at time -tau and evolved to 0 along beta.
inline ParticleEnsemble pullback_ensemble(const InitialLaw& p0, const SdeSpec& spec,
                                          const BrownianPath& beta, double tau, std::size_t n,
                                          std::uint64_t seed, const EngineOptions& opt = {}) {
  if (tau < 0.0) throw InvalidParameter("tau must be non-negative");
  auto ens = sample_initial(p0, n, spec.dim(), -tau, seed);
  evolve_in_place(ens, spec, beta, 0.0, opt);
  return ens;
}

inline GridDensity pullback_evolve(const InitialLaw& p0, const SdeSpec& spec, const BrownianPath& beta,
                                   double tau, std::size_t n, std::uint64_t seed, const GridSpec& grid,
                                   const EngineOptions& opt = {},
                                   const DensityEstimator& est = Histogram{}) {
  spec.require_1d();
  const auto ens = pullback_ensemble(p0, spec, beta, tau, n, seed, opt);
  return from_particles(ens.positions, grid, est);
}

struct PullbackConvergence {
  bool converged = false;
  double tau_star = 0.0;
  GridDensity density;
  std::vector<double> taus;
  std::vector<double> l1_to_previous;  // entry k compares taus[k] with taus[k-1]; entry 0 is NaN
};

/// Doubles tau from 1 until successive pullback densities are within tol
/// in L1, or tau exceeds tau_cap. Uses the same seed at every tau, so the
/// noise on the common part of the windows is shared.
inline PullbackConvergence pullback_converged(const SdeSpec& spec, BrownianPath beta, const InitialLaw& p0,
                                              std::size_t n, std::uint64_t seed, double tol,
                                              const GridSpec& grid, const EngineOptions& opt = {},
                                              double tau_cap = 1024.0) {
  if (!(tol > 0.0)) throw InvalidParameter("tolerance must be positive");
  PullbackConvergence out;
  std::optional<GridDensity> prev;
  for (double tau = 1.0; tau <= tau_cap; tau *= 2.0) {
    if (!beta.covers(-tau, 0.0)) beta = ensure_window(beta, -tau, beta.t_end());
    auto dens = pullback_evolve(p0, spec, beta, tau, n, seed, grid, opt);
    out.taus.push_back(tau);
    out.l1_to_previous.push_back(prev ? l1_distance(*prev, dens) : std::numeric_limits<double>::quiet_NaN());
    out.tau_star = tau;
    out.density = dens;
    if (prev && out.l1_to_previous.back() < tol) {
      out.converged = true;
      return out;
    }
    prev = std::move(dens);
  }
  return out;
}

inline void write_ensemble_csv(const ParticleEnsemble& ens, std::ostream& os) {
  os << "schema_version,particle_id";
  for (std::size_t c = 0; c < ens.dim; ++c) os << ",x" << c;
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    os << csv_schema_version << ',' << i;
    for (std::size_t c = 0; c < ens.dim; ++c) os << ',' << ens.positions[i * ens.dim + c];
    os << '\n';
  }
}

}  // namespace cnpb
