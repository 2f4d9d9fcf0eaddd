#pragma once

// Time averages of density observables along one long common path, and
// averages of the same observable over pullback densities of many
// independent paths. For an ergodic system the two agree.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "cnpb/contraction.hpp"
#include "cnpb/density.hpp"
#include "cnpb/error.hpp"
#include "cnpb/fokker_planck.hpp"
#include "cnpb/noise.hpp"
#include "cnpb/parallel.hpp"
#include "cnpb/sde.hpp"

namespace cnpb {

enum class ObservableKind { variance, mean, moment, constant };

/// g(p): variance, mean, the raw moment E[x^order], or the constant 1.
struct Observable {
  ObservableKind kind = ObservableKind::variance;
  int order = 2;

  static Observable variance() { return {ObservableKind::variance, 2}; }
  static Observable mean() { return {ObservableKind::mean, 1}; }
  static Observable moment(int k) { return {ObservableKind::moment, k}; }
  static Observable constant() { return {ObservableKind::constant, 0}; }

  std::string name() const {
    switch (kind) {
      case ObservableKind::variance: return "variance";
      case ObservableKind::mean: return "mean";
      case ObservableKind::moment: return "moment" + std::to_string(order);
      case ObservableKind::constant: return "constant";
    }
    return "unknown";
  }

  static Observable from_string(const std::string& s) {
    if (s == "variance") return variance();
    if (s == "mean") return mean();
    if (s == "constant") return constant();
    if (s.rfind("moment", 0) == 0 && s.size() > 6) return moment(std::stoi(s.substr(6)));
    throw InvalidParameter("unknown observable '" + s + "'");
  }

  double operator()(const GridDensity& p) const {
    switch (kind) {
      case ObservableKind::variance: return cnpb::variance(p);
      case ObservableKind::mean: return cnpb::mean(p);
      case ObservableKind::moment: {
        const int k = order;
        return expectation(p, [k](double x) { return std::pow(x, k); }) / p.mass();
      }
      case ObservableKind::constant: return 1.0;
    }
    return 0.0;
  }
};

struct ObservableSeries {
  std::string observable_name;
  double burn_in = 0.0;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> running_average;  // NaN while times[j] <= burn_in
  std::optional<GridDensity> final_density;

  double final_average() const {
    return running_average.empty() ? std::numeric_limits<double>::quiet_NaN() : running_average.back();
  }

  /// Values with times in (burn_in, end].
  std::vector<double> post_burn_in() const {
    std::vector<double> v;
    for (std::size_t j = 0; j < times.size(); ++j)
      if (times[j] > burn_in) v.push_back(values[j]);
    return v;
  }

  void push(double t, double v) {
    times.push_back(t);
    values.push_back(v);
    if (t > burn_in) {
      sum_ += v;
      ++count_;
    }
    running_average.push_back(count_ ? sum_ / static_cast<double>(count_)
                                     : std::numeric_limits<double>::quiet_NaN());
  }

 private:
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means.
inline double batch_means_se(const std::vector<double>& v, std::size_t batches = 20) {
  if (v.size() < 2 * batches) throw InvalidParameter("series too short for batch means");
  const std::size_t len = v.size() / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < len; ++i) means[b] += v[b * len + i];
    means[b] /= static_cast<double>(len);
  }
  double m = 0.0;
  for (double x : means) m += x;
  m /= static_cast<double>(batches);
  double ss = 0.0;
  for (double x : means) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

enum class Backend { particle, fokker_planck };

inline Backend backend_from_string(std::string_view s) {
  if (s == "particle") return Backend::particle;
  if (s == "fokker_planck") return Backend::fokker_planck;
  throw InvalidParameter("unknown backend '" + std::string(s) + "'");
}

struct ErgodicOptions {
  Backend backend = Backend::particle;
  std::size_t n_particles = 100000;
  std::uint64_t seed = 1;
  EngineOptions engine;
  GridSpec grid;  // density read-out grid (particles) or solver grid (FP)
  double fp_dt = 1e-3;
};

/// Initial law as cell averages on a grid, for the FP backend.
inline GridDensity discretize(const InitialLaw& law, const GridSpec& grid) {
  if (const auto* d = std::get_if<Dirac>(&law)) return gaussian_density(grid, d->x.at(0), 0.0);
  if (const auto* g = std::get_if<GaussianLaw>(&law)) return gaussian_density(grid, g->mean, g->variance);
  const auto& p = std::get<GridDensity>(law);
  return p.grid().matches(grid) ? p : remap_conservative(p, grid);
}

/// Evolves p0 from t = 0 to T along beta and records g(p(t)) every dt_obs.
inline ObservableSeries time_average(const SdeSpec& spec, const BrownianPath& beta, const InitialLaw& p0,
                                     const Observable& g, double T, double burn_in, double dt_obs,
                                     const ErgodicOptions& opt) {
  spec.require_1d();
  if (!(T > burn_in) || burn_in < 0.0) throw InvalidParameter("need T > burn_in >= 0");
  if (!(dt_obs > 0.0)) throw InvalidParameter("observation step must be positive");
  const auto n_obs = detail::step_count(0.0, T, dt_obs);
  ObservableSeries s;
  s.observable_name = g.name();
  s.burn_in = burn_in;
  if (opt.backend == Backend::particle) {
    auto ens = sample_initial(p0, opt.n_particles, 1, 0.0, opt.seed);
    for (std::int64_t j = 1; j <= n_obs; ++j) {
      const double t = static_cast<double>(j) * dt_obs;
      evolve_in_place(ens, spec, beta, t, opt.engine);
      auto p = from_particles(ens.positions, opt.grid);
      s.push(t, g(p));
      if (j == n_obs) s.final_density = std::move(p);
    }
  } else {
    FpGrid fg;
    fg.space = opt.grid;
    fg.dt = opt.fp_dt;
    fg.track_window = true;
    std::vector<double> outs;
    for (std::int64_t j = 1; j <= n_obs; ++j) outs.push_back(static_cast<double>(j) * dt_obs);
    solve_nonautonomous(discretize(p0, opt.grid), spec, beta, 0.0, T, fg, outs,
                        [&](double t, const GridDensity& p) {
                          if (t > 0.0) s.push(t, g(p));
                          if (t == T) s.final_density = p;
                        },
                        false);
  }
  return s;
}

struct EnsembleEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<double> values;  // g(p_beta) per path, in path order
};

inline NoiseStreamKey beta_key(std::uint64_t seed, std::uint64_t path_index) {
  return {seed, StreamRole::common, path_index, 0};
}

/// g(p_beta) for n_paths independent paths (keys (seed, common, k)), each
/// approximated by a pullback over [-tau, 0] from p0.
inline EnsembleEstimate beta_ensemble_average(const SdeSpec& spec, const Observable& g, std::size_t n_paths,
                                              double tau, const InitialLaw& p0, const ErgodicOptions& opt,
                                              double path_dt = 1e-3) {
  spec.require_1d();
  if (n_paths < 2) throw InvalidParameter("need at least two paths");
  EnsembleEstimate out;
  out.values.resize(n_paths);
  auto one = [&](std::size_t k) {
    const auto beta = sample_path(beta_key(opt.seed, k), -tau, 0.0, path_dt);
    if (opt.backend == Backend::particle) {
      EngineOptions eo = opt.engine;
      eo.threads = 1;
      return g(pullback_evolve(p0, spec, beta, tau, opt.n_particles, mix_seed(opt.seed, k), opt.grid, eo));
    }
    FpGrid fg;
    fg.space = opt.grid;
    fg.dt = opt.fp_dt;
    fg.track_window = true;
    return g(solve_nonautonomous(discretize(p0, opt.grid), spec, beta, -tau, 0.0, fg).final_density());
  };
  // Paths are independent; each is computed single-threaded so the result
  // does not depend on the worker count.
  parallel_for(n_paths, opt.engine.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) out.values[k] = one(k);
  });
  double m = 0.0;
  for (double v : out.values) m += v;
  m /= static_cast<double>(n_paths);
  double ss = 0.0;
  for (double v : out.values) ss += (v - m) * (v - m);
  out.estimate = m;
  out.std_error = std::sqrt(ss / static_cast<double>(n_paths - 1) / static_cast<double>(n_paths));
  return out;
}

struct ErgodicReport {
  double time_average = 0.0;
  double time_std_error = 0.0;
  double ensemble_average = 0.0;
  double ensemble_std_error = 0.0;
  double z = 0.0;  // |difference| / combined standard error
  bool agree = false;
  ObservableSeries series;
  EnsembleEstimate ensemble;
};

inline ErgodicReport ergodic_consistency(const ObservableSeries& series, const EnsembleEstimate& ens,
                                         double n_se = 3.0) {
  ErgodicReport r;
  r.series = series;
  r.ensemble = ens;
  r.time_average = series.final_average();
  r.time_std_error = batch_means_se(series.post_burn_in());
  r.ensemble_average = ens.estimate;
  r.ensemble_std_error = ens.std_error;
  const double diff = std::abs(r.time_average - r.ensemble_average);
  const double se = std::hypot(r.time_std_error, r.ensemble_std_error);
  r.z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  r.agree = diff <= n_se * se;
  return r;
}

/// Runs both estimators: one path (key (seed, common, 2^40)) over [0, T],
/// and n_paths pullbacks over [-tau, 0].
inline ErgodicReport ergodic_consistency(const SdeSpec& spec, const Observable& g, double T, double burn_in,
                                         double dt_obs, std::size_t n_paths, double tau, const InitialLaw& p0,
                                         const ErgodicOptions& long_run, const ErgodicOptions& ensemble,
                                         double path_dt = 1e-3) {
  const auto beta = sample_path(beta_key(long_run.seed, std::uint64_t{1} << 40), 0.0, T, path_dt);
  const auto series = time_average(spec, beta, p0, g, T, burn_in, dt_obs, long_run);
  const auto ens = beta_ensemble_average(spec, g, n_paths, tau, p0, ensemble, path_dt);
  return ergodic_consistency(series, ens);
}

/// Ten relaxation times: 10 / c from a contraction profile when given,
/// otherwise 10 / V'' at the global minimum of V.
inline double default_burn_in(const Potential& pot, const ContractionProfile* prof = nullptr) {
  if (prof && prof->c > 0.0) return 10.0 / prof->c;
  double best_x = 0.0, best_v = pot.value(0.0);
  for (double x : poly::real_roots(poly::derivative(pot.coefficients())))
    if (pot.value(x) < best_v) {
      best_v = pot.value(x);
      best_x = x;
    }
  const double curv = pot.second_derivative(best_x);
  if (!(curv > 0.0)) throw NumericalFailure("potential minimum is degenerate");
  return 10.0 / curv;
}

inline void write_series_csv(const ObservableSeries& s, std::ostream& os) {
  os << "schema_version,t,value,running_average\n";
  os.precision(17);
  for (std::size_t j = 0; j < s.times.size(); ++j)
    os << csv_schema_version << ',' << s.times[j] << ',' << s.values[j] << ',' << s.running_average[j] << '\n';
}

}  // namespace cnpb
