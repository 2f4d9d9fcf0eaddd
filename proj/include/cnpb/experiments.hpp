#pragma once

// Experiment runners behind the CLI. Each writes manifest.json, its CSVs and
// summary.json into the output directory and returns the summary.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cnpb/config.hpp"
#include "cnpb/contraction.hpp"
#include "cnpb/density.hpp"
#include "cnpb/ergodic.hpp"
#include "cnpb/fokker_planck.hpp"
#include "cnpb/oracle_ou.hpp"
#include "cnpb/sde.hpp"

namespace cnpb {

class Summary {
 public:
  explicit Summary(const RunConfig& c) { j_["experiment"] = to_string(c.experiment); }

  void check(const std::string& name, double value, const std::string& op, double threshold) {
    bool ok = false;
    if (op == "<") ok = value < threshold;
    else if (op == "<=") ok = value <= threshold;
    else if (op == ">") ok = value > threshold;
    else if (op == ">=") ok = value >= threshold;
    j_["checks"].push_back({{"name", name}, {"value", value}, {"op", op}, {"threshold", threshold}, {"passed", ok}});
    passed_ = passed_ && ok;
  }
  void flag(const std::string& name, bool ok) {
    j_["checks"].push_back({{"name", name}, {"passed", ok}});
    passed_ = passed_ && ok;
  }
  json& results() { return j_["results"]; }
  bool passed() const { return passed_; }

  json finish() {
    if (!j_.contains("checks")) j_["checks"] = json::array();
    j_["passed"] = passed_;
    return j_;
  }

 private:
  json j_;
  bool passed_ = true;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}

inline void write_json(const std::filesystem::path& dir, const std::string& name, const json& j) {
  auto os = open_out(dir, name);
  os << j.dump(2) << '\n';
}

inline OuParams ou_params(const RunConfig& c) {
  if (c.potential != PotentialKind::quadratic)
    throw ConfigError("model.potential.kind: this check needs the quadratic potential");
  return {c.potential_params.at(0), c.sigma, c.eta};
}

}  // namespace detail

inline json run_pullback(const RunConfig& c, const std::filesystem::path& dir) {
  Summary sum(c);
  const auto spec = c.spec();
  const auto grid = c.grid(spec);
  const auto p0 = c.initial.law();
  auto beta = sample_path(beta_key(c.master_seed, 0), -c.tau, 0.0, c.path_dt);
  GridDensity dens;
  if (c.converge) {
    const auto rep = pullback_converged(spec, beta, p0, c.n_particles, c.master_seed, c.tol, grid, c.engine(),
                                        c.tau_cap);
    dens = rep.density;
    sum.results()["tau_star"] = rep.tau_star;
    sum.results()["taus"] = rep.taus;
    sum.results()["l1_to_previous"] = rep.l1_to_previous;
    sum.flag("pullback_converged", rep.converged);
    beta = ensure_window(beta, -rep.tau_star, 0.0);
  } else {
    dens = pullback_evolve(p0, spec, beta, c.tau, c.n_particles, c.master_seed, grid, c.engine());
  }
  sum.results()["mean"] = mean(dens);
  sum.results()["variance"] = variance(dens);
  {
    auto os = detail::open_out(dir, "density.csv");
    write_density_csv(dens, os);
  }
  {
    auto os = detail::open_out(dir, "beta.csv");
    write_path_csv(beta, os);
  }
  if (c.potential == PotentialKind::quadratic && c.sigma > 0.0) {
    const auto p = detail::ou_params(c);
    const double tau = c.converge ? sum.results()["tau_star"].get<double>() : c.tau;
    const auto oracle = ou_pullback_density(p, beta, grid, tau);
    const double target = c.sigma * c.sigma / (2.0 * p.a);
    sum.results()["oracle_mean"] = mean(oracle);
    sum.check("l1_to_oracle", l1_distance(dens, oracle), "<", 0.05);
    sum.check("variance_rel_error", std::abs(variance(dens) - target) / target, "<", 0.03);
    std::vector<GridDensity> both{dens, oracle};
    std::vector<std::string> names{"p", "p_oracle"};
    auto os = detail::open_out(dir, "density_vs_oracle.csv");
    write_densities_csv(both, os, names);
  }
  return sum.finish();
}

inline json run_fp_solve(const RunConfig& c, const std::filesystem::path& dir) {
  Summary sum(c);
  const auto spec = c.spec();
  const auto grid = c.grid(spec);
  const auto beta = sample_path(beta_key(c.master_seed, 0), std::min(c.t0, 0.0), std::max(c.t1, 0.0), c.path_dt);
  FpGrid fg;
  fg.space = grid;
  fg.dt = c.fp_dt;
  fg.scheme = c.scheme;
  fg.boundary_tol = c.boundary_tol;
  fg.track_window = c.track_window;
  std::vector<double> outs;
  for (double t = c.t0 + c.dt_obs; t < c.t1 - 1e-12; t += c.dt_obs) outs.push_back(t);
  const auto sol = solve_nonautonomous(discretize(c.initial.law(), grid), spec, beta, c.t0, c.t1, fg, outs);
  double max_step = 0.0, max_dev = 0.0;
  for (std::size_t k = 0; k < sol.mass_log.size(); ++k) {
    max_dev = std::max(max_dev, std::abs(sol.mass_log[k] - 1.0));
    if (k > 0) max_step = std::max(max_step, std::abs(sol.mass_log[k] - sol.mass_log[k - 1]));
  }
  sum.results()["steps"] = sol.steps;
  sum.results()["max_mass_deviation"] = max_dev;
  sum.results()["max_boundary_mass"] = sol.max_boundary_mass;
  sum.results()["dropped_mass"] = sol.dropped_mass;
  sum.results()["clamped_mass"] = sol.clamped_mass;
  sum.check("max_mass_change_per_step", max_step, "<", 1e-8);
  sum.check("wic", check_wic(sol, spec.potential), "<", 1e-6);
  {
    auto os = detail::open_out(dir, "density.csv");
    write_density_csv(sol.final_density(), os);
  }
  {
    auto os = detail::open_out(dir, "snapshots.csv");
    os << "schema_version,t,x,p\n";
    os.precision(17);
    for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
      const auto& s = sol.snapshots[k];
      for (std::size_t i = 0; i < s.size(); ++i)
        os << csv_schema_version << ',' << sol.times[k] << ',' << s.grid().center(i) << ',' << s.values()[i] << '\n';
    }
  }
  if (c.potential == PotentialKind::quadratic && c.sigma > 0.0 && c.initial.kind == "gaussian") {
    const auto p = detail::ou_params(c);
    const auto [m, v] = ou_propagate_gaussian(p, beta, c.t1, c.t0, c.initial.mean, c.initial.variance,
                                              StieltjesRule::piecewise_linear_exact);
    const auto exact = gaussian_density(sol.final_density().grid(), m, v);
    sum.check("l1_to_oracle", l1_distance(sol.final_density(), exact), "<", 5e-3);
  }
  return sum.finish();
}

inline json run_contraction(const RunConfig& c, const std::filesystem::path& dir) {
  Summary sum(c);
  const auto pot = c.make_potential();
  ProfileOptions po;
  po.n_log = c.n_log;
  const auto prof = build_profile(pot, c.sigma, po);
  {
    auto os = detail::open_out(dir, "profile.csv");
    write_profile_csv(prof, os);
  }
  sum.results()["constants"] = {{"R0", prof.R0}, {"R1", prof.R1}, {"alpha", prof.alpha}, {"c", prof.c},
                                {"phi_R0", prof.phi_R0()}, {"K", prof.bridge_constant()}};
  if (pot.kind() == PotentialKind::quadratic) {
    const double a = c.potential_params.at(0);
    double kdev = 0.0;
    for (double k : prof.k_values) kdev = std::max(kdev, std::abs(k - 2.0 * a));
    sum.check("k_minus_2a", kdev, "<", 1e-6);
    sum.check("R0_error", std::abs(prof.R0), "<", 1e-6);
    sum.check("R1_error", std::abs(prof.R1 - 2.0 / std::sqrt(a)), "<", 1e-6);
    sum.check("c_error", std::abs(prof.c - a / 2.0), "<", 1e-6);
  }
  if (c.n_seeds > 0 && !c.checkpoints.empty()) {
    const auto spec = c.spec();
    const double t_end = *std::max_element(c.checkpoints.begin(), c.checkpoints.end());
    auto os = detail::open_out(dir, "decay.csv");
    os << "schema_version,path,t,w1_sigma,bound,ok\n";
    os.precision(17);
    bool all = true;
    for (std::size_t s = 0; s < c.n_seeds; ++s) {
      const auto beta = sample_path(beta_key(c.master_seed, s), 0.0, t_end, c.path_dt);
      ContractionRun run;
      run.n_particles = c.n_particles;
      run.seed = mix_seed(c.master_seed, s);
      run.engine = c.engine();
      const auto rep = verify_contraction(spec, beta, Dirac{{c.x_mu}}, Dirac{{c.x_nu}}, prof, c.checkpoints, run);
      os << csv_schema_version << ',' << s << ',' << 0 << ',' << rep.w1_sigma_0 << ',' << rep.w1_sigma_0 << ",1\n";
      for (const auto& ch : rep.checks)
        os << csv_schema_version << ',' << s << ',' << ch.t << ',' << ch.w1_sigma << ',' << ch.bound << ','
           << (ch.ok ? 1 : 0) << '\n';
      all = all && rep.passed;
    }
    sum.flag("decay_envelope", all);
  }
  return sum.finish();
}

/// Reference values for the three synchronization cases.
inline double figure1_reference(std::size_t k) {
  static constexpr double ref[] = {0.04, 0.53, 0.90};
  return k < 3 ? ref[k] : std::numeric_limits<double>::quiet_NaN();
}

inline json run_figure1(const RunConfig& c, const std::filesystem::path& dir) {
  Summary sum(c);
  json table = json::array();
  const bool default_cases = c.etas.size() == 3 && std::abs(c.total_variance - 1.0) < 1e-12 &&
                             c.potential == PotentialKind::double_well && c.potential_params.at(0) == 1.0;
  for (std::size_t k = 0; k < c.etas.size(); ++k) {
    const double eta = c.etas[k];
    const double sigma = std::sqrt(c.total_variance - eta * eta);
    const auto spec = SdeSpec::scalar(c.make_potential(), sigma, eta);
    const auto grid = c.grid(spec);
    const auto beta = sample_path(beta_key(c.master_seed, k), 0.0, c.T, c.path_dt);
    ErgodicOptions opt;
    opt.backend = c.backend;
    opt.n_particles = c.n_particles;
    opt.seed = mix_seed(c.master_seed, k);
    opt.engine = c.engine();
    opt.grid = grid;
    opt.fp_dt = c.fp_dt;
    const auto series = time_average(spec, beta, c.initial.law(), Observable::variance(), c.T, c.burn_in, c.dt_obs, opt);
    const double avg = series.final_average();
    const double se = batch_means_se(series.post_burn_in());
    json row = {{"case", k}, {"eta", eta}, {"sigma", sigma}, {"time_average_variance", avg}, {"batch_se", se}};
    if (default_cases) {
      row["reference"] = figure1_reference(k);
      sum.check("case" + std::to_string(k) + "_abs_error", std::abs(avg - figure1_reference(k)), "<=", 0.05);
    }
    table.push_back(row);
    {
      auto os = detail::open_out(dir, "series_case" + std::to_string(k) + ".csv");
      write_series_csv(series, os);
    }
    {
      // Solver snapshots sit on windows shifted by the path; use that grid.
      const auto& last = *series.final_density;
      const auto stat = gibbs_density(spec.potential, c.total_variance, last.grid());
      std::vector<GridDensity> ds{last, stat};
      std::vector<std::string> names{"p_t_end", "p_stationary"};
      auto os = detail::open_out(dir, "density_case" + std::to_string(k) + ".csv");
      write_densities_csv(ds, os, names);
    }
  }
  sum.results()["table"] = table;
  return sum.finish();
}

inline json run_ou_validate(const RunConfig& c, const std::filesystem::path& dir) {
  Summary sum(c);
  const auto p = detail::ou_params(c);
  const auto spec = c.spec();
  const auto grid = c.grid(spec);

  // Engine pullback vs closed form.
  const auto beta = sample_path(beta_key(c.master_seed, 0), -c.tau, 1.0, c.path_dt);
  const auto dens = pullback_evolve(Dirac{{0.0}}, spec, beta, c.tau, c.n_particles, c.master_seed, grid, c.engine());
  const auto oracle = ou_pullback_density(p, beta, grid, c.tau);
  const double target = c.sigma * c.sigma / (2.0 * p.a);
  sum.check("engine_pullback_l1", l1_distance(dens, oracle), "<", 0.05);
  sum.check("engine_pullback_variance_rel_error", std::abs(variance(dens) - target) / target, "<", 0.03);

  // Solver vs transition law on [0.1, 1], started from the exact law at 0.1.
  {
    const double x0 = 0.5, s = 0.1;
    const auto [m0, v0] = ou_propagate_gaussian(p, beta, s, 0.0, x0, 0.0, StieltjesRule::piecewise_linear_exact);
    const double L = 6.0 * std::sqrt((c.sigma * c.sigma + c.eta * c.eta) / (2.0 * p.a)) + 1.0;
    const GridSpec g(-L, L, static_cast<std::size_t>(std::llround(2.0 * L / 0.01)));
    FpGrid fg;
    fg.dt = 1e-4;
    const auto sol = solve_nonautonomous(gaussian_density(g, m0, v0), spec, beta, s, 1.0, fg);
    const auto [m1, v1] = ou_propagate_gaussian(p, beta, 1.0, 0.0, x0, 0.0, StieltjesRule::piecewise_linear_exact);
    sum.check("solver_transition_l1", l1_distance(sol.final_density(), gaussian_density(sol.final_density().grid(), m1, v1)),
              "<", 5e-3);
  }

  // Autonomous solve relaxes to the stationary law.
  {
    FpGrid fg;
    fg.dt = 1e-3;
    const auto sol = autonomous_solve(gaussian_density(grid, 1.0, 0.1), spec.potential, spec.noise_variance(), 0.0,
                                      20.0 / p.a, fg);
    sum.check("autonomous_stationary_l1", l1_distance(sol.final_density(), ou_stationary_density(p, grid)), "<", 1e-3);
  }

  // Average of pullback densities over independent paths.
  {
    std::vector<double> acc(grid.n_cells, 0.0);
    const std::size_t n = std::max<std::size_t>(c.n_paths, 500);
    const double tau = default_truncation_tau(p);
    for (std::size_t k = 0; k < n; ++k) {
      const auto b = sample_path(beta_key(c.master_seed, 1000 + k), -tau, 0.0, c.path_dt);
      const auto pb = ou_pullback_density(p, b, grid, tau);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += pb.values()[i];
    }
    const GridDensity avg(grid, acc);
    sum.check("disintegration_l1", l1_distance(avg, ou_stationary_density(p, grid)), "<", 0.05);
    std::vector<GridDensity> ds{avg, ou_stationary_density(p, grid)};
    std::vector<std::string> names{"p_beta_average", "p_stationary"};
    auto os = detail::open_out(dir, "disintegration.csv");
    write_densities_csv(ds, os, names);
  }
  return sum.finish();
}

inline json run_ergodic(const RunConfig& c, const std::filesystem::path& dir) {
  Summary sum(c);
  const auto spec = c.spec();
  ErgodicOptions opt;
  opt.backend = c.backend;
  opt.n_particles = c.n_particles;
  opt.seed = c.master_seed;
  opt.engine = c.engine();
  opt.grid = c.grid(spec);
  opt.fp_dt = c.fp_dt;
  const auto rep = ergodic_consistency(spec, Observable::from_string(c.observable), c.T, c.burn_in, c.dt_obs, c.n_paths,
                                       c.tau, c.initial.law(), opt, opt, c.path_dt);
  sum.results()["time_average"] = rep.time_average;
  sum.results()["time_std_error"] = rep.time_std_error;
  sum.results()["ensemble_average"] = rep.ensemble_average;
  sum.results()["ensemble_std_error"] = rep.ensemble_std_error;
  sum.results()["z"] = rep.z;
  sum.check("z_combined_se", rep.z, "<=", 3.0);
  {
    auto os = detail::open_out(dir, "series.csv");
    write_series_csv(rep.series, os);
  }
  {
    auto os = detail::open_out(dir, "ensemble.csv");
    os << "schema_version,path,value\n";
    os.precision(17);
    for (std::size_t k = 0; k < rep.ensemble.values.size(); ++k)
      os << csv_schema_version << ',' << k << ',' << rep.ensemble.values[k] << '\n';
  }
  return sum.finish();
}

/// Writes manifest.json, runs the experiment, writes summary.json.
inline json run(const RunConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_json(dir, "manifest.json", to_json(c));
  json summary;
  switch (c.experiment) {
    case Experiment::pullback: summary = run_pullback(c, dir); break;
    case Experiment::fp_solve: summary = run_fp_solve(c, dir); break;
    case Experiment::contraction: summary = run_contraction(c, dir); break;
    case Experiment::figure1: summary = run_figure1(c, dir); break;
    case Experiment::ou_validate: summary = run_ou_validate(c, dir); break;
    case Experiment::ergodic: summary = run_ergodic(c, dir); break;
  }
  detail::write_json(dir, "summary.json", summary);
  return summary;
}

}  // namespace cnpb
