// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cnpb.hpp"

using namespace cnpb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr std::uint64_t seed = 20240611;

// C1 ------------------------------------------------------------------------
RunConfig c1_config(int threads, const fs::path& out) {
  auto c = defaults_for(Experiment::pullback);
  c.master_seed = seed;
  c.threads = threads;
  c.sigma = 0.5;
  c.eta = 0.8;
  c.tau = 10.0;
  c.n_particles = 200000;
  c.dt = 1e-3;
  c.output_dir = out.string();
  return c;
}

Outcome c1(const fs::path& out) {
  const auto c = c1_config(1, out / "c1");
  const auto s = run(c, c.output_dir);
  double l1 = 0, rel = 0;
  for (const auto& ch : s["checks"]) {
    if (ch["name"] == "l1_to_oracle") l1 = ch["value"].get<double>();
    if (ch["name"] == "variance_rel_error") rel = ch["value"].get<double>();
  }
  return {l1 < 0.05 && rel < 0.03, fmt("L1 = %.4f (< 0.05), |var/0.125 - 1| = %.4f (< 0.03)", l1, rel)};
}

// C2 ------------------------------------------------------------------------
double c2_error(const BrownianPath& beta, double dx, double dt) {
  const OuParams p{1.0, 0.5, 0.8};
  const auto spec = SdeSpec::scalar(Potential::quadratic(1.0), p.sigma, p.eta);
  const double x0 = 0.5, s = 0.1, t = 1.0;
  const auto [m0, v0] = ou_propagate_gaussian(p, beta, s, 0.0, x0, 0.0, StieltjesRule::piecewise_linear_exact);
  const double L = 5.0;
  const GridSpec g(-L, L, static_cast<std::size_t>(std::llround(2.0 * L / dx)));
  FpGrid fg;
  fg.dt = dt;
  const auto sol = solve_nonautonomous(gaussian_density(g, m0, v0), spec, beta, s, t, fg);
  const auto [m1, v1] = ou_propagate_gaussian(p, beta, t, 0.0, x0, 0.0, StieltjesRule::piecewise_linear_exact);
  const auto& f = sol.final_density();
  return l1_distance(f, gaussian_density(f.grid(), m1, v1));
}

Outcome c2() {
  const auto beta = sample_path(beta_key(seed, 2), 0.0, 1.0, 1e-3);
  const double e1 = c2_error(beta, 0.01, 1e-4);
  const double e2 = c2_error(beta, 0.005, 5e-5);
  const double order = std::log2(e1 / e2);
  return {e1 < 5e-3 && order >= 0.9,
          fmt("L1 = %.3e (< 5e-3); halved dx, dt: %.3e, observed order %.2f (>= 0.9)", e1, e2, order)};
}

// C3 ------------------------------------------------------------------------
Outcome c3(const fs::path& out) {
  auto c = defaults_for(Experiment::figure1);
  c.master_seed = seed;
  c.n_particles = 100000;
  c.output_dir = (out / "c3").string();
  const auto s = run(c, c.output_dir);
  std::string d;
  for (const auto& row : s["results"]["table"])
    d += fmt("eta=%.3f: %.3f (ref %.2f)  ", row["eta"].get<double>(), row["time_average_variance"].get<double>(),
             row["reference"].get<double>());

  // Same cases through the Fokker-Planck backend, reported alongside.
  auto f = c;
  f.backend = Backend::fokker_planck;
  f.output_dir = (out / "c3_fp").string();
  const auto sf = run(f, f.output_dir);
  d += "| FP:";
  for (const auto& row : sf["results"]["table"]) d += fmt(" %.3f", row["time_average_variance"].get<double>());
  return {s["passed"].get<bool>(), d};
}

// C4 ------------------------------------------------------------------------
Outcome c4() {
  const auto pot = Potential::quadratic(1.0);
  const auto prof = build_profile(pot, 1.0);
  double kdev = 0.0;
  for (double k : prof.k_values) kdev = std::max(kdev, std::abs(k - 2.0));
  const double e0 = std::abs(prof.R0), e1 = std::abs(prof.R1 - 2.0), ec = std::abs(prof.c - 0.5);
  return {kdev < 1e-6 && e0 < 1e-6 && e1 < 1e-6 && ec < 1e-6,
          fmt("max|k-2| = %.1e, |R0| = %.1e, |R1-2| = %.1e, |c-0.5| = %.1e", kdev, e0, e1, ec)};
}

// C5 ------------------------------------------------------------------------
Outcome c5(const fs::path& out) {
  auto c = defaults_for(Experiment::contraction);
  c.master_seed = seed;
  c.output_dir = (out / "c5").string();
  const auto s = run(c, c.output_dir);
  // Worst ratio W1_sigma / bound over all paths and checkpoints.
  std::ifstream in(fs::path(c.output_dir) / "decay.csv");
  std::string line;
  std::getline(in, line);
  double worst = 0.0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> v;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    if (v[2] > 0.0) worst = std::max(worst, v[3] / v[4]);
  }
  const auto& k = s["results"]["constants"];
  return {s["passed"].get<bool>(), fmt("c = %.4f, K = 2/phi(R0) = %.4f, worst W1/bound = %.3f over %zu paths",
                                       k["c"].get<double>(), k["K"].get<double>(), worst, c.n_seeds)};
}

// C6 ------------------------------------------------------------------------
Outcome c6() {
  const auto spec = SdeSpec::scalar(Potential::quadratic(1.0), 0.5, 0.8);
  const auto beta = sample_path(beta_key(seed, 6), 0.0, 10.0, 1e-3);
  FpGrid fg;
  fg.dt = 1e-4;
  // Over ten time units eta beta drifts by several units; tracking keeps the
  // x-window centred so the annulus stays in the tails.
  fg.track_window = true;
  const auto g = GridSpec::symmetric(8.0, 1600);
  std::vector<double> outs;
  for (int k = 1; k < 100; ++k) outs.push_back(0.1 * k);
  const auto sol = solve_nonautonomous(gaussian_density(g, 0.0, 0.25), spec, beta, 0.0, 10.0, fg, outs);
  double worst = 0.0;
  for (std::size_t k = 1; k < sol.mass_log.size(); ++k)
    worst = std::max(worst, std::abs(sol.mass_log[k] - sol.mass_log[k - 1]));
  double dev = 0.0;
  for (double m : sol.mass_log) dev = std::max(dev, std::abs(m - 1.0));
  const double wic = check_wic(sol, spec.potential);
  return {sol.steps == 100000 && dev < 1e-8 && worst < 1e-8 && wic < 1e-6,
          fmt("%lld steps, max|mass-1| = %.1e, max step change = %.1e, dropped = %.1e, wic = %.1e (< 1e-6)",
              static_cast<long long>(sol.steps), dev, worst, sol.dropped_mass, wic)};
}

// C7 ------------------------------------------------------------------------
Outcome c7() {
  const double s = std::sqrt(0.5);
  const auto spec = SdeSpec::scalar(Potential::double_well(1.0), s, s);
  const double tau = 20.0;
  const auto beta = sample_path(beta_key(seed, 7), -tau, 0.0, 1e-3);
  const auto grid = default_density_grid(spec);
  EngineOptions eo;
  eo.dt = 1e-3;
  // Same master seed for both: particle i draws the same intrinsic noise in
  // each run, so the difference reflects the initial condition only.
  const auto a = pullback_evolve(Dirac{{-2.0}}, spec, beta, tau, 100000, seed, grid, eo);
  const auto b = pullback_evolve(Dirac{{2.0}}, spec, beta, tau, 100000, seed, grid, eo);
  const double l1 = l1_distance(a, b);
  return {l1 < 0.03, fmt("L1(delta_-2, delta_+2) = %.4f (< 0.03)", l1)};
}

// C8 ------------------------------------------------------------------------
Outcome c8(const fs::path& out) {
  const OuParams p{1.0, 1.0, 0.5};
  const auto grid = GridSpec::symmetric(6.0 * std::sqrt(1.25 / 2.0), 1024);
  const double tau = default_truncation_tau(p);
  std::vector<double> acc(grid.n_cells, 0.0);
  const std::size_t n = 500;
  for (std::size_t k = 0; k < n; ++k) {
    const auto beta = sample_path(beta_key(seed, 1000 + k), -tau, 0.0, 1e-3);
    const auto d = ou_pullback_density(p, beta, grid, tau);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d.values()[i];
  }
  const GridDensity avg(grid, acc);
  const auto stat = ou_stationary_density(p, grid);
  fs::create_directories(out / "c8");
  std::ofstream os(out / "c8" / "disintegration.csv");
  std::vector<GridDensity> ds{avg, stat};
  std::vector<std::string> names{"p_beta_average", "p_stationary"};
  write_densities_csv(ds, os, names);
  const double l1 = l1_distance(avg, stat);
  return {l1 < 0.05, fmt("a=1, sigma=1, eta=0.5, %zu paths: L1 = %.4f (< 0.05)", n, l1)};
}

// C9 ------------------------------------------------------------------------
Outcome c9() {
  const auto spec = SdeSpec::scalar(Potential::double_well(1.0), std::sqrt(0.5), std::sqrt(0.5));
  const auto beta = sample_path(beta_key(seed, 9), 0.0, 1.0, 1e-4);
  const auto q0 = gaussian_density(GridSpec::symmetric(5.0, 1000), 0.5, 0.2);
  FpGrid f1, f2;
  f1.dt = 1e-4;
  f2.dt = 5e-5;
  const double g1 = cocycle_check(spec, beta, q0, 0.4, 1.0, f1);
  const double g2 = cocycle_check(spec, beta, q0, 0.4, 1.0, f2);
  // With the path grid on the step grid the composed and direct solves run
  // the same arithmetic up to the re-anchoring of beta, so the gap sits at
  // roundoff and cannot shrink further; it then counts as converged.
  const bool shrinking = g2 <= 0.75 * g1 || (g1 < 1e-12 && g2 < 1e-12);
  return {g1 < 1e-6 && shrinking, fmt("gap dt=1e-4: %.2e (< 1e-6), dt=5e-5: %.2e", g1, g2)};
}

// C10 -----------------------------------------------------------------------
Outcome c10(const fs::path& out) {
  std::string d;
  bool pass = true;
  struct Case {
    const char* name;
    PotentialKind kind;
    double sigma, eta;
  };
  const Case cases[] = {{"ou", PotentialKind::quadratic, 0.5, 0.8},
                        {"double_well_b", PotentialKind::double_well, std::sqrt(0.5), std::sqrt(0.5)}};
  for (const auto& cs : cases) {
    auto c = defaults_for(Experiment::ergodic);
    c.master_seed = seed;
    c.potential = cs.kind;
    c.potential_params = {1.0};
    c.sigma = cs.sigma;
    c.eta = cs.eta;
    c.output_dir = (out / (std::string("c10_") + cs.name)).string();
    const auto s = run(c, c.output_dir);
    const auto& r = s["results"];
    d += fmt("%s: time %.4f +- %.4f, ensemble %.4f +- %.4f, z = %.2f; ", cs.name, r["time_average"].get<double>(),
             r["time_std_error"].get<double>(), r["ensemble_average"].get<double>(),
             r["ensemble_std_error"].get<double>(), r["z"].get<double>());
    pass = pass && s["passed"].get<bool>();
  }
  return {pass, d + "(z <= 3)"};
}

// C11 -----------------------------------------------------------------------
Outcome c11(const fs::path& out) {
  const auto ref = out / "c1";
  std::string d;
  bool pass = true;
  for (int threads : {2, 8}) {
    const auto dir = out / ("c11_threads" + std::to_string(threads));
    const auto c = c1_config(threads, dir);
    run(c, c.output_dir);
    for (const char* f : {"density.csv", "beta.csv", "density_vs_oracle.csv"}) {
      const bool same = slurp(ref / f) == slurp(dir / f) && !slurp(ref / f).empty();
      pass = pass && same;
      if (!same) d += fmt("%s differs at %d threads; ", f, threads);
    }
  }
  // The ensemble estimator parallelizes over paths rather than particles.
  auto e = defaults_for(Experiment::ergodic);
  e.master_seed = seed;
  e.T = 60.0;
  e.n_paths = 16;
  e.n_particles = 2000;
  std::string first;
  for (int threads : {1, 4}) {
    e.threads = threads;
    e.output_dir = (out / ("c11_ergodic_threads" + std::to_string(threads))).string();
    run(e, e.output_dir);
    const auto bytes = slurp(fs::path(e.output_dir) / "ensemble.csv") + slurp(fs::path(e.output_dir) / "series.csv");
    if (first.empty()) first = bytes;
    else if (bytes != first) {
      pass = false;
      d += "ergodic CSVs differ between 1 and 4 threads; ";
    }
  }
  return {pass, d.empty() ? "pullback CSVs identical at 1, 2, 8 threads; ergodic CSVs identical at 1, 4 threads" : d};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out, "output directory");
  app.add_option("--only", only, "run only these criteria (1-11)");
  CLI11_PARSE(app, argc, argv);
  const fs::path dir(out);
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"C1  OU pullback matches closed form", [&] { return c1(dir); }},
      {"C2  FP solver vs OU transition law", [] { return c2(); }},
      {"C3  synchronization variances", [&] { return c3(dir); }},
      {"C4  contraction constants, quadratic", [] { return c4(); }},
      {"C5  contraction envelope, double well", [&] { return c5(dir); }},
      {"C6  FP mass conservation and tail flux", [] { return c6(); }},
      {"C7  pullback forgets the initial condition", [] { return c7(); }},
      {"C8  beta-average of pullbacks is stationary", [&] { return c8(dir); }},
      {"C9  FP cocycle", [] { return c9(); }},
      {"C10 time average vs ensemble average", [&] { return c10(dir); }},
      {"C11 thread-count determinism", [&] { return c11(dir); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i + 1)) == only.end()) continue;
    // C11 compares against the C1 output.
    if (i == 10 && !fs::exists(dir / "c1" / "density.csv")) criteria[0].second();
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << criteria[i].first << " | " << o.detail << " | "
              << fmt("%.1f s", secs) << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed" : "acceptance: all passed")
            << std::endl;
  return failed ? 1 : 0;
}
