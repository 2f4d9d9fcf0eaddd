#pragma once

// Run configuration: strict JSON in, fully resolved JSON (manifest) out.
// Unknown keys are errors; every default appears in the manifest, so a
// manifest fed back as a config reproduces the run.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cnpb/density.hpp"
#include "cnpb/ergodic.hpp"
#include "cnpb/error.hpp"
#include "cnpb/fokker_planck.hpp"
#include "cnpb/potential.hpp"
#include "cnpb/sde.hpp"

namespace cnpb {

using json = nlohmann::ordered_json;

enum class Experiment { pullback, fp_solve, contraction, figure1, ou_validate, ergodic };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::pullback: return "pullback";
    case Experiment::fp_solve: return "fp-solve";
    case Experiment::contraction: return "contraction";
    case Experiment::figure1: return "figure1";
    case Experiment::ou_validate: return "ou-validate";
    case Experiment::ergodic: return "ergodic";
  }
  return "unknown";
}

inline Experiment experiment_from_string(const std::string& s) {
  for (auto e : {Experiment::pullback, Experiment::fp_solve, Experiment::contraction, Experiment::figure1,
                 Experiment::ou_validate, Experiment::ergodic})
    if (to_string(e) == s) return e;
  throw ConfigError("experiment: unknown value '" + s + "'");
}

struct InitialConfig {
  std::string kind = "dirac";  // dirac | gaussian
  double x = 0.0;
  double mean = 0.0;
  double variance = 1.0;

  InitialLaw law() const {
    if (kind == "dirac") return Dirac{{x}};
    return GaussianLaw{mean, variance};
  }
};

struct RunConfig {
  Experiment experiment = Experiment::pullback;
  std::uint64_t master_seed = 1;
  int threads = 1;
  std::string output_dir = "out";

  // model
  PotentialKind potential = PotentialKind::quadratic;
  std::vector<double> potential_params{1.0};
  double sigma = 0.5;
  double eta = 0.8;

  // numerics
  double dt = 1e-3;
  std::size_t n_particles = 100000;
  double tau = 10.0;
  double T = 500.0;
  double burn_in = 50.0;
  double dt_obs = 0.1;
  double path_dt = 1e-3;
  std::size_t n_paths = 100;
  double tol = 0.02;
  double tau_cap = 1024.0;
  bool converge = false;
  std::optional<double> grid_x_min, grid_x_max;  // default: +-6 stationary std
  std::size_t grid_cells = 1024;

  InitialConfig initial;

  // fokker_planck
  FpScheme scheme = FpScheme::chang_cooper;
  double fp_dt = 1e-4;
  double t0 = 0.0;
  double t1 = 1.0;
  bool track_window = false;
  double boundary_tol = 1e-6;

  // ergodic
  Backend backend = Backend::particle;
  std::string observable = "variance";

  // figure1
  std::vector<double> etas{0.99, std::sqrt(0.5), 0.15};
  double total_variance = 1.0;

  // contraction
  std::size_t n_log = 4000;
  std::vector<double> checkpoints{1.0, 2.0, 4.0, 8.0};
  std::size_t n_seeds = 5;
  double x_mu = -1.0;
  double x_nu = 1.0;

  Potential make_potential() const { return {potential, potential_params}; }
  SdeSpec spec() const { return SdeSpec::scalar(make_potential(), sigma, eta); }
  EngineOptions engine() const { return {dt, threads, 1e6}; }

  GridSpec grid(const SdeSpec& s) const {
    if (grid_x_min && grid_x_max) return {*grid_x_min, *grid_x_max, grid_cells};
    return default_density_grid(s, grid_cells);
  }
  GridSpec grid() const { return grid(spec()); }
};

/// Defaults that differ by experiment (applied before the JSON overlay).
inline RunConfig defaults_for(Experiment e) {
  RunConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::pullback:
      c.n_particles = 200000;
      break;
    case Experiment::fp_solve:
      c.initial = {"gaussian", 0.0, 0.0, 0.25};
      c.grid_x_min = -8.0;
      c.grid_x_max = 8.0;
      c.grid_cells = 1600;
      break;
    case Experiment::contraction:
      c.potential = PotentialKind::double_well;
      c.sigma = 1.0;
      c.eta = 0.5;
      c.n_particles = 20000;
      break;
    case Experiment::figure1:
      c.potential = PotentialKind::double_well;
      c.dt = 1e-2;
      c.initial = {"gaussian", 0.0, 0.0, 0.5};
      c.fp_dt = 1e-3;
      c.T = 550.0;
      c.grid_x_min = -4.0;
      c.grid_x_max = 4.0;
      c.grid_cells = 800;
      break;
    case Experiment::ou_validate:
      c.n_particles = 200000;
      break;
    case Experiment::ergodic:
      c.dt = 1e-2;
      c.n_particles = 10000;
      c.tau = 20.0;
      c.n_paths = 200;
      c.initial = {"gaussian", 0.0, 0.0, 0.5};
      break;
  }
  return c;
}

namespace detail {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  void check_keys(std::initializer_list<const char*> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
  }

  bool has(const char* k) const { return j_.contains(k); }
  Reader sub(const char* k) const { return {j_.at(k), field(k)}; }

  void number(const char* k, double& out, bool positive = false, bool non_negative = false) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_number()) throw ConfigError(field(k) + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(field(k) + ": must be finite");
    if (positive && !(out > 0.0)) throw ConfigError(field(k) + ": must be positive");
    if (non_negative && out < 0.0) throw ConfigError(field(k) + ": must be non-negative");
  }
  template <class Int>
  void integer(const char* k, Int& out, bool positive = true) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_number_integer()) throw ConfigError(field(k) + ": expected an integer");
    if (v.is_number_unsigned()) {
      out = static_cast<Int>(v.get<std::uint64_t>());
    } else {
      const auto s = v.get<std::int64_t>();
      if (s < 0 || (positive && s == 0)) throw ConfigError(field(k) + ": must be positive");
      out = static_cast<Int>(s);
    }
    if (positive && out == 0) throw ConfigError(field(k) + ": must be positive");
  }
  void boolean(const char* k, bool& out) const {
    if (!has(k)) return;
    if (!j_.at(k).is_boolean()) throw ConfigError(field(k) + ": expected true or false");
    out = j_.at(k).get<bool>();
  }
  void string(const char* k, std::string& out) const {
    if (!has(k)) return;
    if (!j_.at(k).is_string()) throw ConfigError(field(k) + ": expected a string");
    out = j_.at(k).get<std::string>();
  }
  void numbers(const char* k, std::vector<double>& out) const {
    if (!has(k)) return;
    const auto& v = j_.at(k);
    if (!v.is_array()) throw ConfigError(field(k) + ": expected an array of numbers");
    out.clear();
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(field(k) + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
  }
  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& j_;
  std::string path_;
};

}  // namespace detail

/// Parses and validates a config. Errors name the offending field (or the
/// line and column for malformed JSON).
inline RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  detail::Reader r(j, "");
  r.check_keys({"experiment", "master_seed", "threads", "output_dir", "model", "numerics", "initial",
                "fokker_planck", "ergodic", "figure1", "contraction"});
  if (!r.has("experiment")) throw ConfigError("experiment: required");
  std::string exp;
  r.string("experiment", exp);
  RunConfig c = defaults_for(experiment_from_string(exp));
  r.integer("master_seed", c.master_seed, false);
  r.integer("threads", c.threads);
  r.string("output_dir", c.output_dir);

  if (r.has("model")) {
    auto m = r.sub("model");
    m.check_keys({"potential", "sigma", "eta"});
    if (m.has("potential")) {
      auto p = m.sub("potential");
      p.check_keys({"kind", "params"});
      std::string kind(to_string(c.potential));
      p.string("kind", kind);
      try {
        c.potential = potential_kind_from_string(kind);
      } catch (const InvalidParameter& e) {
        throw ConfigError(p.field("kind") + ": " + e.what());
      }
      p.numbers("params", c.potential_params);
    }
    m.number("sigma", c.sigma, false, true);
    m.number("eta", c.eta, false, true);
  }
  if (r.has("numerics")) {
    auto n = r.sub("numerics");
    n.check_keys({"dt", "n_particles", "tau", "T", "burn_in", "dt_obs", "path_dt", "n_paths", "tol", "tau_cap",
                  "converge", "grid"});
    n.number("dt", c.dt, true);
    n.integer("n_particles", c.n_particles);
    n.number("tau", c.tau, false, true);
    n.number("T", c.T, true);
    n.number("burn_in", c.burn_in, false, true);
    n.number("dt_obs", c.dt_obs, true);
    n.number("path_dt", c.path_dt, true);
    n.integer("n_paths", c.n_paths);
    n.number("tol", c.tol, true);
    n.number("tau_cap", c.tau_cap, true);
    n.boolean("converge", c.converge);
    if (n.has("grid")) {
      auto g = n.sub("grid");
      g.check_keys({"x_min", "x_max", "n_cells"});
      if (g.has("x_min") != g.has("x_max")) throw ConfigError(g.where() + ": give both x_min and x_max or neither");
      if (g.has("x_min")) {
        double lo = 0, hi = 0;
        g.number("x_min", lo);
        g.number("x_max", hi);
        if (!(hi > lo)) throw ConfigError(g.field("x_max") + ": must exceed x_min");
        c.grid_x_min = lo;
        c.grid_x_max = hi;
      }
      g.integer("n_cells", c.grid_cells);
    }
  }
  if (r.has("initial")) {
    auto i = r.sub("initial");
    i.check_keys({"kind", "x", "mean", "variance"});
    i.string("kind", c.initial.kind);
    if (c.initial.kind != "dirac" && c.initial.kind != "gaussian")
      throw ConfigError(i.field("kind") + ": expected 'dirac' or 'gaussian'");
    i.number("x", c.initial.x);
    i.number("mean", c.initial.mean);
    i.number("variance", c.initial.variance, false, true);
  }
  if (r.has("fokker_planck")) {
    auto f = r.sub("fokker_planck");
    f.check_keys({"scheme", "dt", "t0", "t1", "track_window", "boundary_tol"});
    std::string scheme(to_string(c.scheme));
    f.string("scheme", scheme);
    try {
      c.scheme = fp_scheme_from_string(scheme);
    } catch (const InvalidParameter& e) {
      throw ConfigError(f.field("scheme") + ": " + e.what());
    }
    f.number("dt", c.fp_dt, true);
    f.number("t0", c.t0);
    f.number("t1", c.t1);
    f.boolean("track_window", c.track_window);
    f.number("boundary_tol", c.boundary_tol, true);
    if (!(c.t1 > c.t0)) throw ConfigError(f.field("t1") + ": must exceed t0");
  }
  if (r.has("ergodic")) {
    auto e = r.sub("ergodic");
    e.check_keys({"backend", "observable"});
    std::string b = c.backend == Backend::particle ? "particle" : "fokker_planck";
    e.string("backend", b);
    try {
      c.backend = backend_from_string(b);
      e.string("observable", c.observable);
      (void)Observable::from_string(c.observable);
    } catch (const InvalidParameter& err) {
      throw ConfigError(e.where() + ": " + err.what());
    }
  }
  if (r.has("figure1")) {
    auto f = r.sub("figure1");
    f.check_keys({"etas", "total_variance"});
    f.numbers("etas", c.etas);
    f.number("total_variance", c.total_variance, true);
    for (double e : c.etas)
      if (!(e >= 0.0 && e * e < c.total_variance)) throw ConfigError(f.field("etas") + ": need 0 <= eta^2 < total_variance");
  }
  if (r.has("contraction")) {
    auto k = r.sub("contraction");
    k.check_keys({"n_log", "checkpoints", "n_seeds", "x_mu", "x_nu"});
    k.integer("n_log", c.n_log);
    k.numbers("checkpoints", c.checkpoints);
    k.integer("n_seeds", c.n_seeds);
    k.number("x_mu", c.x_mu);
    k.number("x_nu", c.x_nu);
  }
  if (!(c.T > c.burn_in)) throw ConfigError("numerics.T: must exceed numerics.burn_in");
  try {
    (void)c.spec();
  } catch (const InvalidParameter& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// The fully resolved config; parse_config(manifest) gives back the same run.
inline json to_json(const RunConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["master_seed"] = c.master_seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  j["model"] = {{"potential", {{"kind", std::string(to_string(c.potential))}, {"params", c.potential_params}}},
                {"sigma", c.sigma},
                {"eta", c.eta}};
  json grid = {{"n_cells", c.grid_cells}};
  if (c.grid_x_min) {
    grid["x_min"] = *c.grid_x_min;
    grid["x_max"] = *c.grid_x_max;
  }
  j["numerics"] = {{"dt", c.dt},         {"n_particles", c.n_particles}, {"tau", c.tau},
                   {"T", c.T},           {"burn_in", c.burn_in},         {"dt_obs", c.dt_obs},
                   {"path_dt", c.path_dt}, {"n_paths", c.n_paths},       {"tol", c.tol},
                   {"tau_cap", c.tau_cap}, {"converge", c.converge},     {"grid", grid}};
  j["initial"] = {{"kind", c.initial.kind}, {"x", c.initial.x}, {"mean", c.initial.mean},
                  {"variance", c.initial.variance}};
  j["fokker_planck"] = {{"scheme", std::string(to_string(c.scheme))}, {"dt", c.fp_dt}, {"t0", c.t0},
                        {"t1", c.t1}, {"track_window", c.track_window}, {"boundary_tol", c.boundary_tol}};
  j["ergodic"] = {{"backend", c.backend == Backend::particle ? "particle" : "fokker_planck"},
                  {"observable", c.observable}};
  j["figure1"] = {{"etas", c.etas}, {"total_variance", c.total_variance}};
  j["contraction"] = {{"n_log", c.n_log}, {"checkpoints", c.checkpoints}, {"n_seeds", c.n_seeds},
                      {"x_mu", c.x_mu}, {"x_nu", c.x_nu}};
  return j;
}

}  // namespace cnpb
