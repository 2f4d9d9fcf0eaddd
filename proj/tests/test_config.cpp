#include <gtest/gtest.h>

#include <string>

#include "cnpb/config.hpp"

using namespace cnpb;

namespace {
std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}
}  // namespace

TEST(Config, DefaultsPerExperiment) {
  const auto c = parse_config(R"({"experiment": "contraction"})");
  EXPECT_EQ(c.experiment, Experiment::contraction);
  EXPECT_EQ(c.potential, PotentialKind::double_well);
  EXPECT_DOUBLE_EQ(c.sigma, 1.0);
  EXPECT_EQ(c.checkpoints.size(), 4u);
}

TEST(Config, OverlaysValues) {
  const auto c = parse_config(R"({"experiment": "pullback", "master_seed": 99,
    "model": {"potential": {"kind": "double_well", "params": [2.0]}, "sigma": 0.3},
    "numerics": {"tau": 5, "grid": {"x_min": -3, "x_max": 3, "n_cells": 64}}})");
  EXPECT_EQ(c.master_seed, 99u);
  EXPECT_EQ(c.make_potential().kind(), PotentialKind::double_well);
  EXPECT_DOUBLE_EQ(c.sigma, 0.3);
  EXPECT_DOUBLE_EQ(c.eta, 0.8);
  EXPECT_DOUBLE_EQ(c.tau, 5.0);
  EXPECT_TRUE(c.grid().matches(GridSpec(-3, 3, 64)));
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(error_of(R"({"experiment": "pullback", "numerics": {"dt": -1}})"), "numerics.dt: must be positive");
  EXPECT_EQ(error_of(R"({"experiment": "pullback", "model": {"sigmaa": 1}})"), "model.sigmaa: unknown key");
  EXPECT_EQ(error_of(R"({"experiment": "nope"})"), "experiment: unknown value 'nope'");
  EXPECT_EQ(error_of(R"({"master_seed": 1})"), "experiment: required");
  EXPECT_EQ(error_of(R"({"experiment": "pullback", "numerics": {"grid": {"x_min": 1}}})"),
            "numerics.grid: give both x_min and x_max or neither");
  EXPECT_NE(error_of(R"({"experiment": )").find("malformed JSON"), std::string::npos);
  EXPECT_NE(error_of(R"({"experiment": "pullback", "model": {"potential": {"kind": "quadratic", "params": [-1]}}})")
                .find("model"),
            std::string::npos);
}

TEST(Config, ManifestRoundTrip) {
  auto c = parse_config(R"({"experiment": "figure1", "master_seed": 5, "ergodic": {"backend": "fokker_planck"}})");
  const auto j = to_json(c);
  const auto back = parse_config(j.dump());
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(back.backend, Backend::fokker_planck);
}

TEST(Config, ExperimentNames) {
  for (auto e : {Experiment::pullback, Experiment::fp_solve, Experiment::contraction, Experiment::figure1,
                 Experiment::ou_validate, Experiment::ergodic})
    EXPECT_EQ(experiment_from_string(to_string(e)), e);
}
