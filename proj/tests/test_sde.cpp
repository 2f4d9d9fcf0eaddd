#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cnpb/oracle_ou.hpp"
#include "cnpb/sde.hpp"

using namespace cnpb;

namespace {
const auto ou = SdeSpec::scalar(Potential::quadratic(1.0), 0.5, 0.8);
const NoiseStreamKey bkey{17, StreamRole::common, 0, 0};
}  // namespace

TEST(EmStep, HandComputed) {
  const auto spec = SdeSpec::scalar(Potential::double_well(1.0), 0.5, 2.0);
  // x = 2: V'(2) = 6, so 2 - 6 * 0.1 + 0.5 * 0.2 + 2 * (-0.1) = 1.3.
  const double x = 2.0, dw = 0.2, db = -0.1;
  const auto y = em_step(std::span(&x, 1), spec, std::span(&dw, 1), std::span(&db, 1), 0.1);
  EXPECT_NEAR(y[0], 1.3, 1e-15);
}

TEST(EmStep, MatrixNoise) {
  Eigen::MatrixXd s(2, 2), e(2, 2);
  s << 1.0, 0.5, 0.5, 1.0;
  e << 0.0, 0.0, 0.0, 0.0;
  const SdeSpec spec(Potential::quadratic(1.0), s, e);
  const std::vector<double> x{0.0, 0.0}, dw{1.0, 2.0}, db{0.0, 0.0};
  const auto y = em_step(x, spec, dw, db, 0.01);
  EXPECT_DOUBLE_EQ(y[0], 2.0);
  EXPECT_DOUBLE_EQ(y[1], 2.5);
}

TEST(SdeSpec, RejectsNonPsd) {
  Eigen::MatrixXd s(2, 2);
  s << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(SdeSpec(Potential::quadratic(1.0), s, Eigen::MatrixXd::Zero(2, 2)), InvalidParameter);
  EXPECT_THROW(SdeSpec::scalar(Potential::quadratic(1.0), -1.0, 0.0), InvalidParameter);
}

TEST(Engine, CommonNoiseOnlyMatchesRecursion) {
  // sigma = 0: every particle follows x_{k+1} = x_k (1 - a dt) + eta dB_k.
  const auto spec = SdeSpec::scalar(Potential::quadratic(1.0), 0.0, 0.8);
  const auto beta = sample_path(bkey, 0.0, 1.0, 1e-3);
  auto ens = sample_initial(Dirac{{0.5}}, 16, 1, 0.0, 1);
  evolve_in_place(ens, spec, beta, 1.0, {1e-3, 1, 1e6});
  double x = 0.5;
  for (std::int64_t k = 0; k < 1000; ++k) x = x - x * 1e-3 + 0.8 * (beta.at_index(k + 1) - beta.at_index(k));
  for (double p : ens.positions) EXPECT_NEAR(p, x, 1e-13);
}

TEST(Engine, ThreadCountDoesNotChangeResult) {
  const auto beta = sample_path(bkey, 0.0, 0.5, 1e-3);
  auto a = sample_initial(GaussianLaw{0.0, 1.0}, 1001, 1, 0.0, 3);
  auto b = a;
  evolve_in_place(a, ou, beta, 0.5, {1e-3, 1, 1e6});
  evolve_in_place(b, ou, beta, 0.5, {1e-3, 4, 1e6});
  EXPECT_EQ(a.positions, b.positions);
}

TEST(Engine, SplittingTheRunDoesNotChangeResult) {
  const auto beta = sample_path(bkey, 0.0, 1.0, 1e-3);
  auto a = sample_initial(GaussianLaw{0.0, 1.0}, 100, 1, 0.0, 3);
  auto b = a;
  evolve_in_place(a, ou, beta, 1.0);
  evolve_in_place(b, ou, beta, 0.3);
  evolve_in_place(b, ou, beta, 1.0);
  EXPECT_EQ(a.positions, b.positions);
}

TEST(Engine, ReframeWithShiftedPath) {
  // Evolving on [0, 1] then on the shifted path over [0, 1] equals one run on [0, 2].
  const auto beta = sample_path(bkey, 0.0, 2.0, 1e-3);
  auto direct = sample_initial(Dirac{{1.0}}, 50, 1, 0.0, 8);
  auto split = direct;
  evolve_in_place(direct, ou, beta, 2.0);
  evolve_in_place(split, ou, beta, 1.0);
  split.reframe(1.0);
  evolve_in_place(split, ou, wiener_shift(beta, 1.0), 1.0);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(direct.positions[i], split.positions[i], 1e-12);
}

TEST(Engine, MultiDimensionalGeneralPath) {
  const auto spec = SdeSpec::isotropic(Potential::quadratic(1.0), 0.0, 1.0, 2);
  const auto beta = sample_path(bkey, 0.0, 0.1, 1e-3, 2);
  auto ens = sample_initial(Dirac{{1.0, -1.0}}, 3, 2, 0.0, 1);
  evolve_in_place(ens, spec, beta, 0.1);
  double x0 = 1.0, x1 = -1.0;
  for (std::int64_t k = 0; k < 100; ++k) {
    x0 += -x0 * 1e-3 + beta.at_index(k + 1, 0) - beta.at_index(k, 0);
    x1 += -x1 * 1e-3 + beta.at_index(k + 1, 1) - beta.at_index(k, 1);
  }
  EXPECT_NEAR(ens.positions[4], x0, 1e-13);
  EXPECT_NEAR(ens.positions[5], x1, 1e-13);
}

TEST(Engine, EulerVarianceOfOu) {
  // Discrete OU with sigma only: stationary variance sigma^2 dt / (1 - (1 - a dt)^2).
  const auto spec = SdeSpec::scalar(Potential::quadratic(1.0), 1.0, 0.0);
  const double dt = 0.05;
  const auto beta = BrownianPath::zero(0.0, 20.0, dt);
  auto ens = sample_initial(Dirac{{0.0}}, 40000, 1, 0.0, 21);
  evolve_in_place(ens, spec, beta, 20.0, {dt, 1, 1e6});
  double s = 0, s2 = 0;
  for (double x : ens.positions) {
    s += x;
    s2 += x * x;
  }
  const double n = 40000.0;
  const double var = s2 / n - (s / n) * (s / n);
  const double target = dt / (1.0 - (1.0 - dt) * (1.0 - dt));
  EXPECT_NEAR(var, target, 5.0 * target * std::sqrt(2.0 / n));
}

TEST(Engine, BlowUpIsReported) {
  const auto spec = SdeSpec::scalar(Potential::double_well(1.0), 0.0, 0.0);
  const auto beta = BrownianPath::zero(0.0, 1.0, 0.1);
  auto ens = sample_initial(Dirac{{10.0}}, 1, 1, 0.0, 1);
  EXPECT_THROW(evolve_in_place(ens, spec, beta, 1.0, {0.1, 1, 1e6}), NumericalFailure);
}

TEST(Engine, PathMustCoverWindow) {
  const auto beta = sample_path(bkey, 0.0, 0.5, 1e-3);
  auto ens = sample_initial(Dirac{{0.0}}, 4, 1, 0.0, 1);
  EXPECT_THROW(evolve_in_place(ens, ou, beta, 1.0), WindowError);
  EXPECT_THROW(evolve_in_place(ens, ou, beta, 0.00051), InvalidParameter);
}

TEST(Initial, IndependentOfEnsembleSize) {
  const auto a = sample_initial(GaussianLaw{1.0, 2.0}, 10, 1, 0.0, 4);
  const auto b = sample_initial(GaussianLaw{1.0, 2.0}, 1000, 1, 0.0, 4);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a.positions[i], b.positions[i]);
}

TEST(Initial, GridDensityInverseCdf) {
  const auto g = GridSpec::symmetric(5.0, 200);
  const auto p = gaussian_density(g, 0.5, 0.25);
  const auto ens = sample_initial(p, 100000, 1, 0.0, 6);
  EXPECT_LT(l1_distance(from_particles(ens.positions, g), p), 0.03);
}

TEST(Pullback, OuVarianceAndMean) {
  const auto beta = sample_path(bkey, -8.0, 0.0, 1e-3);
  const auto grid = default_density_grid(ou);
  const auto d = pullback_evolve(Dirac{{0.0}}, ou, beta, 8.0, 50000, 2, grid);
  const OuParams p{1.0, 0.5, 0.8};
  EXPECT_NEAR(mean(d), ou_pullback_mean(p, beta, 8.0), 0.01);
  EXPECT_NEAR(variance(d), 0.125, 0.01);
}

TEST(Pullback, ConvergenceReport) {
  const auto spec = SdeSpec::scalar(Potential::quadratic(2.0), 0.5, 0.8);
  const auto beta = sample_path(bkey, -1.0, 0.0, 1e-3);
  const auto rep = pullback_converged(spec, beta, Dirac{{3.0}}, 20000, 5, 0.05, default_density_grid(spec), {}, 64);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.taus.front(), 1.0);
  EXPECT_TRUE(std::isnan(rep.l1_to_previous.front()));
  EXPECT_LT(rep.l1_to_previous.back(), 0.05);
}
