#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "cnpb/contraction.hpp"
#include "cnpb/density.hpp"
#include "cnpb/random.hpp"

using namespace cnpb;

namespace {
const GridSpec grid = GridSpec::symmetric(8.0, 1600);

std::vector<double> normal_sample(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = mean + sd * stream_normal(seed, StreamRole::initial, 0, static_cast<std::int64_t>(i));
  return x;
}
}  // namespace

TEST(GridSpec, Geometry) {
  const GridSpec g(-1.0, 3.0, 8);
  EXPECT_DOUBLE_EQ(g.dx(), 0.5);
  EXPECT_DOUBLE_EQ(g.edge(2), 0.0);
  EXPECT_DOUBLE_EQ(g.center(0), -0.75);
  EXPECT_TRUE(g.matches(GridSpec(-1.0 + 1e-12, 3.0, 8)));
  EXPECT_FALSE(g.matches(GridSpec(-1.0, 3.0, 9)));
  EXPECT_THROW(GridSpec(1.0, 1.0, 4), InvalidParameter);
}

TEST(GridDensity, NormalizesAndValidates) {
  const GridDensity d(GridSpec(0.0, 2.0, 2), {1.0, 3.0});
  EXPECT_DOUBLE_EQ(d.mass(), 1.0);
  EXPECT_DOUBLE_EQ(d.values()[1], 0.75);
  EXPECT_THROW(GridDensity(GridSpec(0.0, 1.0, 2), {1.0, -1.0}), InvalidParameter);
  EXPECT_THROW(GridDensity(GridSpec(0.0, 1.0, 2), {0.0, 0.0}), InvalidParameter);
}

TEST(GaussianDensity, Moments) {
  const auto d = gaussian_density(grid, 0.7, 0.5);
  EXPECT_NEAR(d.mass(), 1.0, 1e-14);
  EXPECT_NEAR(mean(d), 0.7, 1e-10);
  // Cell averages add dx^2/12 to the midpoint-rule variance.
  EXPECT_NEAR(variance(d), 0.5 + grid.dx() * grid.dx() / 12.0, 1e-8);
}

TEST(Distances, L1OfDisjointSpikes) {
  const auto a = gaussian_density(grid, -1.0, 0.0);
  const auto b = gaussian_density(grid, 1.0, 0.0);
  EXPECT_NEAR(l1_distance(a, b), 2.0, 1e-12);
  EXPECT_NEAR(wasserstein1(a, b), 2.0, 1e-12);
}

TEST(Distances, W1OfShiftedGaussians) {
  const auto a = gaussian_density(grid, 0.0, 1.0);
  const auto b = gaussian_density(grid, 0.3, 1.0);
  EXPECT_NEAR(wasserstein1(a, b), 0.3, 1e-3);
  EXPECT_NEAR(wasserstein1_quantile(a, b), wasserstein1(a, b), 1e-9);
}

TEST(Distances, W1SignChangeWithinCell) {
  // CDF difference changes sign; the exact formula and the quantile walk agree.
  const auto a = gaussian_density(grid, 0.0, 1.0);
  const auto b = gaussian_density(grid, 0.0, 2.0);
  EXPECT_NEAR(wasserstein1_quantile(a, b), wasserstein1(a, b), 1e-9);
  // N(0,1) vs N(0,s^2): W1 = |s - 1| E|Z| = |s - 1| sqrt(2/pi).
  EXPECT_NEAR(wasserstein1(a, b), (std::sqrt(2.0) - 1.0) * std::sqrt(2.0 / M_PI), 1e-4);
}

TEST(Distances, L1L1Triangle) {
  const auto a = gaussian_density(grid, 0.0, 1.0);
  const auto b = gaussian_density(grid, 0.5, 1.0);
  const auto c = gaussian_density(grid, 1.0, 0.5);
  EXPECT_LE(l1_distance(a, c), l1_distance(a, b) + l1_distance(b, c) + 1e-14);
  EXPECT_NEAR(l1_distance(a, a), 0.0, 0.0);
}

TEST(Distances, DifferentGridsRejected) {
  const auto a = gaussian_density(grid, 0.0, 1.0);
  const auto b = gaussian_density(GridSpec::symmetric(8.0, 800), 0.0, 1.0);
  EXPECT_THROW(l1_distance(a, b), InvalidParameter);
}

TEST(Distances, WfSandwich) {
  const auto prof = build_profile(Potential::double_well(1.0), 1.0, {});
  const double phi = prof.phi_R0();
  for (double shift : {0.05, 0.5, 2.0}) {
    const auto a = gaussian_density(grid, -0.5, 0.4);
    const auto b = gaussian_density(grid, -0.5 + shift, 0.8);
    const double w1s = wasserstein1(a, b) / prof.sigma;
    const double wf = wf_upper(a, b, prof);
    EXPECT_GE(wf, 0.5 * phi * w1s * (1.0 - 1e-6)) << shift;
    EXPECT_LE(wf, w1s * (1.0 + 1e-6)) << shift;
  }
}

TEST(Samples, W1ExactSmallCase) {
  EXPECT_DOUBLE_EQ(wasserstein1_samples({0.0, 1.0}, {0.5, 2.0}), 0.75);
  // Unequal sizes: uniform {0} vs {0, 1} -> 0.5.
  EXPECT_DOUBLE_EQ(wasserstein1_samples({0.0}, {0.0, 1.0}), 0.5);
}

TEST(Estimators, HistogramConvergesToTruth) {
  const GridSpec g = GridSpec::symmetric(6.0, 120);
  const auto truth = gaussian_density(g, 0.0, 1.0);
  const auto x = normal_sample(200000, 0.0, 1.0, 5);
  const double e_hist = l1_distance(from_particles(x, g), truth);
  const double e_kde = l1_distance(from_particles(x, g, GaussianKde{}), truth);
  EXPECT_LT(e_hist, 0.02);
  EXPECT_LT(e_kde, 0.02);
}

TEST(Estimators, SilvermanBandwidth) {
  const auto x = normal_sample(100000, 0.0, 2.0, 9);
  EXPECT_NEAR(silverman_bandwidth(x), 0.9 * 2.0 * std::pow(1e5, -0.2), 0.02 * 0.9 * 2.0 * std::pow(1e5, -0.2));
}

TEST(Estimators, OutOfRangeFoldedOrRejected) {
  const GridSpec g(-1.0, 1.0, 4);
  std::vector<double> x(2000, 0.1);
  x[0] = 5.0;
  const auto d = from_particles(x, g);
  EXPECT_NEAR(d.values()[3] * g.dx(), 1.0 / 2000.0, 1e-15);
  x[1] = -5.0;
  x[2] = 7.0;
  EXPECT_THROW(from_particles(x, g), NumericalFailure);
}

TEST(Remap, ConservesMass) {
  const auto a = gaussian_density(grid, 0.2, 0.7);
  const auto b = remap_conservative(a, GridSpec(-7.0, 7.5, 333));
  EXPECT_NEAR(b.mass(), 1.0, 1e-12);
  EXPECT_NEAR(mean(b), mean(a), 1e-3);
}

TEST(Csv, DensityColumns) {
  std::stringstream ss;
  write_density_csv(gaussian_density(GridSpec(0.0, 1.0, 2), 0.5, 0.1), ss);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "schema_version,x,p");
}
