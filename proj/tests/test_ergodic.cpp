#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "cnpb/ergodic.hpp"
#include "cnpb/oracle_ou.hpp"

using namespace cnpb;

TEST(Observable, Values) {
  const auto d = gaussian_density(GridSpec::symmetric(8.0, 1600), 1.0, 0.5);
  const double h2 = d.dx() * d.dx() / 12.0;
  EXPECT_NEAR(Observable::variance()(d), 0.5 + h2, 1e-8);
  EXPECT_NEAR(Observable::mean()(d), 1.0, 1e-10);
  EXPECT_NEAR(Observable::moment(2)(d), 1.5 + h2, 1e-8);
  EXPECT_EQ(Observable::constant()(d), 1.0);
  EXPECT_EQ(Observable::from_string("moment3").order, 3);
  EXPECT_THROW(Observable::from_string("entropy"), InvalidParameter);
}

TEST(Series, RunningAverageStartsAfterBurnIn) {
  ObservableSeries s;
  s.burn_in = 1.0;
  s.push(0.5, 10.0);
  s.push(1.0, 10.0);
  s.push(1.5, 2.0);
  s.push(2.0, 4.0);
  EXPECT_TRUE(std::isnan(s.running_average[1]));
  EXPECT_DOUBLE_EQ(s.running_average[2], 2.0);
  EXPECT_DOUBLE_EQ(s.final_average(), 3.0);
  EXPECT_EQ(s.post_burn_in().size(), 2u);
}

TEST(BatchMeans, IidSeries) {
  std::vector<double> v(20000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = stream_normal(4, StreamRole::initial, 0, static_cast<std::int64_t>(i));
  EXPECT_NEAR(batch_means_se(v), 1.0 / std::sqrt(20000.0), 0.4 / std::sqrt(20000.0));
  EXPECT_THROW(batch_means_se(std::vector<double>(10, 1.0)), InvalidParameter);
}

TEST(TimeAverage, ConstantObservableIsOne) {
  const auto spec = SdeSpec::scalar(Potential::quadratic(1.0), 0.5, 0.8);
  const auto beta = sample_path({1, StreamRole::common, 0, 0}, 0.0, 2.0, 1e-3);
  ErgodicOptions opt;
  opt.n_particles = 200;
  opt.engine.dt = 1e-2;
  opt.grid = GridSpec::symmetric(4.0, 100);
  const auto s = time_average(spec, beta, Dirac{{0.0}}, Observable::constant(), 2.0, 1.0, 0.1, opt);
  EXPECT_EQ(s.times.size(), 20u);
  EXPECT_DOUBLE_EQ(s.final_average(), 1.0);
  ASSERT_TRUE(s.final_density.has_value());
}

TEST(TimeAverage, BackendsAgreeOnOuVariance) {
  // The FP variance of an OU law started from a Gaussian is exactly known.
  const OuParams p{1.0, 0.5, 0.8};
  const auto spec = SdeSpec::scalar(Potential::quadratic(1.0), 0.5, 0.8);
  const auto beta = sample_path({2, StreamRole::common, 0, 0}, 0.0, 3.0, 1e-3);
  ErgodicOptions opt;
  opt.backend = Backend::fokker_planck;
  opt.grid = GridSpec::symmetric(4.0, 800);
  const auto s = time_average(spec, beta, GaussianLaw{0.0, 0.5}, Observable::variance(), 3.0, 2.0, 0.5, opt);
  const double v3 = ou_propagate_gaussian(p, beta, 3.0, 0.0, 0.0, 0.5).second;
  EXPECT_NEAR(s.values.back(), v3, 2e-3);
}

TEST(Ensemble, OuPullbackVariance) {
  const auto spec = SdeSpec::scalar(Potential::quadratic(1.0), 0.5, 0.8);
  ErgodicOptions opt;
  opt.backend = Backend::fokker_planck;
  opt.grid = GridSpec::symmetric(4.0, 400);
  opt.fp_dt = 1e-2;
  const auto e = beta_ensemble_average(spec, Observable::variance(), 4, 8.0, GaussianLaw{0.0, 0.5}, opt, 1e-2);
  ASSERT_EQ(e.values.size(), 4u);
  for (double v : e.values) EXPECT_NEAR(v, 0.125, 3e-3);
}

TEST(Consistency, CombinedStandardError) {
  ObservableSeries s;
  for (int i = 1; i <= 400; ++i) s.push(i, 1.0);
  const auto near = ergodic_consistency(s, EnsembleEstimate{1.02, 0.01, {}});
  EXPECT_NEAR(near.z, 2.0, 1e-9);
  EXPECT_TRUE(near.agree);
  const auto far = ergodic_consistency(s, EnsembleEstimate{1.04, 0.01, {}});
  EXPECT_FALSE(far.agree);
}

TEST(BurnIn, DefaultFromCurvature) {
  EXPECT_DOUBLE_EQ(default_burn_in(Potential::quadratic(2.0)), 5.0);
  EXPECT_DOUBLE_EQ(default_burn_in(Potential::double_well(1.0)), 5.0);
}
