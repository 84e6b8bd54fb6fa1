#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ngse/errors.hpp"
#include "ngse/simulator.hpp"
#include "support/oracles.hpp"

namespace ngse {
namespace {

SimulationSpec scenario_spec(int patients, std::uint64_t seed, double correlation = 0.3) {
  return SimulationSpec{patients, testing::scenario_config(), testing::scenario_truth(correlation), seed};
}

SimulationSpec single_method_spec(double alpha, double beta, int patients, std::uint64_t seed) {
  return SimulationSpec{patients, ModelConfig{2, 1, 128},
                        ParameterBundle{CoefficientMatrix((Eigen::MatrixXd(2, 2) << 1, 0, 1, 0).finished()),
                                        cholesky_factorize(Eigen::MatrixXd::Identity(2, 2) * 1e-4),
                                        PriorParams(alpha, beta)},
                        seed};
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

TEST(SampleTruths, MeansMatchThePrior) {
  const std::vector<double> uniform = sample_truths(single_method_spec(1.0, 1.0, 100000, 3));
  EXPECT_NEAR(mean_of(uniform), 0.5, 0.005);
  const std::vector<double> skewed = sample_truths(single_method_spec(2.0, 5.0, 100000, 4));
  EXPECT_NEAR(mean_of(skewed), 2.0 / 7.0, 0.005);
  for (double a : skewed) {
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
}

TEST(SampleTruths, VarianceMatchesThePrior) {
  const std::vector<double> draws = sample_truths(single_method_spec(2.0, 5.0, 100000, 9));
  const double m = mean_of(draws);
  double ss = 0.0;
  for (double a : draws) ss += (a - m) * (a - m);
  const double expected = 2.0 * 5.0 / (49.0 * 8.0);
  EXPECT_NEAR(ss / (draws.size() - 1.0) / expected, 1.0, 0.03);
}

TEST(Simulate, DeterministicPerSeed) {
  const SimulationOutput a = simulate(scenario_spec(200, 11));
  const SimulationOutput b = simulate(scenario_spec(200, 11));
  const SimulationOutput c = simulate(scenario_spec(200, 12));
  EXPECT_EQ(a.data.values(), b.data.values());
  EXPECT_EQ(a.truths, b.truths);
  EXPECT_NE(a.data.values(), c.data.values());
  EXPECT_EQ(sample_truths(scenario_spec(200, 11)), a.truths);
}

TEST(Simulate, RowsDoNotDependOnPatientCount) {
  const SimulationOutput small = simulate(scenario_spec(10, 5));
  const SimulationOutput large = simulate(scenario_spec(50, 5));
  EXPECT_EQ(small.data.values(), large.data.values().topRows(10));
}

TEST(Simulate, ShapesAndLabels) {
  const SimulationOutput out = simulate(scenario_spec(7, 1));
  EXPECT_EQ(out.data.num_patients(), 7);
  EXPECT_EQ(out.data.num_methods(), 3);
  EXPECT_EQ(out.truths.size(), 7u);
  EXPECT_EQ(out.data.patient_ids().front(), "patient_1");
  EXPECT_EQ(out.data.method_names().back(), "method_3");
}

TEST(Simulate, NearNoiselessLimitReproducesTheCalibration) {
  ParameterBundle truth = testing::scenario_truth(0.0);
  truth.cov = NoiseCovariance::from_factor(Eigen::MatrixXd::Identity(3, 3) * 1e-12);
  const SimulationOutput out = simulate(SimulationSpec{100, testing::scenario_config(), truth, 2});
  for (int p = 0; p < 100; ++p) {
    const Eigen::VectorXd expected = predict_means(truth.theta, out.truths[static_cast<std::size_t>(p)]);
    EXPECT_LE((out.data.values().row(p).transpose() - expected).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Simulate, ColumnMeansMatchTheCalibratedPriorMean) {
  const SimulationOutput out = simulate(scenario_spec(100000, 17));
  const ParameterBundle truth = testing::scenario_truth(0.3);
  const Eigen::VectorXd expected = predict_means(truth.theta, 2.0 / 7.0);
  const Eigen::VectorXd observed = out.data.values().colwise().mean().transpose();
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(observed(k) / expected(k), 1.0, 0.005) << k;
}

TEST(Simulate, ResidualCovarianceMatchesTheNoiseModel) {
  const int patients = 100000;
  const SimulationOutput out = simulate(scenario_spec(patients, 23));
  const ParameterBundle truth = testing::scenario_truth(0.3);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
  for (int p = 0; p < patients; ++p) {
    const Eigen::VectorXd r = out.data.values().row(p).transpose() -
                              predict_means(truth.theta, out.truths[static_cast<std::size_t>(p)]);
    sum += r * r.transpose();
  }
  const Eigen::MatrixXd sample = sum / patients;
  const Eigen::MatrixXd target = truth.cov.matrix();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(sample(i, j) / target(i, j), 1.0, 0.05) << i << "," << j;
}

TEST(Simulate, TruthsAreSeriallyUncorrelated) {
  const std::vector<double> a = sample_truths(single_method_spec(2.0, 5.0, 100000, 31));
  const double m = mean_of(a);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    den += (a[i] - m) * (a[i] - m);
    if (i + 1 < a.size()) num += (a[i] - m) * (a[i + 1] - m);
  }
  EXPECT_LT(std::fabs(num / den), 0.02);
}

TEST(CovarianceFromSds, UniformCorrelation) {
  const Eigen::MatrixXd c = covariance_from_sds({0.05, 0.15, 0.10}, 0.3);
  EXPECT_NEAR(c(0, 0), 0.0025, 1e-15);
  EXPECT_NEAR(c(0, 1), 0.3 * 0.05 * 0.15, 1e-15);
  EXPECT_NEAR(c(2, 1), 0.3 * 0.15 * 0.10, 1e-15);
  EXPECT_EQ(c, c.transpose());
}

TEST(SimulationSpec, Validation) {
  SimulationSpec spec = scenario_spec(0, 1);
  EXPECT_THROW(spec.validate(), DomainError);
  spec = scenario_spec(10, 1);
  spec.config.num_methods = 2;
  EXPECT_THROW(spec.validate(), DimensionMismatch);
  spec = scenario_spec(10, 1);
  spec.config.poly_order = 2;
  EXPECT_THROW(spec.validate(), DimensionMismatch);
}

}  // namespace
}  // namespace ngse
