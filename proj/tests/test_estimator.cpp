#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ngse/errors.hpp"
#include "ngse/estimator.hpp"
#include "ngse/simulator.hpp"
#include "support/oracles.hpp"

namespace ngse {
namespace {

MeasurementSet scenario_data(std::uint64_t seed, int patients = 500) {
  return simulate(SimulationSpec{patients, testing::scenario_config(), testing::scenario_truth(0.3), seed}).data;
}

FitOptions quick_options() {
  FitOptions options;
  options.n_starts = 4;
  options.seed = 7;
  return options;
}

EstimationResult result_for(const ParameterBundle& params) {
  return EstimationResult{params, pack(params), 0.0, true, 0, 1, 0, std::nullopt, {}, {}};
}

// One fit shared by several tests.
const EstimationResult& reference_fit() {
  static const EstimationResult result = fit(scenario_data(5), testing::scenario_config(), quick_options());
  return result;
}

TEST(Pack, IdentityExample) {
  const ParameterBundle params{CoefficientMatrix((Eigen::MatrixXd(2, 2) << 1, 0, 1, 0).finished()),
                               cholesky_factorize(Eigen::MatrixXd::Identity(2, 2)), PriorParams(1, 1)};
  const PackedParams packed = pack(params);
  Eigen::VectorXd expected(9);
  expected << 1, 0, 1, 0, 0, 0, 0, 0, 0;
  EXPECT_EQ(packed.values, expected);
}

TEST(Pack, UnpackOfZerosIsUnitBundle) {
  const ModelConfig config{3, 2, 128};
  const ParameterBundle params = unpack(PackedParams{Eigen::VectorXd::Zero(config.num_parameters())}, config);
  EXPECT_EQ(params.theta.coeffs(), Eigen::MatrixXd::Zero(3, 3));
  EXPECT_EQ(params.cov.matrix(), Eigen::MatrixXd::Identity(3, 3));
  EXPECT_EQ(params.prior.alpha, 1.0);
  EXPECT_EQ(params.prior.beta, 1.0);
}

TEST(Pack, RoundTripOfRandomVectors) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    const ModelConfig config{2 + trial % 4, 1 + trial % 3, 128};
    Eigen::VectorXd x(config.num_parameters());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n(rng);
    const ParameterBundle params = unpack(PackedParams{x}, config);
    EXPECT_LE((pack(params).values - x).cwiseAbs().maxCoeff(), 1e-12);
    // Positive definite by construction.
    EXPECT_NO_THROW(cholesky_factorize(params.cov.matrix()));
  }
}

TEST(Pack, LengthMismatch) {
  EXPECT_THROW(unpack(PackedParams{Eigen::VectorXd::Zero(8)}, ModelConfig{2, 1, 128}), DimensionMismatch);
}

TEST(MinimumPatients, HeuristicFloor) {
  EXPECT_EQ(minimum_patients(ModelConfig{2, 1, 128}), 14);  // ceil(27 / 2)
  EXPECT_EQ(minimum_patients(ModelConfig{3, 1, 128}), 14);  // 42 / 3
  EXPECT_EQ(minimum_patients(ModelConfig{3, 2, 128}), 17);  // 51 / 3
}

TEST(InitialGuesses, DeterministicFirstGuess) {
  Eigen::MatrixXd values(20, 2);
  for (int p = 0; p < 20; ++p) {
    values(p, 0) = 0.1 + 0.8 * p / 19.0;
    values(p, 1) = 0.3 + 0.02 * (p % 5);
  }
  std::vector<std::string> ids(20, "p");
  const MeasurementSet data(values, {"a", "b"}, ids);
  FitOptions options;
  options.n_starts = 1;
  const std::vector<PackedParams> guesses = initial_guesses(data, ModelConfig{2, 1, 128}, options);
  ASSERT_EQ(guesses.size(), 1u);
  const ParameterBundle first = unpack(guesses[0], ModelConfig{2, 1, 128});
  EXPECT_NEAR(first.theta.coeffs()(0, 0), 0.8, 1e-12);
  EXPECT_NEAR(first.theta.coeffs()(0, 1), 0.1, 1e-12);
  EXPECT_NEAR(first.theta.coeffs()(1, 0), 0.08, 1e-12);
  EXPECT_NEAR(first.theta.coeffs()(1, 1), 0.3, 1e-12);
  const double var0 = (values.col(0).array() - values.col(0).mean()).square().sum() / 19.0;
  EXPECT_NEAR(first.cov.matrix()(0, 0), 0.1 * var0, 1e-12);
  EXPECT_EQ(first.cov.matrix()(0, 1), 0.0);
  EXPECT_NEAR(first.prior.alpha, 2.0, 1e-12);
  EXPECT_NEAR(first.prior.beta, 2.0, 1e-12);
}

TEST(InitialGuesses, HigherOrderCoefficientsStartAtZero) {
  const MeasurementSet data = scenario_data(1, 60);
  FitOptions options;
  options.n_starts = 1;
  const ModelConfig config{3, 2, 128};
  const ParameterBundle first = unpack(initial_guesses(data, config, options)[0], config);
  EXPECT_EQ(first.theta.coeffs().col(0), Eigen::VectorXd::Zero(3));
}

TEST(InitialGuesses, SeededJitter) {
  const MeasurementSet data = scenario_data(1, 60);
  FitOptions options;
  options.seed = 42;
  const auto a = initial_guesses(data, testing::scenario_config(), options);
  const auto b = initial_guesses(data, testing::scenario_config(), options);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values, b[i].values);
  options.seed = 43;
  const auto c = initial_guesses(data, testing::scenario_config(), options);
  EXPECT_EQ(a[0].values, c[0].values);
  EXPECT_NE(a[1].values, c[1].values);
  // Off-diagonal factor entries and signs are untouched by multiplicative jitter.
  for (std::size_t i = 1; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < 6; ++j)
      EXPECT_EQ(std::signbit(a[i].values(j)), std::signbit(a[0].values(j)));
}

TEST(InitialGuesses, InsufficientData) {
  const MeasurementSet data = scenario_data(1, 13);
  EXPECT_THROW(initial_guesses(data, testing::scenario_config(), FitOptions{}), InsufficientData);
  EXPECT_THROW(fit(data, testing::scenario_config(), FitOptions{}), InsufficientData);
  EXPECT_NO_THROW(initial_guesses(scenario_data(1, 14), testing::scenario_config(), FitOptions{}));
}

TEST(FitOptions, Validation) {
  FitOptions options;
  EXPECT_NO_THROW(options.validate());
  options.n_starts = 0;
  EXPECT_THROW(options.validate(), DomainError);
  options = FitOptions{};
  options.nll_tolerance = -1.0;
  EXPECT_THROW(options.validate(), DomainError);
  options = FitOptions{};
  options.max_iterations = 0;
  EXPECT_THROW(options.validate(), DomainError);
}

TEST(Canonicalize, FlipsNegativeLeadingSlope) {
  Eigen::MatrixXd theta(2, 2);
  theta << -0.9, 0.95, -1.1, 1.2;
  const EstimationResult result = result_for(ParameterBundle{
      CoefficientMatrix(theta), cholesky_factorize(Eigen::MatrixXd::Identity(2, 2) * 0.01), PriorParams(2, 5)});
  const EstimationResult out = canonicalize(result, ModelConfig{2, 1, 128});
  EXPECT_EQ(out.params.theta.coeffs()(0, 0), 0.9);
  EXPECT_EQ(out.params.theta.coeffs()(1, 0), 1.1);
  EXPECT_NEAR(out.params.theta.coeffs()(0, 1), 0.05, 1e-15);
  EXPECT_NEAR(out.params.theta.coeffs()(1, 1), 0.1, 1e-15);
  EXPECT_EQ(out.params.prior.alpha, 5.0);
  EXPECT_EQ(out.params.prior.beta, 2.0);
  EXPECT_EQ(out.packed.values, pack(out.params).values);
  EXPECT_TRUE(out.warnings.empty());

  const MeasurementSet data =
      simulate(SimulationSpec{80, ModelConfig{2, 1, 128}, out.params, 3}).data;
  const QuadratureRule rule = gauss_legendre_rule(128);
  EXPECT_NEAR(total_negative_log_likelihood(data, out.params, rule),
              total_negative_log_likelihood(data, result.params, rule), 1e-9);
}

TEST(Canonicalize, LeavesPositiveSlopeAndFlagsHigherOrder) {
  Eigen::MatrixXd theta(2, 2);
  theta << 0.9, 0.0, -1.1, 1.2;
  EstimationResult result = result_for(ParameterBundle{
      CoefficientMatrix(theta), cholesky_factorize(Eigen::MatrixXd::Identity(2, 2)), PriorParams(2, 5)});
  const EstimationResult same = canonicalize(result, ModelConfig{2, 1, 128});
  EXPECT_EQ(same.params.theta.coeffs(), theta);
  EXPECT_EQ(same.params.prior.alpha, 2.0);

  Eigen::MatrixXd quad(2, 3);
  quad << 0.1, -0.9, 0.0, 0.0, -1.1, 1.2;
  result.params = ParameterBundle{CoefficientMatrix(quad), result.params.cov, result.params.prior};
  const EstimationResult flagged = canonicalize(result, ModelConfig{2, 2, 128});
  EXPECT_EQ(flagged.params.theta.coeffs(), quad);
  ASSERT_EQ(flagged.warnings.size(), 1u);
}

TEST(Fit, RecoversScenarioStructure) {
  const EstimationResult& r = reference_fit();
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(std::isfinite(r.nll));
  EXPECT_EQ(r.n_starts, 4);
  ASSERT_EQ(r.start_diagnostics.size(), 4u);
  EXPECT_GE(r.params.theta.coeffs()(0, 0), 0.0);
  for (const StartDiagnostic& d : r.start_diagnostics) EXPECT_LE(r.nll, d.initial_nll);
  const Eigen::VectorXd sd = r.params.cov.matrix().diagonal().cwiseSqrt();
  EXPECT_LT(sd(0), sd(2));
  EXPECT_LT(sd(2), sd(1));
  ASSERT_TRUE(r.std_errors.has_value());
  for (double e : *r.std_errors) EXPECT_GT(e, 0.0);
  // The reported NLL is the plain likelihood at the reported parameters.
  EXPECT_EQ(r.nll, total_negative_log_likelihood(scenario_data(5), r.params, gauss_legendre_rule(128)));
}

TEST(Fit, BitIdenticalAcrossRunsAndThreadCounts) {
  const MeasurementSet data = scenario_data(5);
  FitOptions options = quick_options();
  options.threads = 1;
  const EstimationResult serial = fit(data, testing::scenario_config(), options);
  const EstimationResult& parallel = reference_fit();
  EXPECT_EQ(serial.nll, parallel.nll);
  EXPECT_EQ(serial.packed.values, parallel.packed.values);
  EXPECT_EQ(serial.best_start, parallel.best_start);
  EXPECT_EQ(*serial.std_errors, *parallel.std_errors);
  for (std::size_t i = 0; i < serial.start_diagnostics.size(); ++i) {
    EXPECT_EQ(serial.start_diagnostics[i].final_nll, parallel.start_diagnostics[i].final_nll);
    EXPECT_EQ(serial.start_diagnostics[i].iterations, parallel.start_diagnostics[i].iterations);
  }
}

TEST(Fit, ColumnPermutationEquivariance) {
  const MeasurementSet data = scenario_data(5);
  const std::vector<int> order = {2, 0, 1};
  FitOptions options = quick_options();
  options.compute_std_errors = false;
  const EstimationResult permuted = fit(data.permute_methods(order), testing::scenario_config(), options);
  const EstimationResult& base = reference_fit();
  EXPECT_NEAR(permuted.nll, base.nll, 1e-6);
  for (int i = 0; i < 3; ++i) {
    const int src = order[static_cast<std::size_t>(i)];
    EXPECT_NEAR(permuted.params.theta.coeffs()(i, 0), base.params.theta.coeffs()(src, 0), 1e-3);
    EXPECT_NEAR(permuted.params.theta.coeffs()(i, 1), base.params.theta.coeffs()(src, 1), 1e-3);
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(permuted.params.cov.matrix()(i, j),
                  base.params.cov.matrix()(src, order[static_cast<std::size_t>(j)]), 1e-4);
  }
}

TEST(Fit, NoConvergedStart) {
  FitOptions options = quick_options();
  options.max_iterations = 2;
  EXPECT_THROW(fit(scenario_data(5), testing::scenario_config(), options), NoConvergedStart);
}

TEST(Fit, SimplexOptimizerHonoursTheSameContract) {
  FitOptions options;
  options.n_starts = 1;
  options.optimizer = Optimizer::simplex;
  options.max_iterations = 60000;
  options.compute_std_errors = false;
  const MeasurementSet data = scenario_data(5, 150);
  const EstimationResult simplex = fit(data, testing::scenario_config(), options);
  options.optimizer = Optimizer::quasi_newton;
  const EstimationResult qn = fit(data, testing::scenario_config(), options);
  EXPECT_TRUE(simplex.converged);
  EXPECT_NEAR(simplex.nll, qn.nll, 1e-3);
}

TEST(StandardErrors, HessianIsNearlySymmetric) {
  const EstimationResult& r = reference_fit();
  const Eigen::MatrixXd h = observed_information(scenario_data(5), r.packed, testing::scenario_config());
  EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff() / h.cwiseAbs().maxCoeff(), 1e-3);
}

TEST(StandardErrors, ShrinkByRootTwoWhenDataIsDuplicated) {
  const MeasurementSet data = scenario_data(5);
  const EstimationResult& r = reference_fit();
  Eigen::MatrixXd doubled(1000, 3);
  doubled << data.values(), data.values();
  std::vector<std::string> ids(1000);
  for (int i = 0; i < 1000; ++i) ids[static_cast<std::size_t>(i)] = std::to_string(i);
  const MeasurementSet twice(doubled, data.method_names(), ids);
  // Duplicating the data leaves the optimum unchanged, so reuse it.
  const std::vector<double> single = standard_errors(data, r, testing::scenario_config());
  const std::vector<double> dup = standard_errors(twice, r, testing::scenario_config());
  for (std::size_t i = 0; i < single.size(); ++i)
    EXPECT_NEAR(dup[i] / single[i], 1.0 / std::sqrt(2.0), 0.1 / std::sqrt(2.0)) << i;
}

TEST(StandardErrors, SingularInformationAtFlatPoint) {
  // Far from any optimum the Hessian of a near-constant direction is not PD.
  const MeasurementSet data = scenario_data(5, 60);
  Eigen::MatrixXd theta(3, 2);
  theta << 0.0, 0.3, 0.0, 0.35, 0.0, 0.27;
  const EstimationResult r = result_for(ParameterBundle{
      CoefficientMatrix(theta), cholesky_factorize(Eigen::MatrixXd::Identity(3, 3) * 0.04), PriorParams(2, 5)});
  EXPECT_THROW(standard_errors(data, r, testing::scenario_config()), SingularInformation);
}

}  // namespace
}  // namespace ngse
