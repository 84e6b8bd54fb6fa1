#include "ngse/simulator.hpp"

#include <random>
#include <string>

#include "ngse/beta_prior.hpp"
#include "ngse/errors.hpp"

namespace ngse {

namespace {

// Each patient owns a generator seeded from (seed, patient index), so rows
// do not depend on how many draws earlier rows consumed.
std::mt19937_64 patient_stream(std::uint64_t seed, std::uint64_t patient) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(patient),
                    static_cast<std::uint32_t>(patient >> 32)};
  return std::mt19937_64(seq);
}

// Uniform on the open interval (0, 1) from the top 53 bits.
double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double draw_truth(std::mt19937_64& rng, const PriorParams& prior) {
  return beta_quantile(open_uniform(rng), prior);
}

}  // namespace

void SimulationSpec::validate() const {
  if (num_patients < 1) throw DomainError("simulation needs at least one patient");
  config.validate();
  if (truth_params.theta.num_methods() != config.num_methods ||
      truth_params.cov.dim() != config.num_methods)
    throw DimensionMismatch("truth parameters do not match the method count");
  if (truth_params.theta.poly_order() != config.poly_order)
    throw DimensionMismatch("truth coefficients do not match the polynomial order");
}

std::vector<double> sample_truths(const SimulationSpec& spec) {
  spec.validate();
  std::vector<double> truths(static_cast<std::size_t>(spec.num_patients));
  for (int p = 0; p < spec.num_patients; ++p) {
    auto rng = patient_stream(spec.seed, static_cast<std::uint64_t>(p));
    truths[static_cast<std::size_t>(p)] = draw_truth(rng, spec.truth_params.prior);
  }
  return truths;
}

SimulationOutput simulate(const SimulationSpec& spec) {
  spec.validate();
  const int k = spec.config.num_methods;
  Eigen::MatrixXd values(spec.num_patients, k);
  std::vector<double> truths(static_cast<std::size_t>(spec.num_patients));
  std::vector<std::string> ids(static_cast<std::size_t>(spec.num_patients));
  std::vector<std::string> names(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m) names[static_cast<std::size_t>(m)] = "method_" + std::to_string(m + 1);

  Eigen::VectorXd z(k);
  for (int p = 0; p < spec.num_patients; ++p) {
    auto rng = patient_stream(spec.seed, static_cast<std::uint64_t>(p));
    const double a = draw_truth(rng, spec.truth_params.prior);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int m = 0; m < k; ++m) z(m) = normal(rng);
    values.row(p) = (predict_means(spec.truth_params.theta, a) +
                     correlated_sample(spec.truth_params.cov, z))
                        .transpose();
    truths[static_cast<std::size_t>(p)] = a;
    ids[static_cast<std::size_t>(p)] = "patient_" + std::to_string(p + 1);
  }
  return SimulationOutput{MeasurementSet(std::move(values), std::move(names), std::move(ids)),
                          std::move(truths)};
}

Eigen::MatrixXd covariance_from_sds(const std::vector<double>& sds, double correlation) {
  const auto k = static_cast<Eigen::Index>(sds.size());
  Eigen::MatrixXd c(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      c(i, j) = (i == j ? 1.0 : correlation) * sds[static_cast<std::size_t>(i)] *
                sds[static_cast<std::size_t>(j)];
  return c;
}

}  // namespace ngse
