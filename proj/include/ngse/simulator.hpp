#pragma once

#include <cstdint>
#include <vector>

#include "ngse/likelihood.hpp"
#include "ngse/model_types.hpp"

namespace ngse {

struct SimulationSpec {
  int num_patients = 1;
  ModelConfig config;
  ParameterBundle truth_params;
  std::uint64_t seed = 0;

  void validate() const;
};

// The measurement set plus the hidden truths, which travel on their own
// channel and are never part of the MeasurementSet.
struct SimulationOutput {
  MeasurementSet data;
  std::vector<double> truths;
};

// i.i.d. beta(alpha, beta) draws by inverse CDF, one per patient substream.
std::vector<double> sample_truths(const SimulationSpec& spec);

// row_p = Theta d(a_p) + L z_p.
SimulationOutput simulate(const SimulationSpec& spec);

// Uniform correlation model: C_ij = rho sd_i sd_j off the diagonal.
Eigen::MatrixXd covariance_from_sds(const std::vector<double>& sds, double correlation);

}  // namespace ngse
