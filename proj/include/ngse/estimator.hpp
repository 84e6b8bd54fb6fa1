#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngse/likelihood.hpp"
#include "ngse/model_types.hpp"

namespace ngse {

// Unconstrained coordinates of a ParameterBundle, length K(M+1) + K(K+1)/2 + 2:
//   theta row-major (highest degree first within a row),
//   lower triangle of the Cholesky factor row by row with diagonal entries as logs,
//   ln alpha, ln beta.
struct PackedParams {
  Eigen::VectorXd values;
};

enum class Optimizer { quasi_newton, simplex };

struct FitOptions {
  int n_starts = 10;
  int max_iterations = 2000;
  double nll_tolerance = 1e-8;
  double param_tolerance = 1e-6;
  std::uint64_t seed = 0;
  // Worker threads for independent starts; 0 picks NGSE_THREADS or the hardware count.
  int threads = 0;
  bool compute_std_errors = true;
  Optimizer optimizer = Optimizer::quasi_newton;

  void validate() const;
};

struct StartDiagnostic {
  int start_index = 0;
  double initial_nll = 0.0;
  double final_nll = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct EstimationResult {
  ParameterBundle params;
  PackedParams packed;
  double nll = 0.0;
  bool converged = false;
  int iterations = 0;
  int n_starts = 0;
  int best_start = 0;
  // Square roots of the diagonal of the inverse observed information, in packed coordinates.
  std::optional<std::vector<double>> std_errors;
  std::vector<StartDiagnostic> start_diagnostics;
  std::vector<std::string> warnings;
};

PackedParams pack(const ParameterBundle& params);

// Throws DimensionMismatch on a length mismatch. Exponentials that overflow
// or underflow surface as NotPositiveDefinite / DomainError.
ParameterBundle unpack(const PackedParams& x, const ModelConfig& config);

// Minimum patient count for a fit: ceil(3 * free parameters / K). A heuristic
// identifiability floor, not a theorem.
int minimum_patients(const ModelConfig& config);

// Deterministic first guess followed by n_starts - 1 log-normally jittered copies.
std::vector<PackedParams> initial_guesses(const MeasurementSet& data, const ModelConfig& config,
                                          const FitOptions& options);

EstimationResult fit(const MeasurementSet& data, const ModelConfig& config,
                     const FitOptions& options);

// Resolves the a -> 1 - a symmetry for M = 1 so that method 1 has a
// non-negative slope. For M > 1 the result passes through with a warning.
EstimationResult canonicalize(EstimationResult result, const ModelConfig& config);

// Applies the a -> 1 - a substitution to a linear (M = 1) bundle.
ParameterBundle flip(const ParameterBundle& params);

// Central-difference Hessian of the search objective (the NLL plus the
// quadrature-resolution barrier, which is zero at well-resolved optima) in
// packed coordinates, built from
// differences of central-difference gradients. Off-diagonal entries i,j and
// j,i combine the same four evaluations in different order, so the matrix is
// symmetric up to rounding. Step h_i = max(1e-4, 1e-4 |x_i|).
Eigen::MatrixXd observed_information(const MeasurementSet& data, const PackedParams& x,
                                     const ModelConfig& config);

// Throws SingularInformation if the symmetrized Hessian is not invertible
// to a positive-definite matrix.
std::vector<double> standard_errors(const MeasurementSet& data, const EstimationResult& result,
                                    const ModelConfig& config);

// Threads to use when FitOptions::threads is 0.
int default_thread_count();

}  // namespace ngse
