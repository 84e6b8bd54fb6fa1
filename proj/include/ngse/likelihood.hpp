#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ngse/model_types.hpp"
#include "ngse/noise_model.hpp"

namespace ngse {

// Nodes strictly inside (0, 1), increasing; weights sum to one.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

// Gauss-Legendre rule mapped from [-1, 1] onto [0, 1]. Exact for
// polynomials of degree up to 2N-1. Throws DomainError if N < 2.
QuadratureRule gauss_legendre_rule(int n);

// The argument triple of the likelihood: calibration, noise, truth prior.
struct ParameterBundle {
  CoefficientMatrix theta;
  NoiseCovariance cov;
  PriorParams prior;
};

// Gradient of the total negative log-likelihood with respect to the natural
// parameters: coefficients, lower Cholesky factor entries, alpha, beta.
struct LikelihoodGradient {
  Eigen::MatrixXd theta;   // K x (M+1)
  Eigen::MatrixXd factor;  // K x K, lower triangle meaningful
  double alpha = 0.0;
  double beta = 0.0;
};

// Precomputes everything that depends on the parameters but not on the
// patient: whitened node means L^{-1} Theta d(a_j) and the per-node
// log(weight * prior * normal constant). Evaluating one patient then costs
// one triangular solve plus O(K N).
class MarginalLikelihood {
 public:
  MarginalLikelihood(const ParameterBundle& params, const QuadratureRule& rule);

  double patient_log_marginal(const Eigen::Ref<const Eigen::VectorXd>& row) const;

  // -sum_p log pr(row_p), summed in patient order.
  double negative_log_likelihood(const Eigen::MatrixXd& values) const;

  // Same value plus its exact gradient. Each patient contributes the
  // quadrature-posterior expectation of the complete-data score.
  double negative_log_likelihood(const Eigen::MatrixXd& values, LikelihoodGradient& gradient) const;

 private:
  double log_marginal_whitened(const Eigen::Ref<const Eigen::VectorXd>& y) const;

  NoiseCovariance cov_;
  CoefficientMatrix theta_;
  PriorParams prior_;
  Eigen::MatrixXd design_;          // (M+1) x N
  Eigen::MatrixXd whitened_means_;  // K x N
  std::vector<double> node_offsets_;
  std::vector<double> nodes_;
};

// log of sum_j w_j exp[log N(row; Theta d(a_j), C) + log beta(a_j)], via log-sum-exp.
double patient_log_marginal(const Eigen::VectorXd& row, const ParameterBundle& params,
                            const QuadratureRule& rule);

double total_negative_log_likelihood(const MeasurementSet& data, const ParameterBundle& params,
                                     const QuadratureRule& rule);

// How finely the rule samples the integrand: the largest ratio of local node
// gap to the width of the per-patient likelihood in a (1 / ||L^{-1} Theta d'(a)||)
// or to the prior standard deviation. Above ~0.8 the rule under-resolves the
// integrand and the NLL can be driven down by quadrature error alone.
double resolution_ratio(const ParameterBundle& params, const QuadratureRule& rule);

inline constexpr double kMaxResolutionRatio = 0.8;

// |NLL(N) - NLL(2N)| / P: how far the default rule is from its own refinement.
double quadrature_doubling_gap(const MeasurementSet& data, const ParameterBundle& params,
                               int nodes);

}  // namespace ngse
