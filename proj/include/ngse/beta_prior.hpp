#pragma once

#include "ngse/model_types.hpp"

namespace ngse {

// ln Gamma(x) for x > 0 (Lanczos approximation, ~1e-15 relative).
double log_gamma(double x);

// ln B(alpha, beta). Throws DomainError on non-positive arguments.
double log_beta_function(double alpha, double beta);

// Log density of the beta prior at a in [0, 1]. Boundary points where the
// density vanishes return -infinity; where it diverges, +infinity.
double beta_log_pdf(double a, const PriorParams& prior);

// Regularized incomplete beta I_x(alpha, beta), i.e. the beta CDF at x.
double regularized_incomplete_beta(double x, const PriorParams& prior);

// Inverse CDF by bisection on regularized_incomplete_beta. u in [0, 1].
double beta_quantile(double u, const PriorParams& prior, double tolerance = 1e-10);

}  // namespace ngse
