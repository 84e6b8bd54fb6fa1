#pragma once

#include <Eigen/Dense>

namespace ngse {

// Symmetric positive-definite noise covariance carried together with its
// lower Cholesky factor, so log-determinants and solves cost O(K^2).
class NoiseCovariance {
 public:
  // Builds from a lower-triangular factor with strictly positive diagonal.
  static NoiseCovariance from_factor(const Eigen::MatrixXd& lower);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& chol_factor() const { return factor_; }
  Eigen::Index dim() const { return matrix_.rows(); }

  // ln det C = 2 sum ln L_ii.
  double log_determinant() const;

  // L^{-1} v by forward substitution.
  Eigen::VectorXd whiten(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd whiten_columns(const Eigen::MatrixXd& m) const;

 private:
  NoiseCovariance(Eigen::MatrixXd matrix, Eigen::MatrixXd factor);
  friend NoiseCovariance cholesky_factorize(const Eigen::MatrixXd& matrix);

  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd factor_;
};

inline constexpr double kCholeskyPivotTolerance = 1e-12;
inline constexpr double kSymmetryTolerance = 1e-10;

// Throws NotPositiveDefinite if any pivot is <= 1e-12, DomainError if the
// input is not symmetric within 1e-10.
NoiseCovariance cholesky_factorize(const Eigen::MatrixXd& matrix);

// Log density of N(mean, C) at x.
double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const NoiseCovariance& cov);

// L z: maps standard normal draws to N(0, C) draws.
Eigen::VectorXd correlated_sample(const NoiseCovariance& cov, const Eigen::VectorXd& z);

}  // namespace ngse
