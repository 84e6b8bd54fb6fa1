#include "ngse/noise_model.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "ngse/errors.hpp"

namespace ngse {

NoiseCovariance::NoiseCovariance(Eigen::MatrixXd matrix, Eigen::MatrixXd factor)
    : matrix_(std::move(matrix)), factor_(std::move(factor)) {}

NoiseCovariance NoiseCovariance::from_factor(const Eigen::MatrixXd& lower) {
  if (lower.rows() != lower.cols()) throw DimensionMismatch("covariance factor must be square");
  Eigen::MatrixXd factor = lower.triangularView<Eigen::Lower>();
  for (Eigen::Index i = 0; i < factor.rows(); ++i)
    if (!(factor(i, i) > 0.0) || !std::isfinite(factor(i, i)))
      throw NotPositiveDefinite("covariance factor diagonal must be strictly positive");
  if (!factor.allFinite()) throw DomainError("covariance factor has non-finite entries");
  Eigen::MatrixXd matrix = factor * factor.transpose();
  // Exact symmetry; the product is symmetric only up to rounding.
  matrix = 0.5 * (matrix + matrix.transpose()).eval();
  return NoiseCovariance(std::move(matrix), std::move(factor));
}

double NoiseCovariance::log_determinant() const {
  return 2.0 * factor_.diagonal().array().log().sum();
}

Eigen::VectorXd NoiseCovariance::whiten(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) throw DimensionMismatch("vector length does not match covariance");
  return factor_.triangularView<Eigen::Lower>().solve(v);
}

Eigen::MatrixXd NoiseCovariance::whiten_columns(const Eigen::MatrixXd& m) const {
  if (m.rows() != dim()) throw DimensionMismatch("matrix rows do not match covariance");
  return factor_.triangularView<Eigen::Lower>().solve(m);
}

NoiseCovariance cholesky_factorize(const Eigen::MatrixXd& matrix) {
  const Eigen::Index n = matrix.rows();
  if (n != matrix.cols() || n == 0) throw DimensionMismatch("covariance must be square and non-empty");
  if (!matrix.allFinite()) throw DomainError("covariance has non-finite entries");
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance)
    throw DomainError("covariance is not symmetric");

  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = matrix(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
    if (!(pivot > kCholeskyPivotTolerance))
      throw NotPositiveDefinite("covariance is not positive definite (pivot " +
                                std::to_string(j) + " = " + std::to_string(pivot) + ")");
    const double diag = std::sqrt(pivot);
    lower(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = matrix(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / diag;
    }
  }
  Eigen::MatrixXd symmetric = 0.5 * (matrix + matrix.transpose());
  return NoiseCovariance(std::move(symmetric), std::move(lower));
}

double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const NoiseCovariance& cov) {
  if (x.size() != cov.dim() || mean.size() != cov.dim())
    throw DimensionMismatch("density arguments do not match covariance dimension");
  const Eigen::VectorXd white = cov.whiten(x - mean);
  const double k = static_cast<double>(cov.dim());
  return -0.5 * k * std::log(2.0 * std::numbers::pi) - 0.5 * cov.log_determinant() -
         0.5 * white.squaredNorm();
}

Eigen::VectorXd correlated_sample(const NoiseCovariance& cov, const Eigen::VectorXd& z) {
  if (z.size() != cov.dim()) throw DimensionMismatch("draw length does not match covariance");
  if (!z.allFinite()) throw DomainError("standard normal draws must be finite");
  return cov.chol_factor().triangularView<Eigen::Lower>() * z;
}

}  // namespace ngse
