#include "ngse/model_types.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "ngse/errors.hpp"

namespace ngse {

void ModelConfig::validate() const {
  if (num_methods < 2) throw DomainError("model needs at least two methods");
  if (poly_order < 1) throw DomainError("polynomial order must be at least 1");
  if (quadrature_nodes < 16) throw DomainError("at least 16 quadrature nodes are required");
}

int ModelConfig::num_parameters() const {
  return num_methods * (poly_order + 1) + num_methods * (num_methods + 1) / 2 + 2;
}

MeasurementSet::MeasurementSet(Eigen::MatrixXd values, std::vector<std::string> method_names,
                               std::vector<std::string> patient_ids,
                               std::optional<Rescaling> rescaling)
    : values_(std::move(values)),
      method_names_(std::move(method_names)),
      patient_ids_(std::move(patient_ids)),
      rescaling_(rescaling) {
  if (values_.rows() < 1) throw EmptyData("measurement set has no patients");
  if (static_cast<Eigen::Index>(patient_ids_.size()) != values_.rows())
    throw DimensionMismatch("patient id count does not match row count");
  if (static_cast<Eigen::Index>(method_names_.size()) != values_.cols())
    throw DimensionMismatch("method name count does not match column count");
  for (Eigen::Index p = 0; p < values_.rows(); ++p)
    for (Eigen::Index k = 0; k < values_.cols(); ++k)
      if (!std::isfinite(values_(p, k)))
        throw DomainError("non-finite measurement at patient " + std::to_string(p) + ", method " +
                          std::to_string(k));
  if (rescaling_ && !(rescaling_->lo < rescaling_->hi))
    throw DomainError("rescaling interval must satisfy lo < hi");
}

MeasurementSet MeasurementSet::permute_methods(const std::vector<int>& order) const {
  if (static_cast<Eigen::Index>(order.size()) != values_.cols())
    throw DimensionMismatch("permutation length does not match method count");
  std::vector<bool> seen(order.size(), false);
  for (int j : order) {
    if (j < 0 || j >= static_cast<int>(order.size()) || seen[static_cast<std::size_t>(j)])
      throw DomainError("method order is not a permutation");
    seen[static_cast<std::size_t>(j)] = true;
  }
  Eigen::MatrixXd permuted(values_.rows(), values_.cols());
  std::vector<std::string> names(order.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    permuted.col(static_cast<Eigen::Index>(j)) = values_.col(order[j]);
    names[j] = method_names_[static_cast<std::size_t>(order[j])];
  }
  return MeasurementSet(std::move(permuted), std::move(names), patient_ids_, rescaling_);
}

CoefficientMatrix::CoefficientMatrix(Eigen::MatrixXd coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.cols() < 2) throw DomainError("coefficient matrix needs at least two columns");
  if (!coeffs_.allFinite()) throw DomainError("coefficient matrix has non-finite entries");
}

PriorParams::PriorParams(double alpha_, double beta_) : alpha(alpha_), beta(beta_) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw DomainError("beta prior parameters must be positive and finite");
}

Eigen::VectorXd design_vector(double a, int poly_order) {
  if (poly_order < 1) throw DomainError("polynomial order must be at least 1");
  if (!(a >= 0.0 && a <= 1.0)) throw DomainError("truth value must lie in [0, 1]");
  Eigen::VectorXd d(poly_order + 1);
  double power = 1.0;
  for (int i = poly_order; i >= 0; --i) {
    d(i) = power;
    power *= a;
  }
  return d;
}

Eigen::VectorXd predict_means(const CoefficientMatrix& theta, double a) {
  return theta.coeffs() * design_vector(a, theta.poly_order());
}

}  // namespace ngse
