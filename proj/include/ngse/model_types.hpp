#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ngse {

struct ModelConfig {
  int num_methods = 2;
  int poly_order = 1;
  int quadrature_nodes = 128;

  // Throws DomainError unless K >= 2, M >= 1 and at least 16 nodes.
  void validate() const;

  // Number of free parameters: K(M+1) coefficients, K(K+1)/2 factor entries, 2 prior.
  int num_parameters() const;
};

// Affine map applied at ingestion: v -> (v - lo) / (hi - lo).
struct Rescaling {
  double lo = 0.0;
  double hi = 1.0;
};

// P x K matrix of measured values, one row per patient and one column per method.
class MeasurementSet {
 public:
  MeasurementSet(Eigen::MatrixXd values, std::vector<std::string> method_names,
                 std::vector<std::string> patient_ids,
                 std::optional<Rescaling> rescaling = std::nullopt);

  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<std::string>& method_names() const { return method_names_; }
  const std::vector<std::string>& patient_ids() const { return patient_ids_; }
  const std::optional<Rescaling>& rescaling() const { return rescaling_; }

  Eigen::Index num_patients() const { return values_.rows(); }
  Eigen::Index num_methods() const { return values_.cols(); }

  // Same patients, columns reordered so that new column j is old column order[j].
  MeasurementSet permute_methods(const std::vector<int>& order) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> method_names_;
  std::vector<std::string> patient_ids_;
  std::optional<Rescaling> rescaling_;
};

// K x (M+1) polynomial calibration coefficients. Row k holds
// (u_{k,M}, ..., u_{k,1}, u_{k,0}), highest degree first.
class CoefficientMatrix {
 public:
  explicit CoefficientMatrix(Eigen::MatrixXd coeffs);

  const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  Eigen::Index num_methods() const { return coeffs_.rows(); }
  int poly_order() const { return static_cast<int>(coeffs_.cols()) - 1; }

  // Coefficient of a^degree for method k.
  double coefficient(Eigen::Index k, int degree) const {
    return coeffs_(k, poly_order() - degree);
  }

 private:
  Eigen::MatrixXd coeffs_;
};

struct PriorParams {
  PriorParams(double alpha, double beta);

  double alpha;
  double beta;
};

// (a^M, a^{M-1}, ..., a, 1). Throws DomainError unless 0 <= a <= 1 and M >= 1.
Eigen::VectorXd design_vector(double a, int poly_order);

// Expected measurement of every method for truth a.
Eigen::VectorXd predict_means(const CoefficientMatrix& theta, double a);

}  // namespace ngse
