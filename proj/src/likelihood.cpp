#include "ngse/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/digamma.hpp>

#include "ngse/beta_prior.hpp"
#include "ngse/errors.hpp"

namespace ngse {

namespace {

// Terms more than this far below the running maximum contribute < 1e-17.
constexpr double kNegligibleExponent = 40.0;

}  // namespace

QuadratureRule gauss_legendre_rule(int n) {
  if (n < 2) throw DomainError("Gauss-Legendre rule needs at least two nodes");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-like initial guess for the i-th largest root, refined by Newton.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::fabs(step) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Map [-1, 1] -> [0, 1]; the weight halves.
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = 0.5 * (1.0 - x);
    rule.nodes[hi] = 0.5 * (1.0 + x);
    rule.weights[lo] = 0.5 * w;
    rule.weights[hi] = 0.5 * w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.5;
  return rule;
}

MarginalLikelihood::MarginalLikelihood(const ParameterBundle& params, const QuadratureRule& rule)
    : cov_(params.cov), theta_(params.theta), prior_(params.prior), nodes_(rule.nodes) {
  const Eigen::Index k = params.theta.num_methods();
  if (params.cov.dim() != k)
    throw DimensionMismatch("coefficient rows do not match covariance dimension");
  const int order = params.theta.poly_order();
  const auto n = static_cast<Eigen::Index>(rule.size());

  design_.resize(order + 1, n);
  for (Eigen::Index j = 0; j < n; ++j)
    design_.col(j) = design_vector(rule.nodes[static_cast<std::size_t>(j)], order);
  whitened_means_ = params.cov.whiten_columns(Eigen::MatrixXd(params.theta.coeffs() * design_));

  const double normal_const = -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi) -
                              0.5 * params.cov.log_determinant();
  node_offsets_.resize(rule.size());
  for (std::size_t j = 0; j < rule.size(); ++j)
    node_offsets_[j] =
        std::log(rule.weights[j]) + beta_log_pdf(rule.nodes[j], params.prior) + normal_const;
}

double MarginalLikelihood::patient_log_marginal(
    const Eigen::Ref<const Eigen::VectorXd>& row) const {
  if (row.size() != whitened_means_.rows())
    throw DimensionMismatch("measurement row length does not match method count");
  return log_marginal_whitened(cov_.whiten(Eigen::VectorXd(row)));
}

double MarginalLikelihood::log_marginal_whitened(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const auto n = static_cast<std::size_t>(whitened_means_.cols());
  const auto k = static_cast<std::size_t>(whitened_means_.rows());
  const double* means = whitened_means_.data();
  const double* offsets = node_offsets_.data();

  // Exponents are stored so that the max pass and the sum pass see identical values.
  thread_local std::vector<double> exponents;
  exponents.resize(n);
  double* e = exponents.data();
  double max_exponent = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const double* mean = means + j * k;
    double quad = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double r = y(static_cast<Eigen::Index>(i)) - mean[i];
      quad += r * r;
    }
    e[j] = offsets[j] - 0.5 * quad;
    max_exponent = std::max(max_exponent, e[j]);
  }
  if (!std::isfinite(max_exponent)) return max_exponent;
  const double cutoff = max_exponent - kNegligibleExponent;
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (e[j] > cutoff) sum += std::exp(e[j] - max_exponent);
  return max_exponent + std::log(sum);
}

double MarginalLikelihood::negative_log_likelihood(const Eigen::MatrixXd& values) const {
  if (values.cols() != whitened_means_.rows())
    throw DimensionMismatch("data column count does not match method count");
  const Eigen::MatrixXd whitened = cov_.whiten_columns(Eigen::MatrixXd(values.transpose()));
  double total = 0.0;
  for (Eigen::Index p = 0; p < whitened.cols(); ++p) total -= log_marginal_whitened(whitened.col(p));
  return total;
}

double MarginalLikelihood::negative_log_likelihood(const Eigen::MatrixXd& values,
                                                   LikelihoodGradient& gradient) const {
  const Eigen::Index k = whitened_means_.rows();
  const Eigen::Index n = whitened_means_.cols();
  const Eigen::Index cols = design_.rows();
  if (values.cols() != k) throw DimensionMismatch("data column count does not match method count");
  const Eigen::Index patients = values.rows();
  const Eigen::MatrixXd whitened = cov_.whiten_columns(Eigen::MatrixXd(values.transpose()));

  // Per patient only the posterior-mean design vector is needed; node-level
  // terms are pooled through the total posterior weight of each node.
  Eigen::MatrixXd mean_design(cols, patients);
  Eigen::VectorXd node_weight = Eigen::VectorXd::Zero(n);
  std::vector<double> exponents(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index p = 0; p < patients; ++p) {
    const double* y = whitened.col(p).data();
    double max_exponent = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double* mean = whitened_means_.col(j).data();
      double quad = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double r = y[i] - mean[i];
        quad += r * r;
      }
      const double e = node_offsets_[static_cast<std::size_t>(j)] - 0.5 * quad;
      exponents[static_cast<std::size_t>(j)] = e;
      max_exponent = std::max(max_exponent, e);
    }
    if (!std::isfinite(max_exponent)) throw DomainError("patient likelihood is not finite");
    const double cutoff = max_exponent - kNegligibleExponent;
    double sum = 0.0;
    for (double& e : exponents) {
      e = e > cutoff ? std::exp(e - max_exponent) : 0.0;
      sum += e;
    }
    total -= max_exponent + std::log(sum);
    Eigen::VectorXd dbar = Eigen::VectorXd::Zero(cols);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = exponents[static_cast<std::size_t>(j)];
      if (w == 0.0) continue;
      const double pi = w / sum;
      node_weight(j) += pi;
      dbar += pi * design_.col(j);
    }
    mean_design.col(p) = dbar;
  }

  // Whitened residual moments: U = sum pi u u^T, W = sum pi u d^T with u = y - m_j.
  const Eigen::MatrixXd b = cov_.whiten_columns(theta_.coeffs());
  const Eigen::MatrixXd weighted_means = whitened_means_ * node_weight.asDiagonal();
  const Eigen::MatrixXd y_dbar = whitened * mean_design.transpose();
  const Eigen::MatrixXd cross = y_dbar * b.transpose();
  const Eigen::MatrixXd u = whitened * whitened.transpose() - cross - cross.transpose() +
                            weighted_means * whitened_means_.transpose();
  const Eigen::MatrixXd w = y_dbar - weighted_means * design_.transpose();

  const auto upper = cov_.chol_factor().transpose().triangularView<Eigen::Upper>();
  gradient.theta = -upper.solve(w);
  Eigen::MatrixXd dl = upper.solve(u);
  for (Eigen::Index i = 0; i < k; ++i) dl(i, i) -= static_cast<double>(patients) / cov_.chol_factor()(i, i);
  gradient.factor = -Eigen::MatrixXd(dl.triangularView<Eigen::Lower>());

  double sum_log_a = 0.0;
  double sum_log_1ma = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    sum_log_a += node_weight(j) * std::log(nodes_[static_cast<std::size_t>(j)]);
    sum_log_1ma += node_weight(j) * std::log1p(-nodes_[static_cast<std::size_t>(j)]);
  }
  const double psi_sum = boost::math::digamma(prior_.alpha + prior_.beta);
  const double pp = static_cast<double>(patients);
  gradient.alpha = -(sum_log_a - pp * (boost::math::digamma(prior_.alpha) - psi_sum));
  gradient.beta = -(sum_log_1ma - pp * (boost::math::digamma(prior_.beta) - psi_sum));
  return total;
}

double resolution_ratio(const ParameterBundle& params, const QuadratureRule& rule) {
  const std::size_t n = rule.size();
  const int order = params.theta.poly_order();
  double ratio = 0.0;
  double max_gap = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double left = j > 0 ? rule.nodes[j] - rule.nodes[j - 1] : rule.nodes[j];
    const double right = j + 1 < n ? rule.nodes[j + 1] - rule.nodes[j] : 1.0 - rule.nodes[j];
    const double gap = std::max(left, right);
    max_gap = std::max(max_gap, gap);
    // Derivative of the design vector: (M a^{M-1}, ..., 1, 0).
    Eigen::VectorXd slope_design = Eigen::VectorXd::Zero(order + 1);
    const double a = rule.nodes[j];
    for (int degree = 1; degree <= order; ++degree)
      slope_design(order - degree) = degree * std::pow(a, degree - 1);
    const Eigen::VectorXd b = params.cov.whiten(Eigen::VectorXd(params.theta.coeffs() * slope_design));
    ratio = std::max(ratio, gap * b.norm());
  }
  const double ab = params.prior.alpha + params.prior.beta;
  const double prior_sd = std::sqrt(params.prior.alpha * params.prior.beta / (ab * ab * (ab + 1.0)));
  return std::max(ratio, max_gap / prior_sd);
}

double patient_log_marginal(const Eigen::VectorXd& row, const ParameterBundle& params,
                            const QuadratureRule& rule) {
  if (!row.allFinite()) throw DomainError("measurement row must be finite");
  return MarginalLikelihood(params, rule).patient_log_marginal(row);
}

double total_negative_log_likelihood(const MeasurementSet& data, const ParameterBundle& params,
                                     const QuadratureRule& rule) {
  return MarginalLikelihood(params, rule).negative_log_likelihood(data.values());
}

double quadrature_doubling_gap(const MeasurementSet& data, const ParameterBundle& params,
                               int nodes) {
  const double coarse = total_negative_log_likelihood(data, params, gauss_legendre_rule(nodes));
  const double fine = total_negative_log_likelihood(data, params, gauss_legendre_rule(2 * nodes));
  return std::fabs(coarse - fine) / static_cast<double>(data.num_patients());
}

}  // namespace ngse
