#include "ngse/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ngse/errors.hpp"

namespace ngse {

namespace {
constexpr double kSlopeFloor = 1e-9;
}

std::string to_string(RankingMode mode) {
  return mode == RankingMode::raw ? "raw" : "normalized";
}

RankingMode parse_ranking_mode(const std::string& text) {
  if (text == "raw") return RankingMode::raw;
  if (text == "normalized") return RankingMode::normalized;
  throw DomainError("unknown ranking mode '" + text + "' (expected raw or normalized)");
}

Eigen::MatrixXd correlation_matrix(const NoiseCovariance& cov) {
  const Eigen::MatrixXd& c = cov.matrix();
  const Eigen::VectorXd sd = c.diagonal().cwiseSqrt();
  Eigen::MatrixXd r(c.rows(), c.cols());
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      r(i, j) = i == j ? 1.0 : std::clamp(c(i, j) / (sd(i) * sd(j)), -1.0, 1.0);
  return r;
}

std::vector<int> ranks_from_scores(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<int> ranks(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = static_cast<int>(pos) + 1;
  return ranks;
}

RankingReport rank_methods(const EstimationResult& result, RankingMode mode,
                           const std::vector<std::string>& names) {
  const CoefficientMatrix& theta = result.params.theta;
  const Eigen::Index k = theta.num_methods();
  const bool linear = theta.poly_order() == 1;
  if (mode == RankingMode::normalized && !linear)
    throw DomainError("normalized ranking requires a linear (M = 1) model");
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != k)
    throw DimensionMismatch("method name count does not match the model");

  RankingReport report;
  report.mode = mode;
  report.correlation = correlation_matrix(result.params.cov);
  std::vector<double> scores;
  for (Eigen::Index m = 0; m < k; ++m) {
    MethodRank row;
    row.name = names.empty() ? "method_" + std::to_string(m + 1)
                             : names[static_cast<std::size_t>(m)];
    row.noise_sd = std::sqrt(result.params.cov.matrix()(m, m));
    if (linear) {
      const double slope = theta.coefficient(m, 1);
      row.slope = slope;
      if (std::fabs(slope) > kSlopeFloor) {
        row.normalized_sd = row.noise_sd / std::fabs(slope);
      } else if (mode == RankingMode::normalized) {
        throw DegenerateSlope("method '" + row.name + "' has slope " + std::to_string(slope) +
                              "; normalized ranking is undefined");
      }
    }
    scores.push_back(mode == RankingMode::raw ? row.noise_sd : *row.normalized_sd);
    report.methods.push_back(std::move(row));
  }
  const std::vector<int> ranks = ranks_from_scores(scores);
  for (std::size_t m = 0; m < ranks.size(); ++m) report.methods[m].rank = ranks[m];
  return report;
}

}  // namespace ngse
