#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngse/estimator.hpp"
#include "ngse/noise_model.hpp"

namespace ngse {

enum class RankingMode { raw, normalized };

std::string to_string(RankingMode mode);
RankingMode parse_ranking_mode(const std::string& text);

struct MethodRank {
  std::string name;
  double noise_sd = 0.0;
  std::optional<double> slope;          // M = 1 only
  std::optional<double> normalized_sd;  // sigma / |slope|, M = 1 only
  int rank = 0;
};

struct RankingReport {
  RankingMode mode = RankingMode::normalized;
  std::vector<MethodRank> methods;  // in method order, not rank order
  Eigen::MatrixXd correlation;
};

// r_ij = C_ij / sqrt(C_ii C_jj).
Eigen::MatrixXd correlation_matrix(const NoiseCovariance& cov);

// Rank 1 is the most precise method; ties keep method order. Normalized mode
// needs M = 1 and throws DegenerateSlope when some |u_{k,1}| <= 1e-9.
// Empty names default to "method_<k>".
RankingReport rank_methods(const EstimationResult& result, RankingMode mode,
                           const std::vector<std::string>& names = {});

// Ranks from figures of merit alone (ascending, stable).
std::vector<int> ranks_from_scores(const std::vector<double>& scores);

}  // namespace ngse
