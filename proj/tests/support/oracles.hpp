#pragma once

// Reference computations that share no code with the library under test.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ngse/likelihood.hpp"
#include "ngse/simulator.hpp"

namespace ngse::testing {

// Composite Simpson rule on [lo, hi] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int panels) {
  if (panels % 2 == 1) ++panels;
  const double h = (hi - lo) / panels;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + i * h);
  return sum * h / 3.0;
}

// Integral of t^(a-1) (1-t)^(b-1) over [0, 1]. The substitution
// t = (1 - cos phi) / 2 removes the endpoint singularities for a, b >= 1/2.
inline double beta_integral(double a, double b) {
  const auto integrand = [a, b](double phi) {
    const double t = 0.5 * (1.0 - std::cos(phi));
    const double dt = 0.5 * std::sin(phi);
    if (t <= 0.0 || t >= 1.0) {
      // Limits of t^(a-1)(1-t)^(b-1) dt/dphi at the endpoints.
      const double s = t <= 0.0 ? a : b;
      return s == 0.5 ? 1.0 : 0.0;
    }
    return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0) * dt;
  };
  return simpson(integrand, 0.0, std::acos(-1.0), 200000);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Marginal density by plain Monte Carlo over the prior, using std::gamma_distribution
// for the beta draws and an explicit inverse for the Gaussian.
inline double monte_carlo_marginal(const Eigen::VectorXd& row, const ParameterBundle& params,
                                   int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> ga(params.prior.alpha, 1.0);
  std::gamma_distribution<double> gb(params.prior.beta, 1.0);
  const Eigen::MatrixXd cov = params.cov.matrix();
  const Eigen::MatrixXd inverse = cov.inverse();
  const double k = static_cast<double>(row.size());
  const double norm = std::pow(2.0 * std::acos(-1.0), -0.5 * k) / std::sqrt(cov.determinant());
  const Eigen::MatrixXd& theta = params.theta.coeffs();
  const int order = params.theta.poly_order();
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double x = ga(rng);
    const double y = gb(rng);
    const double a = x / (x + y);
    Eigen::VectorXd mean = theta.col(order);
    double power = 1.0;
    for (int d = 1; d <= order; ++d) {
      power *= a;
      mean += theta.col(order - d) * power;
    }
    const Eigen::VectorXd r = row - mean;
    sum += norm * std::exp(-0.5 * r.dot(inverse * r));
  }
  return sum / draws;
}

// Random K-method bundle with moderate noise and slopes of magnitude 0.6 to 1.4.
inline ParameterBundle random_bundle(int k, int order, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd theta(k, order + 1);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c <= order; ++c) theta(r, c) = 0.4 * (u(rng) - 0.5);
    theta(r, order - 1) = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.6 + 0.8 * u(rng));
  }
  std::vector<double> sds(static_cast<std::size_t>(k));
  for (double& s : sds) s = 0.05 + 0.2 * u(rng);
  Eigen::MatrixXd cov = covariance_from_sds(sds, 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j) cov(i, j) = cov(j, i) = (u(rng) - 0.5) * 0.6 * sds[i] * sds[j];
  return ParameterBundle{CoefficientMatrix(theta), cholesky_factorize(cov),
                         PriorParams(1.0 + 4.0 * u(rng), 1.0 + 4.0 * u(rng))};
}

// The fixed K = 3, M = 1 scenario used by fit-level tests and the walkthrough.
inline ParameterBundle scenario_truth(double correlation = 0.3) {
  Eigen::MatrixXd theta(3, 2);
  theta << 0.9, 0.0, 1.1, 0.05, 1.0, -0.02;
  return ParameterBundle{CoefficientMatrix(theta),
                         cholesky_factorize(covariance_from_sds({0.05, 0.15, 0.10}, correlation)),
                         PriorParams(2.0, 5.0)};
}

inline ModelConfig scenario_config() { return ModelConfig{3, 1, 128}; }

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ngse_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ngse::testing
