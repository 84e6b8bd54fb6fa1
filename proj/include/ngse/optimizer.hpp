#pragma once

#include <functional>

#include <Eigen/Dense>

namespace ngse {

using Objective = std::function<double(const Eigen::VectorXd&)>;
// Returns the value and writes the gradient into the second argument. The
// gradient is only read when the value is finite.
using ObjectiveWithGradient = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Shared stopping rule: the search has converged once successive objective
// values differ by less than f_tolerance and the search region (simplex
// diameter, or step length for the quasi-Newton search) is below
// x_tolerance in the infinity norm.
struct LocalSearchOptions {
  int max_iterations = 2000;
  double f_tolerance = 1e-8;
  double x_tolerance = 1e-6;
  // Simplex only: initial edge along coordinate i is initial_step * max(1, |x0_i|).
  double initial_step = 0.1;
  // Quasi-Newton only: central-difference step is gradient_step * max(1, |x_i|).
  double gradient_step = 1e-5;
};

struct LocalSearchResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double initial_f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Simplex minimization with dimension-adaptive coefficients (reflection 1,
// expansion 1 + 2/n, contraction 3/4 - 1/(2n), shrink 1 - 1/n). After the
// tolerances are met the simplex is rebuilt once around the best vertex;
// convergence is declared only if the restart cannot improve on it.
// Non-finite objective values are treated as +infinity.
LocalSearchResult nelder_mead(const Objective& objective, const Eigen::VectorXd& start,
                              const LocalSearchOptions& options);

// BFGS with a backtracking line search. Converges when an accepted step
// changes f by less than f_tolerance and the full quasi-Newton step is below
// x_tolerance in every coordinate, or when no descent is possible and that
// step is already below x_tolerance. Non-finite values act as walls the
// line search backs off from.
LocalSearchResult quasi_newton(const ObjectiveWithGradient& objective, const Eigen::VectorXd& start,
                               const LocalSearchOptions& options);

// Same search on central-difference gradients (one-sided next to a wall).
LocalSearchResult quasi_newton(const Objective& objective, const Eigen::VectorXd& start,
                               const LocalSearchOptions& options);

}  // namespace ngse
