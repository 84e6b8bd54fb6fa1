#include <algorithm>
#include <cmath>
#include <limits>

#include "ngse/errors.hpp"
#include "ngse/optimizer.hpp"

namespace ngse {

namespace {

constexpr int kMaxBacktracks = 40;
constexpr double kArmijo = 1e-4;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

LocalSearchResult quasi_newton(const ObjectiveWithGradient& objective, const Eigen::VectorXd& start,
                               const LocalSearchOptions& options) {
  const Eigen::Index n = start.size();
  if (n < 1) throw DimensionMismatch("quasi-Newton search needs at least one parameter");
  if (options.max_iterations < 1 || !(options.f_tolerance > 0.0) || !(options.x_tolerance > 0.0))
    throw DomainError("quasi-Newton options must be positive");

  int evaluations = 0;
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    ++evaluations;
    g.resize(n);
    const double v = objective(x, g);
    return std::isfinite(v) && g.allFinite() ? v : kInf;
  };

  LocalSearchResult result;
  Eigen::VectorXd x = start;
  Eigen::VectorXd g;
  double fx = f(x, g);
  result.initial_f = fx;

  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;  // inv_hessian is the unscaled identity
  int iteration = 0;
  while (std::isfinite(fx) && iteration < options.max_iterations) {
    ++iteration;
    Eigen::VectorXd direction = -inv_hessian * g;
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {
      inv_hessian.setIdentity();
      fresh = true;
      direction = -g;
      slope = g.dot(direction);
      if (!(slope < 0.0)) {
        result.converged = true;  // zero gradient
        break;
      }
    }

    // Backtracking with quadratic interpolation, safeguarded to [0.1, 0.5].
    double step = 1.0;
    double f_new = kInf;
    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new;
    bool accepted = false;
    for (int b = 0; b < kMaxBacktracks; ++b) {
      x_new = x + step * direction;
      f_new = f(x_new, g_new);
      if (f_new <= fx + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      double next = 0.5 * step;
      if (std::isfinite(f_new)) {
        const double denom = 2.0 * (f_new - fx - slope * step);
        if (denom > 0.0) next = -slope * step * step / denom;
      }
      step = std::clamp(next, 0.1 * step, 0.5 * step);
    }

    if (!accepted) {
      // No descent along the quasi-Newton direction: either x is optimal to
      // within rounding, or the curvature model went stale.
      if (direction.cwiseAbs().maxCoeff() < options.x_tolerance) {
        result.converged = true;
        break;
      }
      if (!fresh) {
        inv_hessian.setIdentity();
        fresh = true;
        continue;
      }
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double f_change = fx - f_new;
    x = std::move(x_new);
    fx = f_new;
    g = std::move(g_new);

    // Judged on the full quasi-Newton step: a step the line search shortened
    // says nothing about proximity to the optimum.
    if (std::fabs(f_change) < options.f_tolerance &&
        direction.cwiseAbs().maxCoeff() < options.x_tolerance) {
      result.converged = true;
      break;
    }

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        inv_hessian *= sy / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      inv_hessian = left * inv_hessian * left.transpose() + rho * s * s.transpose();
    }
  }

  result.x = x;
  result.f = fx;
  result.iterations = iteration;
  result.evaluations = evaluations;
  return result;
}

LocalSearchResult quasi_newton(const Objective& objective, const Eigen::VectorXd& start,
                               const LocalSearchOptions& options) {
  if (!(options.gradient_step > 0.0)) throw DomainError("gradient step must be positive");
  int inner = 0;
  auto value = [&](const Eigen::VectorXd& x) {
    ++inner;
    const double v = objective(x);
    return std::isfinite(v) ? v : kInf;
  };
  const ObjectiveWithGradient with_gradient = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double fx = value(x);
    if (!std::isfinite(fx)) return fx;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = options.gradient_step * std::max(1.0, std::fabs(x(i)));
      Eigen::VectorXd up = x;
      Eigen::VectorXd down = x;
      up(i) += h;
      down(i) -= h;
      const double f_up = value(up);
      const double f_down = value(down);
      if (std::isfinite(f_up) && std::isfinite(f_down))
        g(i) = (f_up - f_down) / (2.0 * h);
      else if (std::isfinite(f_up))
        g(i) = (f_up - fx) / h;
      else if (std::isfinite(f_down))
        g(i) = (fx - f_down) / h;
      else
        return kInf;
    }
    return fx;
  };
  LocalSearchResult result = quasi_newton(with_gradient, start, options);
  result.evaluations = inner;
  return result;
}

}  // namespace ngse
