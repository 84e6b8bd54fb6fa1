#include "ngse/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ngse/errors.hpp"

namespace ngse {

namespace {

struct Simplex {
  std::vector<Eigen::VectorXd> vertices;
  std::vector<double> values;
};

class CountingObjective {
 public:
  explicit CountingObjective(const Objective& f) : f_(f) {}

  double operator()(const Eigen::VectorXd& x) {
    ++count_;
    const double v = f_(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  }

  int count() const { return count_; }

 private:
  const Objective& f_;
  int count_ = 0;
};

Simplex build_simplex(CountingObjective& f, const Eigen::VectorXd& center, double best_value,
                      double step) {
  const Eigen::Index n = center.size();
  Simplex s;
  s.vertices.reserve(static_cast<std::size_t>(n + 1));
  s.vertices.push_back(center);
  s.values.push_back(best_value);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v = center;
    v(i) += step * std::max(1.0, std::fabs(center(i)));
    s.values.push_back(f(v));
    s.vertices.push_back(std::move(v));
  }
  return s;
}

// Stable sort by value so ties resolve by insertion order.
void order(Simplex& s) {
  std::vector<std::size_t> idx(s.values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
  Simplex sorted;
  sorted.vertices.reserve(idx.size());
  sorted.values.reserve(idx.size());
  for (std::size_t i : idx) {
    sorted.vertices.push_back(std::move(s.vertices[i]));
    sorted.values.push_back(s.values[i]);
  }
  s = std::move(sorted);
}

bool within_tolerance(const Simplex& s, const LocalSearchOptions& options) {
  const double spread = s.values.back() - s.values.front();
  if (!(spread < options.f_tolerance)) return false;
  double diameter = 0.0;
  for (std::size_t i = 1; i < s.vertices.size(); ++i)
    diameter = std::max(diameter, (s.vertices[i] - s.vertices[0]).cwiseAbs().maxCoeff());
  return diameter < options.x_tolerance;
}

}  // namespace

LocalSearchResult nelder_mead(const Objective& objective, const Eigen::VectorXd& start,
                              const LocalSearchOptions& options) {
  const Eigen::Index n = start.size();
  if (n < 1) throw DimensionMismatch("simplex search needs at least one parameter");
  if (options.max_iterations < 1 || !(options.f_tolerance > 0.0) || !(options.x_tolerance > 0.0))
    throw DomainError("simplex search options must be positive");

  const double dim = static_cast<double>(n);
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / dim;
  const double contract = 0.75 - 0.5 / dim;
  const double shrink = n > 1 ? 1.0 - 1.0 / dim : 0.5;

  CountingObjective f(objective);
  LocalSearchResult result;
  result.initial_f = f(start);
  Simplex s = build_simplex(f, start, result.initial_f, options.initial_step);
  order(s);

  bool restarted = false;
  double value_at_restart = std::numeric_limits<double>::infinity();
  int iteration = 0;
  while (iteration < options.max_iterations) {
    if (within_tolerance(s, options)) {
      if (restarted && !(s.values.front() < value_at_restart - options.f_tolerance)) {
        result.converged = true;
        break;
      }
      restarted = true;
      value_at_restart = s.values.front();
      const Eigen::VectorXd best = s.vertices.front();
      s = build_simplex(f, best, value_at_restart, options.initial_step);
      order(s);
      continue;
    }
    ++iteration;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += s.vertices[static_cast<std::size_t>(i)];
    centroid /= dim;
    const Eigen::VectorXd& worst = s.vertices.back();
    const double f_best = s.values.front();
    const double f_second_worst = s.values[static_cast<std::size_t>(n - 1)];
    const double f_worst = s.values.back();

    Eigen::VectorXd reflected = centroid + reflect * (centroid - worst);
    const double f_reflected = f(reflected);

    bool do_shrink = false;
    if (f_reflected < f_best) {
      Eigen::VectorXd expanded = centroid + expand * (reflected - centroid);
      const double f_expanded = f(expanded);
      if (f_expanded < f_reflected) {
        s.vertices.back() = std::move(expanded);
        s.values.back() = f_expanded;
      } else {
        s.vertices.back() = std::move(reflected);
        s.values.back() = f_reflected;
      }
    } else if (f_reflected < f_second_worst) {
      s.vertices.back() = std::move(reflected);
      s.values.back() = f_reflected;
    } else if (f_reflected < f_worst) {
      Eigen::VectorXd outside = centroid + contract * (reflected - centroid);
      const double f_outside = f(outside);
      if (f_outside <= f_reflected) {
        s.vertices.back() = std::move(outside);
        s.values.back() = f_outside;
      } else {
        do_shrink = true;
      }
    } else {
      Eigen::VectorXd inside = centroid - contract * (centroid - worst);
      const double f_inside = f(inside);
      if (f_inside < f_worst) {
        s.vertices.back() = std::move(inside);
        s.values.back() = f_inside;
      } else {
        do_shrink = true;
      }
    }

    if (do_shrink) {
      const Eigen::VectorXd best = s.vertices.front();
      for (std::size_t i = 1; i < s.vertices.size(); ++i) {
        s.vertices[i] = best + shrink * (s.vertices[i] - best);
        s.values[i] = f(s.vertices[i]);
      }
    }
    order(s);
  }
  if (!result.converged && within_tolerance(s, options) && restarted &&
      !(s.values.front() < value_at_restart - options.f_tolerance))
    result.converged = true;

  result.x = s.vertices.front();
  result.f = s.values.front();
  result.iterations = iteration;
  result.evaluations = f.count();
  return result;
}

}  // namespace ngse
