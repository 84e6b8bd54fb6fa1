#include "ngse/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "ngse/errors.hpp"
#include "ngse/optimizer.hpp"

namespace ngse {

namespace {

constexpr double kJitterSigma = 0.3;
constexpr double kInitialNoiseFraction = 0.1;
constexpr double kInitialShape = 2.0;

Eigen::Index packed_length(const ModelConfig& config) {
  return config.num_parameters();
}

void check_data(const MeasurementSet& data, const ModelConfig& config) {
  config.validate();
  if (data.num_methods() != config.num_methods)
    throw DimensionMismatch("data has " + std::to_string(data.num_methods()) +
                            " methods but the model expects " +
                            std::to_string(config.num_methods));
  const int floor = minimum_patients(config);
  if (data.num_patients() < floor)
    throw InsufficientData("need at least " + std::to_string(floor) + " patients for K=" +
                           std::to_string(config.num_methods) +
                           ", M=" + std::to_string(config.poly_order) + " but got " +
                           std::to_string(data.num_patients()));
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Where the quadrature rule starts to under-resolve the integrand the search
// objective adds a barrier that rises smoothly from zero at kBarrierStart to
// infinity at kMaxResolutionRatio. Searches then slide along the edge of the
// trusted region instead of stalling against a hard wall.
constexpr double kBarrierStart = 0.5;

double resolution_barrier(const ParameterBundle& params, const QuadratureRule& rule,
                          double scale) {
  const double ratio = resolution_ratio(params, rule);
  if (!(ratio < kMaxResolutionRatio)) return kInf;
  const double t = (ratio - kBarrierStart) / (kMaxResolutionRatio - kBarrierStart);
  return t > 0.0 ? scale * t * t * t / (1.0 - t) : 0.0;
}

double packed_barrier(const ModelConfig& config, const QuadratureRule& rule, double scale,
                      const Eigen::VectorXd& x) {
  try {
    return resolution_barrier(unpack(PackedParams{x}, config), rule, scale);
  } catch (const Error&) {
    return kInf;
  }
}

double barrier_scale(const MeasurementSet& data) {
  return static_cast<double>(data.num_patients());
}

// The search objective: the NLL plus the resolution barrier, +infinity where
// unpacking fails.
double objective(const MeasurementSet& data, const ModelConfig& config,
                 const QuadratureRule& rule, const Eigen::VectorXd& x) {
  try {
    const ParameterBundle params = unpack(PackedParams{x}, config);
    const double barrier = resolution_barrier(params, rule, barrier_scale(data));
    if (!std::isfinite(barrier)) return kInf;
    const double nll = total_negative_log_likelihood(data, params, rule);
    return std::isfinite(nll) ? nll + barrier : kInf;
  } catch (const Error&) {
    return kInf;
  }
}

double objective_with_gradient(const MeasurementSet& data, const ModelConfig& config,
                               const QuadratureRule& rule, const Eigen::VectorXd& x,
                               Eigen::VectorXd& packed_gradient) {
  try {
    const ParameterBundle params = unpack(PackedParams{x}, config);
    const double scale = barrier_scale(data);
    const double barrier = resolution_barrier(params, rule, scale);
    if (!std::isfinite(barrier)) return kInf;
    LikelihoodGradient g;
    const double nll = MarginalLikelihood(params, rule).negative_log_likelihood(data.values(), g);
    if (!std::isfinite(nll)) return kInf;
    // Chain rule into packed coordinates: log-diagonal and log-shape entries
    // pick up a factor of the exponentiated value.
    const Eigen::Index k = config.num_methods;
    const Eigen::Index cols = config.poly_order + 1;
    const Eigen::MatrixXd& lower = params.cov.chol_factor();
    packed_gradient.resize(x.size());
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < k; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) packed_gradient(at++) = g.theta(r, c);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        packed_gradient(at++) = i == j ? g.factor(i, i) * lower(i, i) : g.factor(i, j);
    packed_gradient(at++) = g.alpha * params.prior.alpha;
    packed_gradient(at++) = g.beta * params.prior.beta;
    if (barrier > 0.0) {
      // The barrier needs no data, so central differences are cheap.
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-7 * std::max(1.0, std::fabs(x(i)));
        Eigen::VectorXd up = x;
        Eigen::VectorXd down = x;
        up(i) += h;
        down(i) -= h;
        const double b_up = packed_barrier(config, rule, scale, up);
        const double b_down = packed_barrier(config, rule, scale, down);
        packed_gradient(i) += std::isfinite(b_up) ? (b_up - b_down) / (2.0 * h) : kInf;
      }
    }
    return nll + barrier;
  } catch (const Error&) {
    return kInf;
  }
}

double sample_variance(const Eigen::VectorXd& column) {
  if (column.size() < 2) return 0.0;
  const double mean = column.mean();
  return (column.array() - mean).square().sum() / static_cast<double>(column.size() - 1);
}

template <class Task>
void run_parallel(int count, int threads, Task task) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void FitOptions::validate() const {
  if (n_starts < 1) throw DomainError("n_starts must be positive");
  if (max_iterations < 1) throw DomainError("max_iterations must be positive");
  if (!(nll_tolerance > 0.0)) throw DomainError("nll_tolerance must be positive");
  if (!(param_tolerance > 0.0)) throw DomainError("param_tolerance must be positive");
  if (threads < 0) throw DomainError("threads must be non-negative");
}

int default_thread_count() {
  int count = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("NGSE_THREADS")) {
    const int requested = std::atoi(env);
    if (requested > 0) count = requested;
  }
  return std::max(1, count);
}

PackedParams pack(const ParameterBundle& params) {
  const Eigen::Index k = params.theta.num_methods();
  const Eigen::Index cols = params.theta.coeffs().cols();
  if (params.cov.dim() != k) throw DimensionMismatch("coefficient rows do not match covariance");
  Eigen::VectorXd x(k * cols + k * (k + 1) / 2 + 2);
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) x(at++) = params.theta.coeffs()(r, c);
  const Eigen::MatrixXd& lower = params.cov.chol_factor();
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) x(at++) = i == j ? std::log(lower(i, j)) : lower(i, j);
  x(at++) = std::log(params.prior.alpha);
  x(at++) = std::log(params.prior.beta);
  return PackedParams{std::move(x)};
}

ParameterBundle unpack(const PackedParams& packed, const ModelConfig& config) {
  const Eigen::VectorXd& x = packed.values;
  if (x.size() != packed_length(config))
    throw DimensionMismatch("packed vector has length " + std::to_string(x.size()) +
                            ", expected " + std::to_string(packed_length(config)));
  const Eigen::Index k = config.num_methods;
  const Eigen::Index cols = config.poly_order + 1;
  Eigen::MatrixXd coeffs(k, cols);
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) coeffs(r, c) = x(at++);
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      lower(i, j) = i == j ? std::exp(x(at)) : x(at);
      ++at;
    }
  const double alpha = std::exp(x(at++));
  const double beta = std::exp(x(at++));
  return ParameterBundle{CoefficientMatrix(std::move(coeffs)), NoiseCovariance::from_factor(lower),
                         PriorParams(alpha, beta)};
}

int minimum_patients(const ModelConfig& config) {
  const int numerator = 3 * config.num_parameters();
  return (numerator + config.num_methods - 1) / config.num_methods;
}

std::vector<PackedParams> initial_guesses(const MeasurementSet& data, const ModelConfig& config,
                                          const FitOptions& options) {
  check_data(data, config);
  options.validate();
  const Eigen::Index k = config.num_methods;
  const int order = config.poly_order;

  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(k, order + 1);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index m = 0; m < k; ++m) {
    const Eigen::VectorXd column = data.values().col(m);
    const double lo = column.minCoeff();
    const double hi = column.maxCoeff();
    coeffs(m, order - 1) = hi - lo;
    coeffs(m, order) = lo;
    // Guard constant columns so the first guess stays positive definite.
    cov(m, m) = std::max(kInitialNoiseFraction * sample_variance(column), 1e-8);
  }
  const ParameterBundle first{CoefficientMatrix(coeffs), cholesky_factorize(cov),
                              PriorParams(kInitialShape, kInitialShape)};

  std::vector<PackedParams> guesses;
  guesses.reserve(static_cast<std::size_t>(options.n_starts));
  guesses.push_back(pack(first));

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, kJitterSigma);
  for (int s = 1; s < options.n_starts; ++s) {
    Eigen::MatrixXd jittered = coeffs;
    for (Eigen::Index r = 0; r < jittered.rows(); ++r)
      for (Eigen::Index c = 0; c < jittered.cols(); ++c) jittered(r, c) *= std::exp(normal(rng));
    Eigen::MatrixXd lower = first.cov.chol_factor();
    for (Eigen::Index i = 0; i < k; ++i) lower(i, i) *= std::exp(normal(rng));
    const double alpha = kInitialShape * std::exp(normal(rng));
    const double beta = kInitialShape * std::exp(normal(rng));
    guesses.push_back(pack(ParameterBundle{CoefficientMatrix(std::move(jittered)),
                                           NoiseCovariance::from_factor(lower),
                                           PriorParams(alpha, beta)}));
  }
  return guesses;
}

ParameterBundle flip(const ParameterBundle& params) {
  if (params.theta.poly_order() != 1) throw DomainError("flip is defined for linear models only");
  Eigen::MatrixXd coeffs = params.theta.coeffs();
  for (Eigen::Index r = 0; r < coeffs.rows(); ++r) {
    const double slope = coeffs(r, 0);
    coeffs(r, 0) = -slope;
    coeffs(r, 1) += slope;
  }
  return ParameterBundle{CoefficientMatrix(std::move(coeffs)), params.cov,
                         PriorParams(params.prior.beta, params.prior.alpha)};
}

EstimationResult canonicalize(EstimationResult result, const ModelConfig& config) {
  if (config.poly_order != 1) {
    result.warnings.push_back("not canonicalized: the a -> 1 - a symmetry is only resolved for M = 1");
    return result;
  }
  if (result.params.theta.coeffs()(0, 0) < 0.0) {
    result.params = flip(result.params);
    result.packed = pack(result.params);
  }
  return result;
}

Eigen::MatrixXd observed_information(const MeasurementSet& data, const PackedParams& packed,
                                     const ModelConfig& config) {
  const QuadratureRule rule = gauss_legendre_rule(config.quadrature_nodes);
  const Eigen::VectorXd& x = packed.values;
  const Eigen::Index n = x.size();
  Eigen::VectorXd steps(n);
  for (Eigen::Index i = 0; i < n; ++i) steps(i) = std::max(1e-4, 1e-4 * std::fabs(x(i)));

  auto gradient = [&](const Eigen::VectorXd& at) {
    Eigen::VectorXd g(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXd up = at;
      Eigen::VectorXd down = at;
      up(j) += steps(j);
      down(j) -= steps(j);
      g(j) = (objective(data, config, rule, up) - objective(data, config, rule, down)) /
             (2.0 * steps(j));
    }
    return g;
  };

  Eigen::MatrixXd hessian(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up(i) += steps(i);
    down(i) -= steps(i);
    hessian.row(i) = ((gradient(up) - gradient(down)) / (2.0 * steps(i))).transpose();
  }
  return hessian;
}

std::vector<double> standard_errors(const MeasurementSet& data, const EstimationResult& result,
                                    const ModelConfig& config) {
  const Eigen::MatrixXd hessian = observed_information(data, result.packed, config);
  if (!hessian.allFinite()) throw SingularInformation("observed information has non-finite entries");
  const Eigen::MatrixXd symmetric = 0.5 * (hessian + hessian.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(symmetric);
  if (llt.info() != Eigen::Success)
    throw SingularInformation("observed information is not positive definite");
  const Eigen::MatrixXd inverse = llt.solve(Eigen::MatrixXd::Identity(symmetric.rows(), symmetric.cols()));
  std::vector<double> errors(static_cast<std::size_t>(inverse.rows()));
  for (Eigen::Index i = 0; i < inverse.rows(); ++i) {
    const double variance = inverse(i, i);
    if (!(variance > 0.0) || !std::isfinite(variance))
      throw SingularInformation("inverse observed information has a non-positive diagonal");
    errors[static_cast<std::size_t>(i)] = std::sqrt(variance);
  }
  return errors;
}

EstimationResult fit(const MeasurementSet& data, const ModelConfig& config,
                     const FitOptions& options) {
  const std::vector<PackedParams> starts = initial_guesses(data, config, options);
  const QuadratureRule rule = gauss_legendre_rule(config.quadrature_nodes);

  LocalSearchOptions search;
  search.max_iterations = options.max_iterations;
  search.f_tolerance = options.nll_tolerance;
  search.x_tolerance = options.param_tolerance;

  const int count = static_cast<int>(starts.size());
  std::vector<LocalSearchResult> outcomes(starts.size());
  const Objective f = [&](const Eigen::VectorXd& x) { return objective(data, config, rule, x); };
  const ObjectiveWithGradient fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    return objective_with_gradient(data, config, rule, x, g);
  };
  run_parallel(count, options.threads > 0 ? options.threads : default_thread_count(),
               [&](int i) {
                 const auto idx = static_cast<std::size_t>(i);
                 outcomes[idx] = options.optimizer == Optimizer::simplex
                                     ? nelder_mead(f, starts[idx].values, search)
                                     : quasi_newton(fg, starts[idx].values, search);
               });

  std::vector<StartDiagnostic> diagnostics;
  int best = -1;
  for (int i = 0; i < count; ++i) {
    const LocalSearchResult& o = outcomes[static_cast<std::size_t>(i)];
    diagnostics.push_back({i, o.initial_f, o.f, o.iterations, o.converged});
    if (o.converged && std::isfinite(o.f) &&
        (best < 0 || o.f < outcomes[static_cast<std::size_t>(best)].f))
      best = i;
  }
  if (best < 0)
    throw NoConvergedStart("none of the " + std::to_string(count) +
                           " starts converged within " + std::to_string(options.max_iterations) +
                           " iterations");

  const LocalSearchResult& winner = outcomes[static_cast<std::size_t>(best)];
  PackedParams packed{winner.x};
  const ParameterBundle fitted = unpack(packed, config);
  EstimationResult result{fitted, packed, total_negative_log_likelihood(data, fitted, rule),
                          true, winner.iterations,
                          count, best, std::nullopt, std::move(diagnostics), {}};
  result = canonicalize(std::move(result), config);
  if (options.compute_std_errors) {
    try {
      result.std_errors = standard_errors(data, result, config);
    } catch (const SingularInformation& e) {
      result.warnings.push_back(std::string("standard errors unavailable: ") + e.what());
    }
  }
  return result;
}

}  // namespace ngse
