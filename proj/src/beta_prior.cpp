#include "ngse/beta_prior.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "ngse/errors.hpp"

namespace ngse {

namespace {

// Coefficients for g = 671/128 (Numerical Recipes, 3rd ed., gammln).
constexpr std::array<double, 14> kLanczos = {
    57.1562356658629235,     -59.5979603554754912,     14.1360979747417471,
    -0.491913816097620199,   .339946499848118887e-4,   .465236289270485756e-4,
    -.983744753048795646e-4, .158088703224912494e-3,   -.210264441724104883e-3,
    .217439618115212643e-3,  -.164318106536763890e-3,  .844182239838527433e-4,
    -.261908384015814087e-4, .368991826595316234e-5};

// Continued fraction for the incomplete beta, modified Lentz evaluation.
double incomplete_beta_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) break;
  }
  return h;
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma requires a positive argument");
  double y = x;
  const double tmp0 = x + 671.0 / 128.0;
  const double tmp = (x + 0.5) * std::log(tmp0) - tmp0;
  double ser = 0.999999999999997092;
  for (double c : kLanczos) ser += c / ++y;
  return tmp + std::log(2.5066282746310005 * ser / x);
}

double log_beta_function(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("beta function arguments must be positive");
  return log_gamma(alpha) + log_gamma(beta) - log_gamma(alpha + beta);
}

double beta_log_pdf(double a, const PriorParams& prior) {
  if (!(a >= 0.0 && a <= 1.0)) throw DomainError("beta density argument must lie in [0, 1]");
  const double inf = std::numeric_limits<double>::infinity();
  const double lnb = log_beta_function(prior.alpha, prior.beta);
  double value = -lnb;
  if (prior.alpha != 1.0) {
    if (a == 0.0) return prior.alpha > 1.0 ? -inf : inf;
    value += (prior.alpha - 1.0) * std::log(a);
  }
  if (prior.beta != 1.0) {
    if (a == 1.0) return prior.beta > 1.0 ? -inf : inf;
    value += (prior.beta - 1.0) * std::log1p(-a);
  }
  return value;
}

double regularized_incomplete_beta(double x, const PriorParams& prior) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta argument must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double a = prior.alpha;
  const double b = prior.beta;
  const double log_front =
      a * std::log(x) + b * std::log1p(-x) - log_beta_function(a, b);
  // The fraction converges fastest on the side of the mean.
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * incomplete_beta_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * incomplete_beta_fraction(b, a, 1.0 - x) / b;
}

double beta_quantile(double u, const PriorParams& prior, double tolerance) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_incomplete_beta(mid, prior) < u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ngse
