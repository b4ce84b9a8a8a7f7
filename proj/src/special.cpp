#include "crest/special.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace crest {

namespace {

void require_positive(double x, const char* fn) {
  if (!(x > 0.0)) {
    throw std::domain_error(std::string(fn) + ": argument must be positive, got " +
                            std::to_string(x));
  }
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  double result = 0.0;
  // Shift into the asymptotic range via psi(x) = psi(x+1) - 1/x.
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // psi(x) ~ ln x - 1/(2x) - sum B_2n / (2n x^2n)
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = inv2 * (1.0 / 12.0 -
                  inv2 * (1.0 / 120.0 -
                  inv2 * (1.0 / 252.0 -
                  inv2 * (1.0 / 240.0 -
                  inv2 * (1.0 / 132.0 -
                  inv2 * (691.0 / 32760.0 -
                  inv2 * (1.0 / 12.0)))))));
  result += std::log(x) - 0.5 * inv - series;
  return result;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double result = 0.0;
  // psi'(x) = psi'(x+1) + 1/x^2.
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  // psi'(x) ~ 1/x + 1/(2x^2) + sum B_2n / x^(2n+1)
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 1.0 +
                  inv * 0.5 +
                  inv2 * (1.0 / 6.0 -
                  inv2 * (1.0 / 30.0 -
                  inv2 * (1.0 / 42.0 -
                  inv2 * (1.0 / 30.0 -
                  inv2 * (5.0 / 66.0 -
                  inv2 * (691.0 / 2730.0 -
                  inv2 * (7.0 / 6.0)))))));
  result += inv * series;
  return result;
}

double lgamma_pos(double x) {
  require_positive(x, "lgamma");
  return std::lgamma(x);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace crest
