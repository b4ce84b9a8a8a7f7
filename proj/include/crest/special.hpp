#pragma once

// Scalar special functions used by the evidential losses. digamma and
// trigamma use the standard recurrence shift into asymptotic-series range;
// log-gamma delegates to the C library with an explicit domain check.

namespace crest {

// psi(x) for x > 0. Accurate to ~1e-12 relative on [1e-3, 1e6].
double digamma(double x);

// psi'(x) for x > 0 (derivative of digamma, needed for backward passes).
double trigamma(double x);

// log Gamma(x) for x > 0.
double lgamma_pos(double x);

// log(1 + exp(x)) without overflow.
double softplus(double x);

// d/dx softplus(x) = sigmoid(x).
double sigmoid(double x);

}  // namespace crest
