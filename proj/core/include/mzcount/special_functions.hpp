#pragma once

namespace mzcount {

/// Natural log of the gamma function for x > 0.
/// Throws std::domain_error for x <= 0.
double log_gamma(double x);

/// Digamma function psi(x) for x > 0.
double digamma(double x);

/// Trigamma function psi_1(x) for x > 0.
double trigamma(double x);

/// ln(n!) for n >= 0; small values are table lookups.
double log_factorial(int n);

/// log Gamma(n + x) - log Gamma(x) for integer n >= 0 and x > 0, evaluated as
/// sum_{k<n} log(x + k) for small n so large x does not cancel catastrophically.
double log_gamma_ratio(int n, double x);

/// psi(n + x) - psi(x) and psi_1(n + x) - psi_1(x), same stability rationale.
double digamma_diff(int n, double x);
double trigamma_diff(int n, double x);

} // namespace mzcount
