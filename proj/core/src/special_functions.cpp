#include "mzcount/special_functions.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace mzcount {

namespace {

// Lanczos approximation, g = 7, 9 coefficients.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,    12.507343278686905,
    -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

double lanczos_log_gamma(double x) {
  // valid for x >= 0.5
  const double t = x + kLanczosG - 0.5;
  double series = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) {
    series += kLanczos[i] / (x - 1.0 + static_cast<double>(i));
  }
  return kHalfLogTwoPi + (x - 0.5) * std::log(t) - t + std::log(series);
}

void require_positive(double x, const char* what) {
  if (!(x > 0.0)) {
    throw std::domain_error(std::string(what) + " requires x > 0");
  }
}

} // namespace

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  if (x < 0.5) {
    // reflection: Gamma(x) = Gamma(x+1)/x
    return lanczos_log_gamma(x + 1.0) - std::log(x);
  }
  return lanczos_log_gamma(x);
}

double digamma(double x) {
  require_positive(x, "digamma");
  double result = 0.0;
  // recurrence psi(x) = psi(x+1) - 1/x until x >= 8
  while (x < 8.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // asymptotic series
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                    inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return result;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double result = 0.0;
  // recurrence psi_1(x) = psi_1(x+1) + 1/x^2
  while (x < 8.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv +
                   inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 -
                           inv2 * (1.0 / 30.0)))));
  return result;
}

double log_factorial(int n) {
  if (n < 0) throw std::domain_error("log_factorial requires n >= 0");
  static const std::array<double, 32> table = [] {
    std::array<double, 32> t{};
    t[0] = 0.0;
    for (int i = 1; i < 32; ++i) t[i] = t[i - 1] + std::log(static_cast<double>(i));
    return t;
  }();
  if (n < static_cast<int>(table.size())) return table[static_cast<std::size_t>(n)];
  return log_gamma(static_cast<double>(n) + 1.0);
}

double log_gamma_ratio(int n, double x) {
  if (n < 0) throw std::domain_error("log_gamma_ratio requires n >= 0");
  require_positive(x, "log_gamma_ratio");
  if (n < 64) {
    double out = 0.0;
    for (int k = 0; k < n; ++k) out += std::log(x + k);
    return out;
  }
  return log_gamma(n + x) - log_gamma(x);
}

double digamma_diff(int n, double x) {
  if (n < 0) throw std::domain_error("digamma_diff requires n >= 0");
  require_positive(x, "digamma_diff");
  if (n < 64) {
    double out = 0.0;
    for (int k = 0; k < n; ++k) out += 1.0 / (x + k);
    return out;
  }
  return digamma(n + x) - digamma(x);
}

double trigamma_diff(int n, double x) {
  if (n < 0) throw std::domain_error("trigamma_diff requires n >= 0");
  require_positive(x, "trigamma_diff");
  if (n < 64) {
    double out = 0.0;
    for (int k = 0; k < n; ++k) out -= 1.0 / ((x + k) * (x + k));
    return out;
  }
  return trigamma(n + x) - trigamma(x);
}

} // namespace mzcount
