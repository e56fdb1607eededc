#pragma once

#include "mzcount/fit_common.hpp"

namespace mzcount {

/// Posterior probability that an all-zero row is a structural zero, given the
/// mixing probability pi0 and the base zero mass f_Y(0).
inline double zi_u_prime(double pi0, double log_f0) {
  const double f0 = std::exp(log_f0);
  return (1.0 - pi0) / (1.0 - pi0 + pi0 * f0);
}

/// EM estimation for the zero-inflated families. gamma, beta_j (and the
/// dispersion where present) each take one safeguarded Newton step per
/// iteration; lambda0 uses its closed-form ratio update.
FitResult fit_zero_inflated(const ObservationSet& data, const ModelSpec& spec,
                            const FitConfig& config = {});

} // namespace mzcount
