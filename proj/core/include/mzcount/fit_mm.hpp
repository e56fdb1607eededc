#pragma once

#include "mzcount/fit_common.hpp"

namespace mzcount {

struct SplitLikelihood {
  double ell1 = 0.0; // Bernoulli part over all rows
  double ell2 = 0.0; // truncated part over the nonzero rows
  double total = 0.0;
};

SplitLikelihood split_loglik(const ModelSpec& spec, const ParameterSet& params,
                             const std::vector<WeightedRow>& rows);

struct LogisticFit {
  Eigen::VectorXd gamma;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separation = false; // coefficients capped, SEs unreliable
};

/// Bernoulli likelihood of the nonzero-row indicator; plain Newton/IRLS.
LogisticFit fit_logistic_part(const std::vector<WeightedRow>& rows, int design_width,
                              const FitConfig& config = {});

struct TruncatedPartResult {
  ParameterSet params; // gamma is a zero placeholder (ell2 does not involve it)
  double ell2 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> ell2_trace;
};

/// MM ascent of the truncated part over the nonzero rows, with the Zhou-Lange
/// minorizer of -log(1 - f_Y(0)) and the per-case surrogate maximizers.
TruncatedPartResult fit_truncated_part(const std::vector<WeightedRow>& nonzero_rows,
                                       const ModelSpec& spec, const FitConfig& config = {});

/// Outer Zhou-Lange surrogate of the truncated part, anchored at `anchor`:
/// sum_i w_i [log f_Y(z_i|params) + (u'_i(anchor) - 1) log f_Y(0|params)].
/// Minorizes ell2 up to a constant and is tangent at the anchor.
double mm_outer_surrogate(const ModelSpec& spec, const ParameterSet& anchor,
                          const ParameterSet& params,
                          const std::vector<WeightedRow>& nonzero_rows);

/// Two-part fit: logistic part for gamma, MM truncated part for the rest.
FitResult fit_zero_modified(const ObservationSet& data, const ModelSpec& spec,
                            const FitConfig& config = {});

} // namespace mzcount
