#pragma once

#include "mzcount/fit_common.hpp"

namespace mzcount {

struct GridSpec {
  Eigen::VectorXi upper;
  double tail_mass_bound = 1e-10;
};

/// Brute-force total pmf mass over the grid box; normalization oracle.
double grid_total_mass(const ModelSpec& spec, const ParameterSet& params,
                       const Eigen::VectorXd& covariates, const GridSpec& grid);

/// Central differences with relative step (default 1e-5).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& objective,
                            const Eigen::VectorXd& point, double rel_step = 1e-5);

struct DirectMleResult {
  ParameterSet params;
  double loglik = -std::numeric_limits<double>::infinity();
  bool identifiable = true;
};

/// Direct search (multi-start Nelder-Mead in unconstrained scale) over the
/// observed log-likelihood of an intercept-only model; the independent check
/// on both fitting engines.
DirectMleResult direct_mle_small(const ObservationSet& data, const ModelSpec& spec);

/// Generic Nelder-Mead maximizer, exposed for tests.
Eigen::VectorXd nelder_mead_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                     Eigen::VectorXd start, double initial_step = 0.25,
                                     int max_evals = 50000, double tol = 1e-9);

struct SelfCheckReport {
  int passed = 0;
  int failed = 0;
  std::vector<std::string> messages;
  bool ok() const { return failed == 0; }
};

/// Quick battery: normalization, engine-vs-oracle equivalence, moment
/// consistency, and a gradient spot check.
SelfCheckReport run_self_check(std::uint64_t seed = 20240901);

} // namespace mzcount
