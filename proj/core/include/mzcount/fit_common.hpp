#pragma once

#include <functional>

#include "mzcount/multivariate.hpp"

namespace mzcount {

struct FitConfig {
  int max_iter = 50000;
  double loglik_tol = 1e-8;    // relative change
  double param_tol = 1e-6;     // sup norm
  bool surrogate_check = false; // MM: assert minorization numerically
};

struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Coefficient {
  std::string name;
  double value = 0.0;
  std::optional<double> std_error;
  std::optional<double> t_ratio;
};

struct FitResult {
  ModelSpec spec;
  ParameterSet params;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int n_params = 0;
  long n_obs = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;
  std::vector<Coefficient> coefficients;
  std::optional<double> ell1; // zero-modified split, Bernoulli part
  std::optional<double> ell2; // zero-modified split, truncated part
  bool separation_flag = false;
};

/// One distinct (z, x) cell with its multiplicity. Likelihoods, E-steps and
/// gradient accumulations are exact under this compression; intercept-only
/// fits on large portfolios collapse to a handful of cells.
struct WeightedRow {
  Eigen::VectorXi z;
  Eigen::VectorXd x;
  double weight = 1.0;
};

std::vector<WeightedRow> compress_rows(const ObservationSet& data);

double observed_loglik(const ModelSpec& spec, const ParameterSet& params,
                       const std::vector<WeightedRow>& rows);

// ---------------------------------------------------------------------------
// Maximization blocks. Each is a closed-over objective with analytic value and
// gradient (the displayed Q derivatives) so tests can check them against
// finite differences directly.

struct QBlock {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> negative_hessian;
};

/// sum_i a_i log pi_i + b_i log(1 - pi_i), pi_i = logistic(x_i' theta).
QBlock bernoulli_block(Eigen::MatrixXd design, Eigen::VectorXd a, Eigen::VectorXd b);

/// sum_i a_i eta_i - b_i exp(eta_i), eta_i = x_i' theta. Covers the Poisson
/// style Q functions: a carries the (weighted) counts, b the E-step weights.
QBlock poisson_block(Eigen::MatrixXd design, Eigen::VectorXd a, Eigen::VectorXd b);

/// Weighted negative binomial margin in theta = [beta; log phi]:
/// sum_i w_i log NB(z_i; lambda_i, phi) + v_i phi log(phi/(lambda_i+phi)).
/// w = tau for the EM Q functions, (w=1, v=u'-1) for the MM surrogate.
QBlock nb_margin_block(Eigen::MatrixXd design, Eigen::VectorXd z, Eigen::VectorXd w,
                       Eigen::VectorXd v);

/// Shared gamma-mixing dispersion in theta = [log phi]:
/// sum_i c_i (phi log phi - log Gamma(phi)) + d_i phi.
QBlock dispersion_block(Eigen::VectorXd c, Eigen::VectorXd d);

// ---------------------------------------------------------------------------
// Flat parameter vector round trip. Order: gamma, beta_1..m, alpha_1..m
// (hurdle), phi entries, lambda0. When log_scale_positive is set, phi and
// lambda0 travel in log scale (for unconstrained searches); otherwise natural
// scale (for observed-information standard errors).

struct PackedParams {
  Eigen::VectorXd values;
  std::vector<std::string> names;
};

PackedParams pack_parameters(const ModelSpec& spec, const ParameterSet& params, int p,
                             bool log_scale_positive = false);
ParameterSet unpack_parameters(const ModelSpec& spec, const Eigen::VectorXd& values, int p,
                               bool log_scale_positive = false);

/// Central-difference observed-information standard errors in natural scale.
/// Singular information degrades to absent SEs rather than failing.
void attach_standard_errors(FitResult& result, const std::vector<WeightedRow>& rows);

/// Shared initialization: gamma from the nonzero-row fraction, beta from log
/// margin means over nonzero rows (0.05 floor), phi = 1, lambda0 = 0.1 times
/// the smallest margin mean. Non-intercept coefficients start at zero.
ParameterSet initial_parameters(const ModelSpec& spec, const std::vector<WeightedRow>& rows,
                                int p);

/// Fill aic/bic/n_params/coefficients after params and loglik are set.
void finalize_fit(FitResult& result, const std::vector<WeightedRow>& rows, int p);

/// Dispatch across the three engines by family.
FitResult fit_model(const ObservationSet& data, const ModelSpec& spec,
                    const FitConfig& config = {});

} // namespace mzcount
