#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mzcount {

/// Positive-support building blocks for hurdle models: zero-truncated and
/// unit-shifted Poisson / negative binomial.
enum class MarginKind { ZTP, ZTNB, USP, USNB };

bool margin_has_dispersion(MarginKind kind);
std::string margin_kind_name(MarginKind kind);
std::optional<MarginKind> parse_margin_kind(std::string_view name);

struct UnivariateParams {
  double lambda = 1.0;             // location / rate
  std::optional<double> phi;       // dispersion, NB-based kinds
  std::optional<double> pi0;       // Bernoulli mixing probability
};

double log_pmf_poisson(int y, double lambda);
double pmf_poisson(int y, double lambda);

double log_pmf_negbin(int y, double lambda, double phi);
double pmf_negbin(int y, double lambda, double phi);

/// Zero mass of the untruncated parent of a ZT kind (Poisson or NB at 0).
double parent_log_zero_mass(MarginKind kind, double lambda, double phi);

/// pmf of the positive-support margin W at w >= 1.
double log_pmf_margin(int w, MarginKind kind, const UnivariateParams& params);
double pmf_margin(int w, MarginKind kind, const UnivariateParams& params);

/// Two-part (hurdle) pmf: mass 1 - pi0_prime at zero, pi0_prime * f_W above.
double log_pmf_zero_modified(int z, MarginKind kind, const UnivariateParams& params,
                             double pi0_prime);
double pmf_zero_modified(int z, MarginKind kind, const UnivariateParams& params,
                         double pi0_prime);

// ---------------------------------------------------------------------------
// Standalone fitting of a positive-support margin (intercept only), with the
// goodness-of-fit cells used for reporting: counts 1..5 plus one pooled ">=6"
// cell.

struct TruncatedMarginFit {
  UnivariateParams params;
  double loglik = 0.0;
  std::vector<long> observed_cells;   // 6 entries: 1..5, >=6
  std::vector<double> expected_cells; // same layout
  double chi_square = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;
};

struct MarginFitConfig {
  int max_iter = 500;
  double loglik_tol = 1e-10; // relative
  double param_tol = 1e-8;   // sup norm in the unconstrained scale
};

TruncatedMarginFit fit_truncated_margin(std::span<const int> positive_counts,
                                        MarginKind kind,
                                        const MarginFitConfig& config = {});

// ---------------------------------------------------------------------------
// Margin regression objective: log-likelihood of W_i ~ margin(kind) with
// log-link location lambda_i = exp(x_i' alpha), optional per-row weights.
// theta layout: [alpha (q entries); log_phi] (log_phi only for NB kinds).
// Gradients are analytic; the negative Hessian is a central difference of the
// gradient (the blocks are tiny).

class TruncatedMarginObjective {
 public:
  TruncatedMarginObjective(std::vector<int> counts, Eigen::MatrixXd design,
                           std::vector<double> weights, MarginKind kind);

  int dim() const { return static_cast<int>(design_.cols()) + (margin_has_dispersion(kind_) ? 1 : 0); }
  double value(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd negative_hessian(const Eigen::VectorXd& theta) const;

 private:
  std::vector<int> counts_;
  Eigen::MatrixXd design_;
  std::vector<double> weights_;
  MarginKind kind_;
};

// ---------------------------------------------------------------------------
// Sampling. Deterministic given the seed.

std::vector<int> sample_poisson(double lambda, int count, std::uint64_t seed);
std::vector<int> sample_negbin(double lambda, double phi, int count, std::uint64_t seed);
std::vector<int> sample_margin(MarginKind kind, const UnivariateParams& params, int count,
                               std::uint64_t seed);
/// Zero-inflated draw: U0*Y with U0 ~ Bernoulli(pi0), Y Poisson or NB.
std::vector<int> sample_zero_inflated(const UnivariateParams& params, int count,
                                      std::uint64_t seed);
/// Zero-modified draw: U0'*W with U0' ~ Bernoulli(pi0_prime).
std::vector<int> sample_zero_modified(MarginKind kind, const UnivariateParams& params,
                                      double pi0_prime, int count, std::uint64_t seed);

} // namespace mzcount
