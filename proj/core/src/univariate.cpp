#include "mzcount/univariate.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mzcount/newton.hpp"
#include "mzcount/rng.hpp"
#include "mzcount/special_functions.hpp"

namespace mzcount {

namespace {

constexpr int kMaxRejections = 1000000;

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::domain_error("lambda must be positive");
}

void check_phi(double phi) {
  if (!(phi > 0.0) || !std::isfinite(phi))
    throw std::domain_error("phi must be positive");
}

double require_phi(const UnivariateParams& params) {
  if (!params.phi) throw std::domain_error("margin kind requires a dispersion phi");
  check_phi(*params.phi);
  return *params.phi;
}

} // namespace

bool margin_has_dispersion(MarginKind kind) {
  return kind == MarginKind::ZTNB || kind == MarginKind::USNB;
}

std::string margin_kind_name(MarginKind kind) {
  switch (kind) {
    case MarginKind::ZTP: return "ztp";
    case MarginKind::ZTNB: return "ztnb";
    case MarginKind::USP: return "usp";
    case MarginKind::USNB: return "usnb";
  }
  return "?";
}

std::optional<MarginKind> parse_margin_kind(std::string_view name) {
  if (name == "ztp") return MarginKind::ZTP;
  if (name == "ztnb") return MarginKind::ZTNB;
  if (name == "usp") return MarginKind::USP;
  if (name == "usnb") return MarginKind::USNB;
  return std::nullopt;
}

double log_pmf_poisson(int y, double lambda) {
  if (y < 0) throw std::domain_error("count must be nonnegative");
  check_lambda(lambda);
  return y * std::log(lambda) - lambda - log_factorial(y);
}

double pmf_poisson(int y, double lambda) { return std::exp(log_pmf_poisson(y, lambda)); }

namespace {

// phi * log(phi / (lambda + phi)), stable as phi -> infinity
double log_nb_zero_mass(double lambda, double phi) {
  return phi * std::log1p(-lambda / (lambda + phi));
}

} // namespace

double log_pmf_negbin(int y, double lambda, double phi) {
  if (y < 0) throw std::domain_error("count must be nonnegative");
  check_lambda(lambda);
  check_phi(phi);
  return log_gamma_ratio(y, phi) - log_factorial(y) +
         y * (std::log(lambda) - std::log(lambda + phi)) + log_nb_zero_mass(lambda, phi);
}

double pmf_negbin(int y, double lambda, double phi) {
  return std::exp(log_pmf_negbin(y, lambda, phi));
}

double parent_log_zero_mass(MarginKind kind, double lambda, double phi) {
  switch (kind) {
    case MarginKind::ZTP:
    case MarginKind::USP:
      return -lambda;
    case MarginKind::ZTNB:
    case MarginKind::USNB:
      return log_nb_zero_mass(lambda, phi);
  }
  return 0.0;
}

double log_pmf_margin(int w, MarginKind kind, const UnivariateParams& params) {
  if (w <= 0) throw std::domain_error("margin support is the positive integers");
  const double lambda = params.lambda;
  switch (kind) {
    case MarginKind::ZTP:
      check_lambda(lambda);
      return log_pmf_poisson(w, lambda) - std::log1p(-std::exp(-lambda));
    case MarginKind::USP:
      return log_pmf_poisson(w - 1, lambda);
    case MarginKind::ZTNB: {
      const double phi = require_phi(params);
      const double log_p0 = parent_log_zero_mass(kind, lambda, phi);
      return log_pmf_negbin(w, lambda, phi) - std::log1p(-std::exp(log_p0));
    }
    case MarginKind::USNB:
      return log_pmf_negbin(w - 1, lambda, require_phi(params));
  }
  return -std::numeric_limits<double>::infinity();
}

double pmf_margin(int w, MarginKind kind, const UnivariateParams& params) {
  return std::exp(log_pmf_margin(w, kind, params));
}

double log_pmf_zero_modified(int z, MarginKind kind, const UnivariateParams& params,
                             double pi0_prime) {
  if (z < 0) throw std::domain_error("count must be nonnegative");
  if (!(pi0_prime > 0.0 && pi0_prime < 1.0))
    throw std::domain_error("pi0_prime must lie in (0,1)");
  if (z == 0) return std::log1p(-pi0_prime);
  return std::log(pi0_prime) + log_pmf_margin(z, kind, params);
}

double pmf_zero_modified(int z, MarginKind kind, const UnivariateParams& params,
                         double pi0_prime) {
  return std::exp(log_pmf_zero_modified(z, kind, params, pi0_prime));
}

// ---------------------------------------------------------------------------

TruncatedMarginObjective::TruncatedMarginObjective(std::vector<int> counts,
                                                   Eigen::MatrixXd design,
                                                   std::vector<double> weights,
                                                   MarginKind kind)
    : counts_(std::move(counts)), design_(std::move(design)),
      weights_(std::move(weights)), kind_(kind) {
  if (static_cast<Eigen::Index>(counts_.size()) != design_.rows() ||
      counts_.size() != weights_.size()) {
    throw std::invalid_argument("TruncatedMarginObjective: size mismatch");
  }
  for (int w : counts_) {
    if (w < 1) throw std::domain_error("truncated margin observations must be >= 1");
  }
}

double TruncatedMarginObjective::value(const Eigen::VectorXd& theta) const {
  const auto q = design_.cols();
  const bool disp = margin_has_dispersion(kind_);
  if (theta.size() != q + (disp ? 1 : 0))
    throw std::invalid_argument("theta size mismatch");
  UnivariateParams p;
  if (disp) p.phi = std::exp(theta[q]);
  double total = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const double eta = design_.row(static_cast<Eigen::Index>(i)) * theta.head(q);
    if (!std::isfinite(eta) || std::abs(eta) > 40.0)
      return -std::numeric_limits<double>::infinity();
    p.lambda = std::exp(eta);
    total += weights_[i] * log_pmf_margin(counts_[i], kind_, p);
  }
  return std::isfinite(total) ? total : -std::numeric_limits<double>::infinity();
}

Eigen::VectorXd TruncatedMarginObjective::gradient(const Eigen::VectorXd& theta) const {
  const auto q = design_.cols();
  const bool disp = margin_has_dispersion(kind_);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
  const double phi = disp ? std::exp(theta[q]) : 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const auto row = design_.row(static_cast<Eigen::Index>(i));
    const double eta = row * theta.head(q);
    const double lambda = std::exp(eta);
    const int w = counts_[i];
    const double wt = weights_[i];
    double d_eta = 0.0;
    double d_phi = 0.0;
    switch (kind_) {
      case MarginKind::USP:
        d_eta = (w - 1) - lambda;
        break;
      case MarginKind::ZTP:
        d_eta = w - lambda - lambda / std::expm1(lambda);
        break;
      case MarginKind::USNB: {
        const int y = w - 1;
        d_eta = (y - lambda) * phi / (lambda + phi);
        d_phi = digamma_diff(y, phi) + std::log1p(-lambda / (lambda + phi)) +
                (lambda - y) / (lambda + phi);
        break;
      }
      case MarginKind::ZTNB: {
        const double log_p0 = log_nb_zero_mass(lambda, phi);
        const double p0 = std::exp(log_p0);
        const double ratio = p0 / (1.0 - p0);
        d_eta = (w - lambda) * phi / (lambda + phi) -
                ratio * phi * lambda / (lambda + phi);
        d_phi = digamma_diff(w, phi) + std::log1p(-lambda / (lambda + phi)) +
                (lambda - w) / (lambda + phi) +
                ratio * (std::log1p(-lambda / (lambda + phi)) + lambda / (lambda + phi));
        break;
      }
    }
    grad.head(q) += wt * d_eta * row.transpose();
    if (disp) grad[q] += wt * phi * d_phi;
  }
  return grad;
}

Eigen::MatrixXd TruncatedMarginObjective::negative_hessian(const Eigen::VectorXd& theta) const {
  const auto d = theta.size();
  Eigen::MatrixXd hess(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
    Eigen::VectorXd up = theta, dn = theta;
    up[k] += h;
    dn[k] -= h;
    hess.col(k) = (gradient(up) - gradient(dn)) / (2.0 * h);
  }
  hess = 0.5 * (hess + hess.transpose()).eval();
  return -hess;
}

TruncatedMarginFit fit_truncated_margin(std::span<const int> positive_counts,
                                        MarginKind kind, const MarginFitConfig& config) {
  if (positive_counts.empty())
    throw std::invalid_argument("fit_truncated_margin: empty sample");
  const auto n = positive_counts.size();
  const bool disp = margin_has_dispersion(kind);
  if (disp) {
    bool two_distinct = false;
    for (std::size_t i = 1; i < n; ++i) {
      if (positive_counts[i] != positive_counts[0]) { two_distinct = true; break; }
    }
    if (!two_distinct)
      throw std::invalid_argument("two-parameter margins need at least 2 distinct counts");
  }

  // compress to unique values
  std::vector<int> values;
  std::vector<double> weights;
  {
    std::vector<long> tally;
    for (int w : positive_counts) {
      if (w < 1) throw std::domain_error("counts must be >= 1");
      if (w >= static_cast<int>(tally.size())) tally.resize(static_cast<std::size_t>(w) + 1, 0);
      ++tally[static_cast<std::size_t>(w)];
    }
    for (std::size_t w = 1; w < tally.size(); ++w) {
      if (tally[w] > 0) {
        values.push_back(static_cast<int>(w));
        weights.push_back(static_cast<double>(tally[w]));
      }
    }
  }

  const double mean = std::inner_product(values.begin(), values.end(), weights.begin(), 0.0,
                                         std::plus<>(), [](int v, double w) { return v * w; }) /
                      static_cast<double>(n);
  const bool unit_shift = (kind == MarginKind::USP || kind == MarginKind::USNB);
  const double lambda_init = std::max(unit_shift ? mean - 1.0 : mean, 0.05);

  TruncatedMarginObjective objective(values, Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(values.size()), 1),
                                     weights, kind);
  Eigen::VectorXd theta(disp ? 2 : 1);
  theta[0] = std::log(lambda_init);
  if (disp) theta[1] = 0.0;

  TruncatedMarginFit fit;
  auto value_fn = [&](const Eigen::VectorXd& t) { return objective.value(t); };
  double loglik = objective.value(theta);
  fit.loglik_trace.push_back(loglik);
  for (int iter = 0; iter < config.max_iter; ++iter) {
    const auto report = ascent_newton_step(objective.gradient(theta),
                                           objective.negative_hessian(theta), theta, value_fn);
    const double delta = (report.new_params - theta).cwiseAbs().maxCoeff();
    theta = report.new_params;
    fit.iterations = iter + 1;
    fit.loglik_trace.push_back(report.objective_after);
    const double rel = std::abs(report.objective_after - loglik) /
                       std::max(1.0, std::abs(report.objective_after));
    loglik = report.objective_after;
    if (rel < config.loglik_tol && delta < config.param_tol) {
      fit.converged = true;
      break;
    }
  }

  fit.params.lambda = std::exp(theta[0]);
  if (disp) fit.params.phi = std::exp(theta[1]);
  fit.loglik = loglik;

  // goodness-of-fit cells: 1..5 individually, >=6 pooled
  fit.observed_cells.assign(6, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int cell = std::min(values[i], 6) - 1;
    fit.observed_cells[static_cast<std::size_t>(cell)] += static_cast<long>(weights[i]);
  }
  fit.expected_cells.assign(6, 0.0);
  double head_mass = 0.0;
  for (int w = 1; w <= 5; ++w) {
    const double pw = pmf_margin(w, kind, fit.params);
    fit.expected_cells[static_cast<std::size_t>(w - 1)] = static_cast<double>(n) * pw;
    head_mass += pw;
  }
  fit.expected_cells[5] = static_cast<double>(n) * (1.0 - head_mass);
  fit.chi_square = 0.0;
  for (int c = 0; c < 6; ++c) {
    const double e = fit.expected_cells[static_cast<std::size_t>(c)];
    const double o = static_cast<double>(fit.observed_cells[static_cast<std::size_t>(c)]);
    if (e > 0) fit.chi_square += (o - e) * (o - e) / e;
  }
  return fit;
}

// ---------------------------------------------------------------------------

std::vector<int> sample_poisson(double lambda, int count, std::uint64_t seed) {
  check_lambda(lambda);
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    out[static_cast<std::size_t>(i)] = rng.poisson(lambda);
  }
  return out;
}

std::vector<int> sample_negbin(double lambda, double phi, int count, std::uint64_t seed) {
  check_lambda(lambda);
  check_phi(phi);
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    out[static_cast<std::size_t>(i)] = rng.negbin(lambda, phi);
  }
  return out;
}

namespace {

int draw_margin(Rng& rng, MarginKind kind, const UnivariateParams& params) {
  switch (kind) {
    case MarginKind::USP:
      return 1 + rng.poisson(params.lambda);
    case MarginKind::USNB:
      return 1 + rng.negbin(params.lambda, *params.phi);
    case MarginKind::ZTP:
      for (int tries = 0; tries < kMaxRejections; ++tries) {
        const int y = rng.poisson(params.lambda);
        if (y > 0) return y;
      }
      throw std::runtime_error("zero-truncated rejection sampler stalled");
    case MarginKind::ZTNB:
      for (int tries = 0; tries < kMaxRejections; ++tries) {
        const int y = rng.negbin(params.lambda, *params.phi);
        if (y > 0) return y;
      }
      throw std::runtime_error("zero-truncated rejection sampler stalled");
  }
  return 1;
}

} // namespace

std::vector<int> sample_margin(MarginKind kind, const UnivariateParams& params, int count,
                               std::uint64_t seed) {
  check_lambda(params.lambda);
  if (margin_has_dispersion(kind)) require_phi(params);
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    out[static_cast<std::size_t>(i)] = draw_margin(rng, kind, params);
  }
  return out;
}

std::vector<int> sample_zero_inflated(const UnivariateParams& params, int count,
                                      std::uint64_t seed) {
  if (!params.pi0) throw std::domain_error("zero-inflated sampler needs pi0");
  check_lambda(params.lambda);
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    if (!rng.bernoulli(*params.pi0)) {
      out[static_cast<std::size_t>(i)] = 0;
    } else if (params.phi) {
      out[static_cast<std::size_t>(i)] = rng.negbin(params.lambda, *params.phi);
    } else {
      out[static_cast<std::size_t>(i)] = rng.poisson(params.lambda);
    }
  }
  return out;
}

std::vector<int> sample_zero_modified(MarginKind kind, const UnivariateParams& params,
                                      double pi0_prime, int count, std::uint64_t seed) {
  if (!(pi0_prime > 0.0 && pi0_prime < 1.0))
    throw std::domain_error("pi0_prime must lie in (0,1)");
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    out[static_cast<std::size_t>(i)] =
        rng.bernoulli(pi0_prime) ? draw_margin(rng, kind, params) : 0;
  }
  return out;
}

} // namespace mzcount
