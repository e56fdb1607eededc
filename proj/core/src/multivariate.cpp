#include "mzcount/multivariate.hpp"

#include <cmath>
#include <stdexcept>

#include "mzcount/rng.hpp"
#include "mzcount/special_functions.hpp"

namespace mzcount {

namespace {

constexpr int kMaxRejections = 1000000;
constexpr double kLinkCap = 30.0; // |x'beta| cap before exponentiation

double capped(double eta) { return std::clamp(eta, -kLinkCap, kLinkCap); }

double log_sum_exp(const std::vector<double>& terms) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double t : terms) peak = std::max(peak, t);
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

} // namespace

double log_pmf_mp(const Eigen::VectorXi& z, double lambda0, const Eigen::VectorXd& lambdas) {
  const auto m = z.size();
  if (lambdas.size() != m) throw std::invalid_argument("log_pmf_mp: size mismatch");
  if ((z.array() < 0).any()) throw std::domain_error("log_pmf_mp: negative count");
  if (!(lambda0 >= 0.0)) throw std::domain_error("log_pmf_mp: lambda0 must be >= 0");
  if (!(lambdas.array() > 0.0).all()) throw std::domain_error("log_pmf_mp: rates must be > 0");

  const double total_rate = lambda0 + lambdas.sum();
  const int shock_max = lambda0 > 0.0 ? z.minCoeff() : 0;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(shock_max) + 1);
  for (int n0 = 0; n0 <= shock_max; ++n0) {
    double t = n0 > 0 ? n0 * std::log(lambda0) - log_factorial(n0) : 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const int rest = z[j] - n0;
      t += rest * std::log(lambdas[j]) - log_factorial(rest);
    }
    terms.push_back(t);
  }
  return -total_rate + log_sum_exp(terms);
}

double pmf_mp(const Eigen::VectorXi& z, double lambda0, const Eigen::VectorXd& lambdas) {
  return std::exp(log_pmf_mp(z, lambda0, lambdas));
}

double log_pmf_mnb(const Eigen::VectorXi& z, const Eigen::VectorXd& lambdas, double phi) {
  const auto m = z.size();
  if (lambdas.size() != m) throw std::invalid_argument("log_pmf_mnb: size mismatch");
  if ((z.array() < 0).any()) throw std::domain_error("log_pmf_mnb: negative count");
  if (!(phi > 0.0)) throw std::domain_error("log_pmf_mnb: phi must be > 0");
  if (!(lambdas.array() > 0.0).all()) throw std::domain_error("log_pmf_mnb: rates must be > 0");

  const int zsum = z.sum();
  const double lsum = lambdas.sum();
  double out = log_gamma_ratio(zsum, phi) + phi * std::log1p(-lsum / (lsum + phi)) -
               zsum * std::log(phi + lsum);
  for (Eigen::Index j = 0; j < m; ++j) {
    out += z[j] * std::log(lambdas[j]) - log_factorial(z[j]);
  }
  return out;
}

double pmf_mnb(const Eigen::VectorXi& z, const Eigen::VectorXd& lambdas, double phi) {
  return std::exp(log_pmf_mnb(z, lambdas, phi));
}

// ---------------------------------------------------------------------------

LocalParams local_params(const ModelSpec& spec, const ParameterSet& params,
                         const Eigen::VectorXd& covariates) {
  const int p = static_cast<int>(covariates.size()) - 1;
  validate_parameters(spec, params, p);
  if (covariates.size() < 1 || covariates[0] != 1.0)
    throw std::invalid_argument("local_params: covariates must start with the intercept 1");

  auto eta = [&](const Eigen::VectorXd& coef) {
    return coef.size() == 1 ? coef[0] : coef.dot(covariates.head(coef.size()));
  };

  LocalParams local;
  local.lambda.resize(spec.m);
  if (!is_base_family(spec.family)) local.mix = logistic(eta(params.gamma));
  if (is_hurdle_family(spec.family)) {
    local.pi.resize(spec.m);
    for (int j = 0; j < spec.m; ++j) {
      local.pi[j] = logistic(eta(params.beta[static_cast<std::size_t>(j)]));
      local.lambda[j] = std::exp(capped(eta(params.alpha[static_cast<std::size_t>(j)])));
    }
  } else {
    for (int j = 0; j < spec.m; ++j) {
      local.lambda[j] = std::exp(capped(eta(params.beta[static_cast<std::size_t>(j)])));
    }
  }
  local.phi = params.phi;
  local.lambda0 = params.lambda0;
  return local;
}

std::optional<double> phi_for_margin(const ModelSpec& spec, const LocalParams& local, int j) {
  if (has_shared_dispersion(spec.family)) return local.phi[0];
  if (has_margin_dispersion(spec.family)) return local.phi[static_cast<std::size_t>(j)];
  if (is_hurdle_family(spec.family)) {
    int idx = 0;
    for (int k = 0; k < j; ++k)
      if (margin_has_dispersion(spec.margin_kinds[static_cast<std::size_t>(k)])) ++idx;
    if (margin_has_dispersion(spec.margin_kinds[static_cast<std::size_t>(j)]))
      return local.phi[static_cast<std::size_t>(idx)];
  }
  return std::nullopt;
}

double log_base_pmf(const ModelSpec& spec, const LocalParams& local, const Eigen::VectorXi& z) {
  if (z.size() != spec.m) throw std::invalid_argument("log_base_pmf: count width mismatch");
  switch (spec.family) {
    case ModelFamily::MP:
    case ModelFamily::MZIP2:
    case ModelFamily::MZMP2:
      return log_pmf_mp(z, local.lambda0, local.lambda);
    case ModelFamily::MNB:
    case ModelFamily::MZINB2:
    case ModelFamily::MZMNB2:
      return log_pmf_mnb(z, local.lambda, local.phi[0]);
    case ModelFamily::MIP:
    case ModelFamily::MZIP1:
    case ModelFamily::MZMP1: {
      double total = 0.0;
      for (int j = 0; j < spec.m; ++j) total += log_pmf_poisson(z[j], local.lambda[j]);
      return total;
    }
    case ModelFamily::MINB:
    case ModelFamily::MZINB1:
    case ModelFamily::MZMNB1: {
      double total = 0.0;
      for (int j = 0; j < spec.m; ++j)
        total += log_pmf_negbin(z[j], local.lambda[j], local.phi[static_cast<std::size_t>(j)]);
      return total;
    }
    case ModelFamily::MIH:
    case ModelFamily::MZIH1:
    case ModelFamily::MZMH1: {
      double total = 0.0;
      for (int j = 0; j < spec.m; ++j) {
        UnivariateParams up;
        up.lambda = local.lambda[j];
        up.phi = phi_for_margin(spec, local, j);
        total += log_pmf_zero_modified(z[j], spec.margin_kinds[static_cast<std::size_t>(j)], up,
                                       local.pi[j]);
      }
      return total;
    }
  }
  return -std::numeric_limits<double>::infinity();
}

double base_log_zero_mass(const ModelSpec& spec, const LocalParams& local) {
  switch (spec.family) {
    case ModelFamily::MP:
    case ModelFamily::MZIP2:
    case ModelFamily::MZMP2:
      return -(local.lambda0 + local.lambda.sum());
    case ModelFamily::MNB:
    case ModelFamily::MZINB2:
    case ModelFamily::MZMNB2: {
      const double phi = local.phi[0];
      const double lsum = local.lambda.sum();
      return phi * std::log1p(-lsum / (lsum + phi));
    }
    case ModelFamily::MIP:
    case ModelFamily::MZIP1:
    case ModelFamily::MZMP1:
      return -local.lambda.sum();
    case ModelFamily::MINB:
    case ModelFamily::MZINB1:
    case ModelFamily::MZMNB1: {
      double total = 0.0;
      for (int j = 0; j < spec.m; ++j) {
        const double phi = local.phi[static_cast<std::size_t>(j)];
        total += phi * std::log1p(-local.lambda[j] / (local.lambda[j] + phi));
      }
      return total;
    }
    case ModelFamily::MIH:
    case ModelFamily::MZIH1:
    case ModelFamily::MZMH1: {
      double total = 0.0;
      for (int j = 0; j < spec.m; ++j) total += std::log1p(-local.pi[j]);
      return total;
    }
  }
  return 0.0;
}

double induced_pi0(const ModelSpec& spec, const LocalParams& local) {
  return -std::expm1(base_log_zero_mass(spec, local));
}

double log_pmf_joint(const ModelSpec& spec, const LocalParams& local, const Eigen::VectorXi& z) {
  if ((z.array() < 0).any()) throw std::domain_error("log_pmf_joint: negative count");
  const bool all_zero = (z.array() == 0).all();
  if (is_base_family(spec.family)) return log_base_pmf(spec, local, z);

  if (is_zero_inflated(spec.family)) {
    const double pi0 = local.mix;
    if (all_zero) {
      return std::log1p(pi0 * std::expm1(base_log_zero_mass(spec, local)));
    }
    return std::log(pi0) + log_base_pmf(spec, local, z);
  }

  // zero-modified: mass 1 - pi0' at the all-zero cell, the truncated base above
  const double pi0_prime = local.mix;
  if (all_zero) return std::log1p(-pi0_prime);
  const double pi0 = induced_pi0(spec, local);
  return std::log(pi0_prime) - std::log(pi0) + log_base_pmf(spec, local, z);
}

double log_pmf_joint(const ModelSpec& spec, const ParameterSet& params,
                     const Eigen::VectorXd& covariates, const Eigen::VectorXi& z) {
  return log_pmf_joint(spec, local_params(spec, params, covariates), z);
}

double pmf_joint(const ModelSpec& spec, const ParameterSet& params,
                 const Eigen::VectorXd& covariates, const Eigen::VectorXi& z) {
  return std::exp(log_pmf_joint(spec, params, covariates, z));
}

std::string zero_modification_name(ZeroModification kind) {
  switch (kind) {
    case ZeroModification::Inflated: return "zero-inflated";
    case ZeroModification::Standard: return "standard";
    case ZeroModification::Deflated: return "zero-deflated";
  }
  return "?";
}

ZeroModification classify_modification(double pi0, double pi0_prime, double tol) {
  if (pi0_prime < pi0 - tol) return ZeroModification::Inflated;
  if (pi0_prime > pi0 + tol) return ZeroModification::Deflated;
  return ZeroModification::Standard;
}

// ---------------------------------------------------------------------------

namespace {

MomentSummary from_margins(const Eigen::VectorXd& mean, const Eigen::VectorXd& var,
                           const std::function<double(int, int)>& cov) {
  const auto m = mean.size();
  MomentSummary out;
  out.mean = mean;
  out.variance = var;
  out.covariance.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    out.covariance(j, j) = var[j];
    for (Eigen::Index k = j + 1; k < m; ++k) {
      out.covariance(j, k) = out.covariance(k, j) = cov(static_cast<int>(j), static_cast<int>(k));
    }
  }
  out.total_mean = mean.sum();
  out.total_variance = out.covariance.sum();
  return out;
}

MomentSummary grid_moments(const ModelSpec& spec, const LocalParams& local) {
  const Eigen::VectorXi upper = default_grid_upper(spec, local);
  const auto m = static_cast<Eigen::Index>(spec.m);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(m, m);
  for_each_count_vector(upper, [&](const Eigen::VectorXi& z) {
    const double p = std::exp(log_pmf_joint(spec, local, z));
    const Eigen::VectorXd zd = z.cast<double>();
    m1 += p * zd;
    m2 += p * zd * zd.transpose();
  });
  MomentSummary out;
  out.mean = m1;
  out.covariance = m2 - m1 * m1.transpose();
  out.variance = out.covariance.diagonal();
  out.total_mean = m1.sum();
  out.total_variance = out.covariance.sum();
  return out;
}

bool all_unit_shifted_nb(const ModelSpec& spec) {
  for (MarginKind k : spec.margin_kinds)
    if (k != MarginKind::USNB) return false;
  return true;
}

} // namespace

MomentSummary moments(const ModelSpec& spec, const ParameterSet& params,
                      const Eigen::VectorXd& covariates) {
  const LocalParams local = local_params(spec, params, covariates);
  const auto& lam = local.lambda;
  const auto m = lam.size();

  if (is_hurdle_family(spec.family) && !all_unit_shifted_nb(spec))
    return grid_moments(spec, local);

  switch (spec.family) {
    case ModelFamily::MIP:
      return from_margins(lam, lam, [](int, int) { return 0.0; });
    case ModelFamily::MINB: {
      Eigen::VectorXd var(m);
      for (Eigen::Index j = 0; j < m; ++j)
        var[j] = lam[j] + lam[j] * lam[j] / local.phi[static_cast<std::size_t>(j)];
      return from_margins(lam, var, [](int, int) { return 0.0; });
    }
    case ModelFamily::MIH:
      return grid_moments(spec, local);
    case ModelFamily::MP: {
      const Eigen::VectorXd mean = lam.array() + local.lambda0;
      return from_margins(mean, mean, [&](int, int) { return local.lambda0; });
    }
    case ModelFamily::MNB: {
      const double phi = local.phi[0];
      const Eigen::VectorXd var = lam.array() + lam.array().square() / phi;
      return from_margins(lam, var, [&](int j, int k) { return lam[j] * lam[k] / phi; });
    }
    default:
      break;
  }

  // inflated/modified families: weight is pi0 for ZI, varphi = pi0'/pi0 for ZM
  const double w = is_zero_inflated(spec.family)
                       ? local.mix
                       : local.mix / induced_pi0(spec, local);

  switch (spec.family) {
    case ModelFamily::MZIP1:
    case ModelFamily::MZMP1: {
      const Eigen::VectorXd mean = w * lam;
      Eigen::VectorXd var(m);
      for (Eigen::Index j = 0; j < m; ++j)
        var[j] = w * lam[j] + w * (1.0 - w) * lam[j] * lam[j];
      return from_margins(mean, var,
                          [&](int j, int k) { return w * (1.0 - w) * lam[j] * lam[k]; });
    }
    case ModelFamily::MZINB1:
    case ModelFamily::MZMNB1: {
      const Eigen::VectorXd mean = w * lam;
      Eigen::VectorXd var(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const double phi = local.phi[static_cast<std::size_t>(j)];
        var[j] = w * lam[j] + w * (1.0 + 1.0 / phi - w) * lam[j] * lam[j];
      }
      return from_margins(mean, var,
                          [&](int j, int k) { return w * (1.0 - w) * lam[j] * lam[k]; });
    }
    case ModelFamily::MZIH1:
    case ModelFamily::MZMH1: {
      Eigen::VectorXd mean(m), var(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const double pij = local.pi[j];
        const double phi = *phi_for_margin(spec, local, static_cast<int>(j));
        const double shifted = lam[j] + 1.0;
        mean[j] = w * pij * shifted;
        var[j] = w * pij * (lam[j] + lam[j] * lam[j] / phi) +
                 w * pij * (1.0 - w * pij) * shifted * shifted;
      }
      return from_margins(mean, var, [&](int j, int k) {
        return w * (1.0 - w) * local.pi[j] * local.pi[k] * (lam[j] + 1.0) * (lam[k] + 1.0);
      });
    }
    case ModelFamily::MZIP2:
    case ModelFamily::MZMP2: {
      const Eigen::VectorXd shifted = lam.array() + local.lambda0;
      const Eigen::VectorXd mean = w * shifted;
      Eigen::VectorXd var(m);
      for (Eigen::Index j = 0; j < m; ++j)
        var[j] = w * shifted[j] + w * (1.0 - w) * shifted[j] * shifted[j];
      return from_margins(mean, var, [&](int j, int k) {
        return w * local.lambda0 + w * (1.0 - w) * shifted[j] * shifted[k];
      });
    }
    case ModelFamily::MZINB2:
    case ModelFamily::MZMNB2: {
      const double phi = local.phi[0];
      const Eigen::VectorXd mean = w * lam;
      Eigen::VectorXd var(m);
      for (Eigen::Index j = 0; j < m; ++j)
        var[j] = w * lam[j] + w * (1.0 + 1.0 / phi - w) * lam[j] * lam[j];
      return from_margins(mean, var, [&](int j, int k) {
        return w * (1.0 + 1.0 / phi - w) * lam[j] * lam[k];
      });
    }
    default:
      throw std::logic_error("moments: unhandled family");
  }
}

// ---------------------------------------------------------------------------

Eigen::VectorXi default_grid_upper(const ModelSpec& spec, const LocalParams& local,
                                   double tail_mass_bound) {
  // generous mean + 25 sd bound per margin; count tails beat this easily at
  // the requested mass bounds
  (void)tail_mass_bound;
  Eigen::VectorXi upper(spec.m);
  for (int j = 0; j < spec.m; ++j) {
    double mu = local.lambda[j] + local.lambda0;
    const auto phi = phi_for_margin(spec, local, j);
    double var = mu;
    if (phi) var += mu * mu / *phi;
    if (is_hurdle_family(spec.family)) {
      // positive part support starts at 1; zero-truncated parents can stretch
      // the conditional mean by 1/(1 - p0)
      const MarginKind k = spec.margin_kinds[static_cast<std::size_t>(j)];
      double stretch = 1.0;
      if (k == MarginKind::ZTP || k == MarginKind::ZTNB) {
        const double p0 = std::exp(parent_log_zero_mass(k, local.lambda[j], phi.value_or(1.0)));
        stretch = 1.0 / std::max(1.0 - p0, 0.01);
      }
      mu = (mu + 1.0) * stretch;
      var = (var + 1.0) * stretch * stretch;
    }
    upper[j] = std::min(500, static_cast<int>(std::ceil(mu + 25.0 * std::sqrt(var + 1.0) + 25.0)));
  }
  return upper;
}

void for_each_count_vector(const Eigen::VectorXi& upper,
                           const std::function<void(const Eigen::VectorXi&)>& visit) {
  const auto m = upper.size();
  Eigen::VectorXi z = Eigen::VectorXi::Zero(m);
  for (;;) {
    visit(z);
    Eigen::Index j = 0;
    while (j < m && z[j] == upper[j]) {
      z[j] = 0;
      ++j;
    }
    if (j == m) return;
    ++z[j];
  }
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXi draw_base(Rng& rng, const ModelSpec& spec, const LocalParams& local) {
  const auto m = static_cast<Eigen::Index>(spec.m);
  Eigen::VectorXi z(m);
  switch (spec.family) {
    case ModelFamily::MP:
    case ModelFamily::MZIP2:
    case ModelFamily::MZMP2: {
      const int shock = rng.poisson(local.lambda0);
      for (Eigen::Index j = 0; j < m; ++j) z[j] = shock + rng.poisson(local.lambda[j]);
      return z;
    }
    case ModelFamily::MNB:
    case ModelFamily::MZINB2:
    case ModelFamily::MZMNB2: {
      const double phi = local.phi[0];
      const double mixr = rng.gamma(phi) / phi;
      for (Eigen::Index j = 0; j < m; ++j) z[j] = rng.poisson(mixr * local.lambda[j]);
      return z;
    }
    case ModelFamily::MIP:
    case ModelFamily::MZIP1:
    case ModelFamily::MZMP1:
      for (Eigen::Index j = 0; j < m; ++j) z[j] = rng.poisson(local.lambda[j]);
      return z;
    case ModelFamily::MINB:
    case ModelFamily::MZINB1:
    case ModelFamily::MZMNB1:
      for (Eigen::Index j = 0; j < m; ++j)
        z[j] = rng.negbin(local.lambda[j], local.phi[static_cast<std::size_t>(j)]);
      return z;
    case ModelFamily::MIH:
    case ModelFamily::MZIH1:
    case ModelFamily::MZMH1:
      for (Eigen::Index j = 0; j < m; ++j) {
        if (!rng.bernoulli(local.pi[j])) {
          z[j] = 0;
          continue;
        }
        const MarginKind kind = spec.margin_kinds[static_cast<std::size_t>(j)];
        const auto phi = phi_for_margin(spec, local, static_cast<int>(j));
        switch (kind) {
          case MarginKind::USP: z[j] = 1 + rng.poisson(local.lambda[j]); break;
          case MarginKind::USNB: z[j] = 1 + rng.negbin(local.lambda[j], *phi); break;
          case MarginKind::ZTP: {
            int y = 0, tries = 0;
            while ((y = rng.poisson(local.lambda[j])) == 0)
              if (++tries >= kMaxRejections)
                throw std::runtime_error("sample_joint: truncated rejection stalled");
            z[j] = y;
            break;
          }
          case MarginKind::ZTNB: {
            int y = 0, tries = 0;
            while ((y = rng.negbin(local.lambda[j], *phi)) == 0)
              if (++tries >= kMaxRejections)
                throw std::runtime_error("sample_joint: truncated rejection stalled");
            z[j] = y;
            break;
          }
        }
      }
      return z;
  }
  return z;
}

} // namespace

ObservationSet sample_joint(const ModelSpec& spec, const ParameterSet& params,
                            const Eigen::MatrixXd& design, std::uint64_t seed) {
  const auto n = design.rows();
  ObservationSet out;
  out.design = design;
  out.counts.resize(n, spec.m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const LocalParams local = local_params(spec, params, design.row(i).transpose());
    auto rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    Eigen::VectorXi z;
    if (is_base_family(spec.family)) {
      z = draw_base(rng, spec, local);
    } else if (is_zero_inflated(spec.family)) {
      z = rng.bernoulli(local.mix) ? draw_base(rng, spec, local)
                                   : Eigen::VectorXi::Zero(spec.m).eval();
    } else {
      if (rng.bernoulli(local.mix)) {
        int tries = 0;
        do {
          z = draw_base(rng, spec, local);
          if (++tries >= kMaxRejections)
            throw std::runtime_error("sample_joint: all-zero rejection stalled");
        } while ((z.array() == 0).all());
      } else {
        z = Eigen::VectorXi::Zero(spec.m);
      }
    }
    out.counts.row(i) = z.transpose();
  }
  out.validate();
  return out;
}

} // namespace mzcount
