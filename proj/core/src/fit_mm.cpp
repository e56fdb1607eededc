#include "mzcount/fit_mm.hpp"

#include <cmath>

#include "mzcount/special_functions.hpp"
#include "fit_internal.hpp"

namespace mzcount {

namespace detail {
Eigen::MatrixXd rate_matrix(const Eigen::MatrixXd& Xb, const std::vector<Eigen::VectorXd>& beta);
QBlock wrap_margin_objective(std::shared_ptr<TruncatedMarginObjective> obj);
} // namespace detail

namespace {

using detail::make_matrices;
using detail::newton_maximize;
using detail::newton_step_inplace;
using detail::rate_matrix;

constexpr double kSeparationBound = 30.0;

Eigen::VectorXd u_prime_weights(const ModelSpec& spec, const ParameterSet& params,
                                const detail::RowMatrices& mats) {
  Eigen::VectorXd u(mats.w.size());
  for (Eigen::Index i = 0; i < mats.w.size(); ++i) {
    const LocalParams local = local_params(spec, params, mats.X.row(i).transpose());
    const double f0 = std::exp(base_log_zero_mass(spec, local));
    u[i] = 1.0 / std::max(1.0 - f0, 1e-12);
  }
  return u;
}

double truncated_loglik(const ModelSpec& spec, const ParameterSet& params,
                        const std::vector<WeightedRow>& nonzero_rows) {
  double total = 0.0;
  for (const auto& row : nonzero_rows) {
    const LocalParams local = local_params(spec, params, row.x);
    total += row.weight *
             (log_base_pmf(spec, local, row.z) - std::log1p(-std::exp(base_log_zero_mass(spec, local))));
  }
  return total;
}

} // namespace

SplitLikelihood split_loglik(const ModelSpec& spec, const ParameterSet& params,
                             const std::vector<WeightedRow>& rows) {
  SplitLikelihood out;
  for (const auto& row : rows) {
    const LocalParams local = local_params(spec, params, row.x);
    const bool zero = (row.z.array() == 0).all();
    if (zero) {
      out.ell1 += row.weight * std::log1p(-local.mix);
    } else {
      out.ell1 += row.weight * std::log(local.mix);
      out.ell2 += row.weight * (log_base_pmf(spec, local, row.z) -
                                std::log1p(-std::exp(base_log_zero_mass(spec, local))));
    }
  }
  out.total = out.ell1 + out.ell2;
  return out;
}

LogisticFit fit_logistic_part(const std::vector<WeightedRow>& rows, int design_width,
                              const FitConfig& config) {
  const auto mats = make_matrices(rows);
  const Eigen::MatrixXd Xg = mats.X.leftCols(design_width);
  const Eigen::VectorXd ones = (1.0 - mats.v.array()).matrix();
  const auto block =
      bernoulli_block(Xg, mats.w.cwiseProduct(ones), mats.w.cwiseProduct(mats.v));

  LogisticFit fit;
  fit.gamma = Eigen::VectorXd::Zero(design_width);
  const double frac = std::clamp(mats.w.dot(ones) / mats.w.sum(), 1e-9, 1.0 - 1e-9);
  fit.gamma[0] = std::log(frac / (1.0 - frac));
  const auto loop = newton_maximize(block, fit.gamma, config);
  fit.gamma = loop.theta;
  fit.iterations = loop.iterations;
  fit.converged = loop.converged;
  if (fit.gamma.cwiseAbs().maxCoeff() > kSeparationBound) {
    fit.separation = true;
    fit.gamma = fit.gamma.cwiseMax(-kSeparationBound).cwiseMin(kSeparationBound);
  }
  fit.loglik = block.value(fit.gamma);
  return fit;
}

double mm_outer_surrogate(const ModelSpec& spec, const ParameterSet& anchor,
                          const ParameterSet& params,
                          const std::vector<WeightedRow>& nonzero_rows) {
  double total = 0.0;
  for (const auto& row : nonzero_rows) {
    const LocalParams anchor_local = local_params(spec, anchor, row.x);
    const double f0 = std::exp(base_log_zero_mass(spec, anchor_local));
    const double u_prime = 1.0 / std::max(1.0 - f0, 1e-12);
    const LocalParams local = local_params(spec, params, row.x);
    total += row.weight * (log_base_pmf(spec, local, row.z) +
                           (u_prime - 1.0) * base_log_zero_mass(spec, local));
  }
  return total;
}

TruncatedPartResult fit_truncated_part(const std::vector<WeightedRow>& nonzero_rows,
                                       const ModelSpec& spec, const FitConfig& config) {
  spec.validate();
  if (!is_zero_modified(spec.family))
    throw std::invalid_argument("fit_truncated_part: not a zero-modified family");
  if (nonzero_rows.empty())
    throw std::invalid_argument("fit_truncated_part: no nonzero rows");
  for (const auto& row : nonzero_rows)
    if ((row.z.array() == 0).all())
      throw std::invalid_argument("fit_truncated_part: all-zero row in the truncated part");

  const auto mats = make_matrices(nonzero_rows);
  const int p = static_cast<int>(mats.X.cols()) - 1;
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const int alpha_w = is_hurdle_family(spec.family) ? 1 + (spec.covariates.alpha ? p : 0) : 0;
  const Eigen::MatrixXd Xb = mats.X.leftCols(beta_w);
  const Eigen::VectorXd zsum = mats.Zd.rowwise().sum();

  TruncatedPartResult result;
  result.params = initial_parameters(spec, nonzero_rows, p);
  // the mixing probability plays no role in ell2; keep a fixed placeholder so
  // LocalParams construction stays valid
  result.params.gamma = Eigen::VectorXd::Zero(1 + (spec.covariates.gamma ? p : 0));
  bool blocks_converged = true;

  // Case 3 decomposition: the positive parts depend on neither u' nor pi_j,
  // fit them to convergence once
  if (spec.family == ModelFamily::MZMH1) {
    for (int j = 0; j < spec.m; ++j) {
      const auto ji = static_cast<std::size_t>(j);
      std::vector<int> counts;
      std::vector<double> weights;
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < mats.Zi.rows(); ++i) {
        if (mats.Zi(i, j) > 0) {
          counts.push_back(mats.Zi(i, j));
          weights.push_back(mats.w[i]);
          keep.push_back(i);
        }
      }
      if (keep.empty()) {
        result.params.alpha[ji].setConstant(std::log(0.05));
        blocks_converged = false;
        continue;
      }
      Eigen::MatrixXd Xa(static_cast<Eigen::Index>(keep.size()), alpha_w);
      for (std::size_t r = 0; r < keep.size(); ++r)
        Xa.row(static_cast<Eigen::Index>(r)) = mats.X.row(keep[r]).head(alpha_w);
      const MarginKind kind = spec.margin_kinds[ji];
      auto obj = std::make_shared<TruncatedMarginObjective>(std::move(counts), std::move(Xa),
                                                            std::move(weights), kind);
      Eigen::VectorXd theta(obj->dim());
      theta.head(alpha_w) = result.params.alpha[ji];
      int phi_idx = 0;
      for (int k = 0; k < j; ++k)
        if (margin_has_dispersion(spec.margin_kinds[static_cast<std::size_t>(k)])) ++phi_idx;
      if (margin_has_dispersion(kind))
        theta[alpha_w] = std::log(result.params.phi[static_cast<std::size_t>(phi_idx)]);
      const auto loop = newton_maximize(detail::wrap_margin_objective(obj), theta, config);
      result.params.alpha[ji] = loop.theta.head(alpha_w);
      if (margin_has_dispersion(kind))
        result.params.phi[static_cast<std::size_t>(phi_idx)] = std::exp(loop.theta[alpha_w]);
      blocks_converged = blocks_converged && loop.converged;
    }
  }

  double ell2 = truncated_loglik(spec, result.params, nonzero_rows);
  result.ell2_trace.push_back(ell2);

  for (int iter = 0; iter < config.max_iter; ++iter) {
    const ParameterSet anchor = result.params;
    const Eigen::VectorXd u_prime = u_prime_weights(spec, anchor, mats);
    const Eigen::MatrixXd lambda = is_hurdle_family(spec.family)
                                       ? Eigen::MatrixXd()
                                       : rate_matrix(Xb, result.params.beta);

    const Eigen::VectorXd packed_before =
        pack_parameters(spec, result.params, p, true).values;

    switch (spec.family) {
      case ModelFamily::MZMP1:
        for (int j = 0; j < spec.m; ++j)
          newton_step_inplace(poisson_block(Xb, mats.w.cwiseProduct(mats.Zd.col(j)),
                                            mats.w.cwiseProduct(u_prime)),
                              result.params.beta[static_cast<std::size_t>(j)]);
        break;
      case ModelFamily::MZMNB1:
        for (int j = 0; j < spec.m; ++j) {
          const auto ji = static_cast<std::size_t>(j);
          Eigen::VectorXd theta(beta_w + 1);
          theta << result.params.beta[ji], std::log(result.params.phi[ji]);
          newton_step_inplace(
              nb_margin_block(Xb, mats.Zd.col(j), mats.w,
                              mats.w.cwiseProduct((u_prime.array() - 1.0).matrix())),
              theta);
          result.params.beta[ji] = theta.head(beta_w);
          result.params.phi[ji] = std::exp(theta[beta_w]);
        }
        break;
      case ModelFamily::MZMH1:
        for (int j = 0; j < spec.m; ++j) {
          const Eigen::VectorXd pos = (mats.Zd.col(j).array() > 0.0).cast<double>().matrix();
          newton_step_inplace(
              bernoulli_block(Xb, mats.w.cwiseProduct(pos),
                              mats.w.cwiseProduct(u_prime - pos)),
              result.params.beta[static_cast<std::size_t>(j)]);
        }
        break;
      case ModelFamily::MZMP2: {
        Eigen::VectorXd n0 = Eigen::VectorXd::Zero(mats.w.size());
        const double lam0 = result.params.lambda0;
        if (lam0 > 0.0) {
          for (Eigen::Index i = 0; i < mats.w.size(); ++i) {
            if (mats.Zi.row(i).minCoeff() > 0) {
              const Eigen::VectorXi z = mats.Zi.row(i).transpose();
              const Eigen::VectorXi zm1 = z.array() - 1;
              const Eigen::VectorXd lam = lambda.row(i).transpose();
              n0[i] = lam0 * std::exp(log_pmf_mp(zm1, lam0, lam) - log_pmf_mp(z, lam0, lam));
            }
          }
        }
        result.params.lambda0 = mats.w.dot(n0) / mats.w.dot(u_prime);
        for (int j = 0; j < spec.m; ++j)
          newton_step_inplace(poisson_block(Xb, mats.w.cwiseProduct(mats.Zd.col(j) - n0),
                                            mats.w.cwiseProduct(u_prime)),
                              result.params.beta[static_cast<std::size_t>(j)]);
        break;
      }
      case ModelFamily::MZMNB2: {
        const double phi = result.params.phi[0];
        const Eigen::VectorXd lsum = lambda.rowwise().sum();
        Eigen::VectorXd r_prime(mats.w.size()), s_prime(mats.w.size());
        for (Eigen::Index i = 0; i < mats.w.size(); ++i) {
          const double r1 = (zsum[i] + phi) / (lsum[i] + phi);
          const double s1 = digamma(zsum[i] + phi) - std::log(lsum[i] + phi);
          const double r2 = phi / (lsum[i] + phi);
          const double s2 = digamma(phi) - std::log(lsum[i] + phi);
          r_prime[i] = r1 + (u_prime[i] - 1.0) * r2;
          s_prime[i] = s1 + (u_prime[i] - 1.0) * s2;
        }
        for (int j = 0; j < spec.m; ++j)
          newton_step_inplace(poisson_block(Xb, mats.w.cwiseProduct(mats.Zd.col(j)),
                                            mats.w.cwiseProduct(r_prime)),
                              result.params.beta[static_cast<std::size_t>(j)]);
        Eigen::VectorXd rho(1);
        rho[0] = std::log(result.params.phi[0]);
        newton_step_inplace(dispersion_block(mats.w.cwiseProduct(u_prime),
                                             mats.w.cwiseProduct(s_prime - r_prime)),
                            rho);
        result.params.phi[0] = std::exp(rho[0]);
        break;
      }
      default:
        break;
    }

    const double next = truncated_loglik(spec, result.params, nonzero_rows);
    if (config.surrogate_check) {
      const double q_old = mm_outer_surrogate(spec, anchor, anchor, nonzero_rows);
      const double q_new = mm_outer_surrogate(spec, anchor, result.params, nonzero_rows);
      const double slack = 1e-7 * (1.0 + std::abs(q_old));
      if (q_new + slack < q_old || next + slack < ell2)
        throw std::logic_error("fit_truncated_part: surrogate ascent violated");
    }
    result.ell2_trace.push_back(next);
    result.iterations = iter + 1;
    const double delta =
        (pack_parameters(spec, result.params, p, true).values - packed_before)
            .cwiseAbs()
            .maxCoeff();
    const bool done = detail::iteration_converged(ell2, next, delta, config);
    ell2 = next;
    if (done) {
      result.converged = blocks_converged;
      break;
    }
  }

  result.ell2 = ell2;
  return result;
}

FitResult fit_zero_modified(const ObservationSet& data, const ModelSpec& spec,
                            const FitConfig& config) {
  spec.validate();
  if (!is_zero_modified(spec.family))
    throw std::invalid_argument("fit_zero_modified: not a zero-modified family");
  const auto rows = compress_rows(data);
  const int p = data.p();
  const int gamma_w = 1 + (spec.covariates.gamma ? p : 0);

  std::vector<WeightedRow> nonzero;
  for (const auto& row : rows)
    if (row.z.sum() > 0) nonzero.push_back(row);
  if (nonzero.empty() || nonzero.size() == rows.size())
    throw std::invalid_argument(
        "fit_zero_modified: need at least one all-zero and one nonzero row");

  const LogisticFit logistic = fit_logistic_part(rows, gamma_w, config);
  TruncatedPartResult truncated = fit_truncated_part(nonzero, spec, config);

  FitResult result;
  result.spec = spec;
  result.params = std::move(truncated.params);
  result.params.gamma = logistic.gamma;
  result.ell1 = logistic.loglik;
  result.ell2 = truncated.ell2;
  result.loglik = logistic.loglik + truncated.ell2;
  result.iterations = std::max(logistic.iterations, truncated.iterations);
  result.converged = logistic.converged && truncated.converged;
  result.separation_flag = logistic.separation;
  result.loglik_trace.reserve(truncated.ell2_trace.size());
  for (double e2 : truncated.ell2_trace) result.loglik_trace.push_back(logistic.loglik + e2);
  finalize_fit(result, rows, p);
  return result;
}

} // namespace mzcount
