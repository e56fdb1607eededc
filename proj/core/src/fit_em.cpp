#include "mzcount/fit_em.hpp"

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

// the hurdle positive part does not depend on the mixture weights (tau = 1 on
// every row with a positive count), so it is fitted to convergence up front
void fit_hurdle_positive_parts(const ModelSpec& spec, const detail::RowMatrices& mats,
                               int alpha_w, ParameterSet& params, const FitConfig& config,
                               bool& converged) {
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
      // degenerate margin: never positive; pin the location at the floor
      params.alpha[ji].setConstant(std::log(0.05));
      converged = false;
      continue;
    }
    Eigen::MatrixXd Xa(static_cast<Eigen::Index>(keep.size()), alpha_w);
    for (std::size_t r = 0; r < keep.size(); ++r)
      Xa.row(static_cast<Eigen::Index>(r)) = mats.X.row(keep[r]).head(alpha_w);
    const MarginKind kind = spec.margin_kinds[ji];
    auto obj = std::make_shared<TruncatedMarginObjective>(std::move(counts), std::move(Xa),
                                                          std::move(weights), kind);
    Eigen::VectorXd theta(obj->dim());
    theta.head(alpha_w) = params.alpha[ji];
    int phi_idx = 0;
    for (int k = 0; k < j; ++k)
      if (margin_has_dispersion(spec.margin_kinds[static_cast<std::size_t>(k)])) ++phi_idx;
    if (margin_has_dispersion(kind))
      theta[alpha_w] = std::log(params.phi[static_cast<std::size_t>(phi_idx)]);
    const auto loop = newton_maximize(detail::wrap_margin_objective(obj), theta, config);
    params.alpha[ji] = loop.theta.head(alpha_w);
    if (margin_has_dispersion(kind))
      params.phi[static_cast<std::size_t>(phi_idx)] = std::exp(loop.theta[alpha_w]);
    converged = converged && loop.converged;
  }
}

} // namespace

FitResult fit_zero_inflated(const ObservationSet& data, const ModelSpec& spec,
                            const FitConfig& config) {
  spec.validate();
  if (!is_zero_inflated(spec.family))
    throw std::invalid_argument("fit_zero_inflated: not a zero-inflated family");
  const auto rows = compress_rows(data);
  const auto mats = make_matrices(rows);
  if (mats.v.maxCoeff() < 1.0 || mats.v.minCoeff() > 0.0)
    throw std::invalid_argument(
        "fit_zero_inflated: need at least one all-zero and one nonzero row");
  const int p = data.p();
  const int gamma_w = 1 + (spec.covariates.gamma ? p : 0);
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const int alpha_w = is_hurdle_family(spec.family) ? 1 + (spec.covariates.alpha ? p : 0) : 0;
  const Eigen::MatrixXd Xg = mats.X.leftCols(gamma_w);
  const Eigen::MatrixXd Xb = mats.X.leftCols(beta_w);

  FitResult result;
  result.spec = spec;
  result.params = initial_parameters(spec, rows, p);
  bool blocks_converged = true;
  if (gamma_w > 1) {
    // start gamma at the logistic regression of the nonzero indicator
    const Eigen::VectorXd ones = (1.0 - mats.v.array()).matrix();
    const auto loop = newton_maximize(
        bernoulli_block(Xg, mats.w.cwiseProduct(ones), mats.w.cwiseProduct(mats.v)),
        result.params.gamma, config);
    result.params.gamma = loop.theta;
  }
  if (is_hurdle_family(spec.family))
    fit_hurdle_positive_parts(spec, mats, alpha_w, result.params, config, blocks_converged);

  const Eigen::VectorXd zsum = mats.Zd.rowwise().sum();
  double loglik = observed_loglik(spec, result.params, rows);
  result.loglik_trace.push_back(loglik);

  for (int iter = 0; iter < config.max_iter; ++iter) {
    // E-step
    const Eigen::MatrixXd lambda = is_hurdle_family(spec.family)
                                       ? Eigen::MatrixXd()
                                       : rate_matrix(Xb, result.params.beta);
    Eigen::VectorXd tau(mats.w.size());
    for (Eigen::Index i = 0; i < mats.w.size(); ++i) {
      if (mats.v[i] == 0.0) {
        tau[i] = 1.0;
        continue;
      }
      const LocalParams local =
          local_params(spec, result.params, mats.X.row(i).transpose());
      tau[i] = 1.0 - zi_u_prime(local.mix, base_log_zero_mass(spec, local));
    }

    Eigen::VectorXd n0;
    Eigen::VectorXd r, s;
    if (spec.family == ModelFamily::MZIP2) {
      n0 = Eigen::VectorXd::Zero(mats.w.size());
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
    } else if (spec.family == ModelFamily::MZINB2) {
      const double phi = result.params.phi[0];
      const Eigen::VectorXd lsum = lambda.rowwise().sum();
      r.resize(mats.w.size());
      s.resize(mats.w.size());
      for (Eigen::Index i = 0; i < mats.w.size(); ++i) {
        r[i] = (zsum[i] + phi) / (lsum[i] + phi);
        s[i] = digamma(zsum[i] + phi) - std::log(lsum[i] + phi);
      }
    }

    // M-step: one safeguarded Newton step per block
    const Eigen::VectorXd packed_before =
        pack_parameters(spec, result.params, p, false).values;
    newton_step_inplace(bernoulli_block(Xg, mats.w.cwiseProduct(tau),
                                        mats.w.cwiseProduct((1.0 - tau.array()).matrix())),
                        result.params.gamma);

    switch (spec.family) {
      case ModelFamily::MZIP1:
        for (int j = 0; j < spec.m; ++j)
          newton_step_inplace(poisson_block(Xb, mats.w.cwiseProduct(mats.Zd.col(j)),
                                            mats.w.cwiseProduct(tau)),
                              result.params.beta[static_cast<std::size_t>(j)]);
        break;
      case ModelFamily::MZINB1:
        for (int j = 0; j < spec.m; ++j) {
          const auto ji = static_cast<std::size_t>(j);
          Eigen::VectorXd theta(beta_w + 1);
          theta << result.params.beta[ji], std::log(result.params.phi[ji]);
          newton_step_inplace(nb_margin_block(Xb, mats.Zd.col(j), mats.w.cwiseProduct(tau),
                                              Eigen::VectorXd::Zero(mats.w.size())),
                              theta);
          result.params.beta[ji] = theta.head(beta_w);
          result.params.phi[ji] = std::exp(theta[beta_w]);
        }
        break;
      case ModelFamily::MZIH1:
        for (int j = 0; j < spec.m; ++j) {
          const Eigen::VectorXd pos = (mats.Zd.col(j).array() > 0.0).cast<double>().matrix();
          newton_step_inplace(
              bernoulli_block(Xb, mats.w.cwiseProduct(pos),
                              mats.w.cwiseProduct(tau - pos)),
              result.params.beta[static_cast<std::size_t>(j)]);
        }
        break;
      case ModelFamily::MZIP2: {
        result.params.lambda0 = mats.w.dot(n0) / mats.w.dot(tau);
        for (int j = 0; j < spec.m; ++j)
          newton_step_inplace(poisson_block(Xb, mats.w.cwiseProduct(mats.Zd.col(j) - n0),
                                            mats.w.cwiseProduct(tau)),
                              result.params.beta[static_cast<std::size_t>(j)]);
        break;
      }
      case ModelFamily::MZINB2: {
        for (int j = 0; j < spec.m; ++j)
          newton_step_inplace(
              poisson_block(Xb, mats.w.cwiseProduct(mats.Zd.col(j)),
                            mats.w.cwiseProduct(tau).cwiseProduct(r)),
              result.params.beta[static_cast<std::size_t>(j)]);
        Eigen::VectorXd rho(1);
        rho[0] = std::log(result.params.phi[0]);
        newton_step_inplace(dispersion_block(mats.w.cwiseProduct(tau),
                                             mats.w.cwiseProduct(tau).cwiseProduct(s - r)),
                            rho);
        result.params.phi[0] = std::exp(rho[0]);
        break;
      }
      default:
        break;
    }

    const double next = observed_loglik(spec, result.params, rows);
    result.loglik_trace.push_back(next);
    result.iterations = iter + 1;
    const double delta =
        (pack_parameters(spec, result.params, p, false).values - packed_before)
            .cwiseAbs()
            .maxCoeff();
    const bool done = detail::iteration_converged(loglik, next, delta, config);
    loglik = next;
    if (done) {
      result.converged = blocks_converged;
      break;
    }
  }

  result.loglik = loglik;
  finalize_fit(result, rows, p);
  return result;
}

} // namespace mzcount
