#include "mzcount/fit_base.hpp"

#include <cmath>

#include "mzcount/fit_em.hpp"
#include "mzcount/fit_mm.hpp"
#include "mzcount/special_functions.hpp"
#include "fit_internal.hpp"

namespace mzcount {

namespace detail {

Eigen::MatrixXd rate_matrix(const Eigen::MatrixXd& Xb, const std::vector<Eigen::VectorXd>& beta) {
  Eigen::MatrixXd lambda(Xb.rows(), static_cast<Eigen::Index>(beta.size()));
  for (std::size_t j = 0; j < beta.size(); ++j) {
    lambda.col(static_cast<Eigen::Index>(j)) =
        (Xb * beta[j]).array().min(30.0).max(-30.0).exp();
  }
  return lambda;
}

QBlock wrap_margin_objective(std::shared_ptr<TruncatedMarginObjective> obj) {
  QBlock block;
  block.value = [obj](const Eigen::VectorXd& t) { return obj->value(t); };
  block.gradient = [obj](const Eigen::VectorXd& t) { return obj->gradient(t); };
  block.negative_hessian = [obj](const Eigen::VectorXd& t) { return obj->negative_hessian(t); };
  return block;
}

} // namespace detail

namespace {

using detail::make_matrices;
using detail::newton_maximize;
using detail::newton_step_inplace;
using detail::rate_matrix;

FitResult fit_independent(const ObservationSet& data, const ModelSpec& spec,
                          const FitConfig& config) {
  const auto rows = compress_rows(data);
  const auto mats = make_matrices(rows);
  const int p = data.p();
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const int alpha_w = 1 + (spec.covariates.alpha ? p : 0);
  const Eigen::MatrixXd Xb = mats.X.leftCols(beta_w);

  FitResult result;
  result.spec = spec;
  result.params = initial_parameters(spec, rows, p);
  result.converged = true;

  for (int j = 0; j < spec.m; ++j) {
    const auto ji = static_cast<std::size_t>(j);
    switch (spec.family) {
      case ModelFamily::MIP: {
        const auto loop = newton_maximize(
            poisson_block(Xb, mats.w.cwiseProduct(mats.Zd.col(j)), mats.w),
            result.params.beta[ji], config);
        result.params.beta[ji] = loop.theta;
        result.converged = result.converged && loop.converged;
        result.iterations = std::max(result.iterations, loop.iterations);
        break;
      }
      case ModelFamily::MINB: {
        Eigen::VectorXd theta(beta_w + 1);
        theta << result.params.beta[ji], std::log(result.params.phi[ji]);
        const auto loop = newton_maximize(
            nb_margin_block(Xb, mats.Zd.col(j), mats.w, Eigen::VectorXd::Zero(mats.w.size())),
            theta, config);
        result.params.beta[ji] = loop.theta.head(beta_w);
        result.params.phi[ji] = std::exp(loop.theta[beta_w]);
        result.converged = result.converged && loop.converged;
        result.iterations = std::max(result.iterations, loop.iterations);
        break;
      }
      case ModelFamily::MIH: {
        const Eigen::VectorXd pos =
            (mats.Zd.col(j).array() > 0.0).cast<double>().matrix();
        const auto occ_loop = newton_maximize(
            bernoulli_block(Xb, mats.w.cwiseProduct(pos),
                            mats.w.cwiseProduct((1.0 - pos.array()).matrix())),
            result.params.beta[ji], config);
        result.params.beta[ji] = occ_loop.theta;

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
        Eigen::MatrixXd Xa(static_cast<Eigen::Index>(keep.size()), alpha_w);
        for (std::size_t r = 0; r < keep.size(); ++r)
          Xa.row(static_cast<Eigen::Index>(r)) = mats.X.row(keep[r]).head(alpha_w);
        const MarginKind kind = spec.margin_kinds[ji];
        auto obj = std::make_shared<TruncatedMarginObjective>(std::move(counts), std::move(Xa),
                                                              std::move(weights), kind);
        Eigen::VectorXd theta(obj->dim());
        theta.head(alpha_w) = result.params.alpha[ji];
        const auto phi = phi_for_margin(spec, LocalParams{1.0, Eigen::VectorXd::Ones(spec.m),
                                                          Eigen::VectorXd::Ones(spec.m) * 0.5,
                                                          result.params.phi, 0.0},
                                        j);
        if (margin_has_dispersion(kind)) theta[alpha_w] = std::log(phi.value_or(1.0));
        const auto pos_loop = newton_maximize(detail::wrap_margin_objective(obj), theta, config);
        result.params.alpha[ji] = pos_loop.theta.head(alpha_w);
        if (margin_has_dispersion(kind)) {
          int idx = 0;
          for (int k = 0; k < j; ++k)
            if (margin_has_dispersion(spec.margin_kinds[static_cast<std::size_t>(k)])) ++idx;
          result.params.phi[static_cast<std::size_t>(idx)] = std::exp(pos_loop.theta[alpha_w]);
        }
        result.converged = result.converged && occ_loop.converged && pos_loop.converged;
        result.iterations =
            std::max({result.iterations, occ_loop.iterations, pos_loop.iterations});
        break;
      }
      default:
        throw std::logic_error("fit_independent: wrong family");
    }
  }

  result.loglik = observed_loglik(spec, result.params, rows);
  result.loglik_trace.push_back(result.loglik);
  finalize_fit(result, rows, p);
  return result;
}

FitResult fit_common_shock(const ObservationSet& data, const ModelSpec& spec,
                           const FitConfig& config) {
  const auto rows = compress_rows(data);
  const auto mats = make_matrices(rows);
  const int p = data.p();
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const Eigen::MatrixXd Xb = mats.X.leftCols(beta_w);

  FitResult result;
  result.spec = spec;
  result.params = initial_parameters(spec, rows, p);

  double loglik = observed_loglik(spec, result.params, rows);
  result.loglik_trace.push_back(loglik);
  for (int iter = 0; iter < config.max_iter; ++iter) {
    const Eigen::MatrixXd lambda = rate_matrix(Xb, result.params.beta);
    const double lam0 = result.params.lambda0;

    // E-step: posterior mean of the shared shock
    Eigen::VectorXd n0 = Eigen::VectorXd::Zero(mats.w.size());
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

    const Eigen::VectorXd packed_before =
        pack_parameters(spec, result.params, p, false).values;
    result.params.lambda0 = mats.w.dot(n0) / mats.w.sum();
    for (int j = 0; j < spec.m; ++j) {
      Eigen::VectorXd a = mats.w.cwiseProduct(mats.Zd.col(j) - n0);
      newton_step_inplace(poisson_block(Xb, std::move(a), mats.w),
                          result.params.beta[static_cast<std::size_t>(j)]);
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
      result.converged = true;
      break;
    }
  }
  result.loglik = loglik;
  finalize_fit(result, rows, p);
  return result;
}

FitResult fit_gamma_mixture(const ObservationSet& data, const ModelSpec& spec,
                            const FitConfig& config) {
  const auto rows = compress_rows(data);
  const auto mats = make_matrices(rows);
  const int p = data.p();
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const Eigen::MatrixXd Xb = mats.X.leftCols(beta_w);
  const Eigen::VectorXd zsum = mats.Zd.rowwise().sum();

  FitResult result;
  result.spec = spec;
  result.params = initial_parameters(spec, rows, p);

  double loglik = observed_loglik(spec, result.params, rows);
  result.loglik_trace.push_back(loglik);
  for (int iter = 0; iter < config.max_iter; ++iter) {
    const Eigen::MatrixXd lambda = rate_matrix(Xb, result.params.beta);
    const Eigen::VectorXd lsum = lambda.rowwise().sum();
    const double phi = result.params.phi[0];

    Eigen::VectorXd r(mats.w.size()), s(mats.w.size());
    for (Eigen::Index i = 0; i < mats.w.size(); ++i) {
      r[i] = (zsum[i] + phi) / (lsum[i] + phi);
      s[i] = digamma(zsum[i] + phi) - std::log(lsum[i] + phi);
    }

    const Eigen::VectorXd packed_before =
        pack_parameters(spec, result.params, p, false).values;
    for (int j = 0; j < spec.m; ++j) {
      newton_step_inplace(poisson_block(Xb, mats.w.cwiseProduct(mats.Zd.col(j)),
                                        mats.w.cwiseProduct(r)),
                          result.params.beta[static_cast<std::size_t>(j)]);
    }
    Eigen::VectorXd rho(1);
    rho[0] = std::log(result.params.phi[0]);
    newton_step_inplace(dispersion_block(mats.w, mats.w.cwiseProduct(s - r)), rho);
    result.params.phi[0] = std::exp(rho[0]);

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
      result.converged = true;
      break;
    }
  }
  result.loglik = loglik;
  finalize_fit(result, rows, p);
  return result;
}

} // namespace

FitResult fit_base_model(const ObservationSet& data, const ModelSpec& spec,
                         const FitConfig& config) {
  spec.validate();
  switch (spec.family) {
    case ModelFamily::MIP:
    case ModelFamily::MINB:
    case ModelFamily::MIH:
      return fit_independent(data, spec, config);
    case ModelFamily::MP:
      return fit_common_shock(data, spec, config);
    case ModelFamily::MNB:
      return fit_gamma_mixture(data, spec, config);
    default:
      throw std::invalid_argument("fit_base_model: not a base family");
  }
}

FitResult fit_model(const ObservationSet& data, const ModelSpec& spec, const FitConfig& config) {
  if (is_base_family(spec.family)) return fit_base_model(data, spec, config);
  if (is_zero_inflated(spec.family)) return fit_zero_inflated(data, spec, config);
  return fit_zero_modified(data, spec, config);
}

} // namespace mzcount
