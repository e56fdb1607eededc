#include "mzcount/fit_common.hpp"

#include <cmath>
#include <map>
#include <memory>

#include "mzcount/special_functions.hpp"

namespace mzcount {

namespace {

constexpr double kLinkCap = 30.0;

double capped_exp(double eta) { return std::exp(std::clamp(eta, -kLinkCap, kLinkCap)); }

} // namespace

std::vector<WeightedRow> compress_rows(const ObservationSet& data) {
  data.validate();
  std::map<std::pair<std::vector<int>, std::vector<double>>, double> cells;
  const int m = data.m();
  const int width = data.p() + 1;
  for (int i = 0; i < data.n(); ++i) {
    std::vector<int> z(m);
    for (int j = 0; j < m; ++j) z[static_cast<std::size_t>(j)] = data.counts(i, j);
    std::vector<double> x(static_cast<std::size_t>(width));
    for (int k = 0; k < width; ++k) x[static_cast<std::size_t>(k)] = data.design(i, k);
    cells[{std::move(z), std::move(x)}] += 1.0;
  }
  std::vector<WeightedRow> rows;
  rows.reserve(cells.size());
  for (const auto& [key, weight] : cells) {
    WeightedRow row;
    row.z = Eigen::Map<const Eigen::VectorXi>(key.first.data(),
                                              static_cast<Eigen::Index>(key.first.size()));
    row.x = Eigen::Map<const Eigen::VectorXd>(key.second.data(),
                                              static_cast<Eigen::Index>(key.second.size()));
    row.weight = weight;
    rows.push_back(std::move(row));
  }
  return rows;
}

double observed_loglik(const ModelSpec& spec, const ParameterSet& params,
                       const std::vector<WeightedRow>& rows) {
  double total = 0.0;
  for (const auto& row : rows) {
    total += row.weight * log_pmf_joint(spec, params, row.x, row.z);
  }
  return total;
}

// ---------------------------------------------------------------------------

QBlock bernoulli_block(Eigen::MatrixXd design, Eigen::VectorXd a, Eigen::VectorXd b) {
  auto d = std::make_shared<Eigen::MatrixXd>(std::move(design));
  auto av = std::make_shared<Eigen::VectorXd>(std::move(a));
  auto bv = std::make_shared<Eigen::VectorXd>(std::move(b));
  QBlock block;
  block.value = [d, av, bv](const Eigen::VectorXd& theta) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double eta = d->row(i) * theta;
      // log pi = -log(1+e^-eta), log(1-pi) = -log(1+e^eta)
      const double log_pi = eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
      const double log_1mpi = log_pi - eta;
      total += (*av)[i] * log_pi + (*bv)[i] * log_1mpi;
    }
    return total;
  };
  block.gradient = [d, av, bv](const Eigen::VectorXd& theta) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double pi = logistic(d->row(i) * theta);
      g += ((*av)[i] - ((*av)[i] + (*bv)[i]) * pi) * d->row(i).transpose();
    }
    return g;
  };
  block.negative_hessian = [d, av, bv](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(theta.size(), theta.size());
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double pi = logistic(d->row(i) * theta);
      h += ((*av)[i] + (*bv)[i]) * pi * (1.0 - pi) * d->row(i).transpose() * d->row(i);
    }
    return h;
  };
  return block;
}

QBlock poisson_block(Eigen::MatrixXd design, Eigen::VectorXd a, Eigen::VectorXd b) {
  auto d = std::make_shared<Eigen::MatrixXd>(std::move(design));
  auto av = std::make_shared<Eigen::VectorXd>(std::move(a));
  auto bv = std::make_shared<Eigen::VectorXd>(std::move(b));
  QBlock block;
  block.value = [d, av, bv](const Eigen::VectorXd& theta) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double eta = d->row(i) * theta;
      total += (*av)[i] * eta - (*bv)[i] * capped_exp(eta);
    }
    return total;
  };
  block.gradient = [d, av, bv](const Eigen::VectorXd& theta) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double lambda = capped_exp(d->row(i) * theta);
      g += ((*av)[i] - (*bv)[i] * lambda) * d->row(i).transpose();
    }
    return g;
  };
  block.negative_hessian = [d, av, bv](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(theta.size(), theta.size());
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double lambda = capped_exp(d->row(i) * theta);
      h += (*bv)[i] * lambda * d->row(i).transpose() * d->row(i);
    }
    return h;
  };
  return block;
}

QBlock nb_margin_block(Eigen::MatrixXd design, Eigen::VectorXd z, Eigen::VectorXd w,
                       Eigen::VectorXd v) {
  auto d = std::make_shared<Eigen::MatrixXd>(std::move(design));
  auto zv = std::make_shared<Eigen::VectorXd>(std::move(z));
  auto wv = std::make_shared<Eigen::VectorXd>(std::move(w));
  auto tv = std::make_shared<Eigen::VectorXd>((*wv + v).eval());
  const auto q = d->cols();

  QBlock block;
  block.value = [d, zv, wv, tv, q](const Eigen::VectorXd& theta) {
    const double phi = std::exp(theta[q]);
    if (!(phi > 0.0) || !std::isfinite(phi)) return -std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double lambda = capped_exp(d->row(i) * theta.head(q));
      const double zi = (*zv)[i];
      const double denom = lambda + phi;
      total += (*wv)[i] * (log_gamma_ratio(static_cast<int>(zi), phi) +
                           zi * (std::log(lambda) - std::log(denom))) +
               (*tv)[i] * phi * std::log1p(-lambda / denom);
    }
    return std::isfinite(total) ? total : -std::numeric_limits<double>::infinity();
  };
  block.gradient = [d, zv, wv, tv, q](const Eigen::VectorXd& theta) {
    const double phi = std::exp(theta[q]);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q + 1);
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double lambda = capped_exp(d->row(i) * theta.head(q));
      const double zi = (*zv)[i], wi = (*wv)[i], ti = (*tv)[i];
      const double denom = lambda + phi;
      g.head(q) += (phi * (wi * zi - ti * lambda) / denom) * d->row(i).transpose();
      const double d_phi = wi * digamma_diff(static_cast<int>(zi), phi) +
                           ti * std::log1p(-lambda / denom) + (ti * lambda - wi * zi) / denom;
      g[q] += phi * d_phi;
    }
    return g;
  };
  block.negative_hessian = [d, zv, wv, tv, q](const Eigen::VectorXd& theta) {
    const double phi = std::exp(theta[q]);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(q + 1, q + 1);
    for (Eigen::Index i = 0; i < d->rows(); ++i) {
      const double lambda = capped_exp(d->row(i) * theta.head(q));
      const double zi = (*zv)[i], wi = (*wv)[i], ti = (*tv)[i];
      const double denom = lambda + phi;
      const auto x = d->row(i);
      const double h_ee = -phi * lambda * (wi * zi + ti * phi) / (denom * denom);
      const double h_pp = wi * trigamma_diff(static_cast<int>(zi), phi) +
                          ti * lambda / (phi * denom) - (ti * lambda - wi * zi) / (denom * denom);
      const double h_ep = (wi * zi - ti * lambda) * lambda / (denom * denom);
      const double g_phi = wi * digamma_diff(static_cast<int>(zi), phi) +
                           ti * std::log1p(-lambda / denom) + (ti * lambda - wi * zi) / denom;
      h.topLeftCorner(q, q) += h_ee * x.transpose() * x;
      // chain rule into rho = log phi
      h.block(0, q, q, 1) += phi * h_ep * x.transpose();
      h.block(q, 0, 1, q) += phi * h_ep * x;
      h(q, q) += phi * phi * h_pp + phi * g_phi;
    }
    return (-h).eval();
  };
  return block;
}

QBlock dispersion_block(Eigen::VectorXd c, Eigen::VectorXd d) {
  auto cv = std::make_shared<Eigen::VectorXd>(std::move(c));
  auto dv = std::make_shared<Eigen::VectorXd>(std::move(d));
  QBlock block;
  block.value = [cv, dv](const Eigen::VectorXd& theta) {
    const double phi = std::exp(theta[0]);
    if (!(phi > 0.0) || !std::isfinite(phi)) return -std::numeric_limits<double>::infinity();
    const double per = phi * std::log(phi) - log_gamma(phi);
    return cv->sum() * per + dv->sum() * phi;
  };
  block.gradient = [cv, dv](const Eigen::VectorXd& theta) {
    const double phi = std::exp(theta[0]);
    Eigen::VectorXd g(1);
    g[0] = phi * (cv->sum() * (std::log(phi) + 1.0 - digamma(phi)) + dv->sum());
    return g;
  };
  block.negative_hessian = [cv, dv](const Eigen::VectorXd& theta) {
    const double phi = std::exp(theta[0]);
    const double g_phi = cv->sum() * (std::log(phi) + 1.0 - digamma(phi)) + dv->sum();
    const double h_pp = cv->sum() * (1.0 / phi - trigamma(phi));
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = -(phi * phi * h_pp + phi * g_phi);
    return h;
  };
  return block;
}

// ---------------------------------------------------------------------------

PackedParams pack_parameters(const ModelSpec& spec, const ParameterSet& params, int p,
                             bool log_scale_positive) {
  validate_parameters(spec, params, p);
  PackedParams out;
  std::vector<double> vals;
  auto push_vec = [&](const Eigen::VectorXd& v, const std::string& stem) {
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      vals.push_back(v[k]);
      out.names.push_back(stem + "[" + std::to_string(k) + "]");
    }
  };
  if (params.gamma.size() > 0) push_vec(params.gamma, "gamma");
  for (int j = 0; j < spec.m; ++j)
    push_vec(params.beta[static_cast<std::size_t>(j)], "beta" + std::to_string(j + 1));
  for (int j = 0; j < static_cast<int>(params.alpha.size()); ++j)
    push_vec(params.alpha[static_cast<std::size_t>(j)], "alpha" + std::to_string(j + 1));
  for (std::size_t k = 0; k < params.phi.size(); ++k) {
    vals.push_back(log_scale_positive ? std::log(params.phi[k]) : params.phi[k]);
    out.names.push_back(params.phi.size() == 1 && has_shared_dispersion(spec.family)
                            ? "phi"
                            : "phi" + std::to_string(k + 1));
  }
  if (has_common_shock(spec.family)) {
    vals.push_back(log_scale_positive ? std::log(std::max(params.lambda0, 1e-12))
                                      : params.lambda0);
    out.names.push_back("lambda0");
  }
  out.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return out;
}

ParameterSet unpack_parameters(const ModelSpec& spec, const Eigen::VectorXd& values, int p,
                               bool log_scale_positive) {
  const int gamma_w = is_base_family(spec.family) ? 0 : 1 + (spec.covariates.gamma ? p : 0);
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const int alpha_w = is_hurdle_family(spec.family) ? 1 + (spec.covariates.alpha ? p : 0) : 0;

  ParameterSet params;
  Eigen::Index pos = 0;
  auto take = [&](int width) {
    Eigen::VectorXd v = values.segment(pos, width);
    pos += width;
    return v;
  };
  if (gamma_w > 0) params.gamma = take(gamma_w);
  for (int j = 0; j < spec.m; ++j) params.beta.push_back(take(beta_w));
  if (alpha_w > 0)
    for (int j = 0; j < spec.m; ++j) params.alpha.push_back(take(alpha_w));

  int phi_count = 0;
  if (has_shared_dispersion(spec.family)) phi_count = 1;
  else if (has_margin_dispersion(spec.family)) phi_count = spec.m;
  else if (is_hurdle_family(spec.family))
    for (MarginKind k : spec.margin_kinds)
      if (margin_has_dispersion(k)) ++phi_count;
  for (int k = 0; k < phi_count; ++k) {
    const double raw = values[pos++];
    params.phi.push_back(log_scale_positive ? std::exp(raw) : raw);
  }
  if (has_common_shock(spec.family)) {
    const double raw = values[pos++];
    params.lambda0 = log_scale_positive ? std::exp(raw) : raw;
  }
  if (pos != values.size())
    throw std::invalid_argument("unpack_parameters: length mismatch");
  return params;
}

// ---------------------------------------------------------------------------

void attach_standard_errors(FitResult& result, const std::vector<WeightedRow>& rows) {
  const int p = static_cast<int>(rows.front().x.size()) - 1;
  const PackedParams packed = pack_parameters(result.spec, result.params, p, false);
  const auto dim = packed.values.size();

  auto loglik_at = [&](const Eigen::VectorXd& theta) {
    try {
      return observed_loglik(result.spec, unpack_parameters(result.spec, theta, p, false), rows);
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  Eigen::MatrixXd hess(dim, dim);
  bool ok = true;
  const double f0 = loglik_at(packed.values);
  for (Eigen::Index a = 0; a < dim && ok; ++a) {
    const double ha = 1e-5 * std::max(1.0, std::abs(packed.values[a]));
    for (Eigen::Index b = a; b < dim && ok; ++b) {
      const double hb = 1e-5 * std::max(1.0, std::abs(packed.values[b]));
      double val;
      if (a == b) {
        Eigen::VectorXd up = packed.values, dn = packed.values;
        up[a] += ha;
        dn[a] -= ha;
        val = (loglik_at(up) - 2.0 * f0 + loglik_at(dn)) / (ha * ha);
      } else {
        Eigen::VectorXd pp = packed.values, pm = packed.values, mp = packed.values,
                        mm = packed.values;
        pp[a] += ha; pp[b] += hb;
        pm[a] += ha; pm[b] -= hb;
        mp[a] -= ha; mp[b] += hb;
        mm[a] -= ha; mm[b] -= hb;
        val = (loglik_at(pp) - loglik_at(pm) - loglik_at(mp) + loglik_at(mm)) / (4.0 * ha * hb);
      }
      if (!std::isfinite(val)) ok = false;
      hess(a, b) = hess(b, a) = val;
    }
  }

  result.coefficients.clear();
  Eigen::VectorXd se;
  if (ok) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt((-hess).eval());
    if (ldlt.info() == Eigen::Success) {
      const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(dim, dim));
      if (cov.allFinite() && (cov.diagonal().array() > 0.0).all()) {
        se = cov.diagonal().array().sqrt();
      }
    }
  }
  for (Eigen::Index k = 0; k < dim; ++k) {
    Coefficient c;
    c.name = packed.names[static_cast<std::size_t>(k)];
    c.value = packed.values[k];
    if (se.size() == dim && se[k] > 0.0) {
      c.std_error = se[k];
      c.t_ratio = packed.values[k] / se[k];
    }
    result.coefficients.push_back(std::move(c));
  }
}

ParameterSet initial_parameters(const ModelSpec& spec, const std::vector<WeightedRow>& rows,
                                int p) {
  const int m = spec.m;
  double total_weight = 0.0, nonzero_weight = 0.0;
  Eigen::VectorXd margin_mean = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd positive_weight = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd positive_sum = Eigen::VectorXd::Zero(m);
  for (const auto& row : rows) {
    total_weight += row.weight;
    if (row.z.sum() > 0) nonzero_weight += row.weight;
    for (int j = 0; j < m; ++j) {
      margin_mean[j] += row.weight * row.z[j];
      if (row.z[j] > 0) {
        positive_weight[j] += row.weight;
        positive_sum[j] += row.weight * row.z[j];
      }
    }
  }
  margin_mean /= total_weight;

  const int gamma_w = is_base_family(spec.family) ? 0 : 1 + (spec.covariates.gamma ? p : 0);
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const int alpha_w = is_hurdle_family(spec.family) ? 1 + (spec.covariates.alpha ? p : 0) : 0;

  ParameterSet params;
  if (gamma_w > 0) {
    params.gamma = Eigen::VectorXd::Zero(gamma_w);
    const double frac = std::clamp(nonzero_weight / total_weight, 1e-6, 1.0 - 1e-6);
    params.gamma[0] = std::log(frac / (1.0 - frac));
  }
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(beta_w);
    if (is_hurdle_family(spec.family)) {
      // occurrence probability from the per-margin nonzero fraction
      const double frac = std::clamp(positive_weight[j] / total_weight, 1e-6, 1.0 - 1e-6);
      b[0] = std::log(frac / (1.0 - frac));
    } else {
      b[0] = std::log(std::max(margin_mean[j], 0.05));
    }
    params.beta.push_back(std::move(b));
  }
  if (alpha_w > 0) {
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(alpha_w);
      const double pos_mean =
          positive_weight[j] > 0 ? positive_sum[j] / positive_weight[j] : 1.0;
      const MarginKind kind = spec.margin_kinds[static_cast<std::size_t>(j)];
      const bool shifted = (kind == MarginKind::USP || kind == MarginKind::USNB);
      a[0] = std::log(std::max(shifted ? pos_mean - 1.0 : pos_mean, 0.05));
      params.alpha.push_back(std::move(a));
    }
  }

  int phi_count = 0;
  if (has_shared_dispersion(spec.family)) phi_count = 1;
  else if (has_margin_dispersion(spec.family)) phi_count = m;
  else if (is_hurdle_family(spec.family))
    for (MarginKind k : spec.margin_kinds)
      if (margin_has_dispersion(k)) ++phi_count;
  params.phi.assign(static_cast<std::size_t>(phi_count), 1.0);

  if (has_common_shock(spec.family)) params.lambda0 = 0.1 * margin_mean.minCoeff();
  return params;
}

void finalize_fit(FitResult& result, const std::vector<WeightedRow>& rows, int p) {
  double n = 0.0;
  for (const auto& row : rows) n += row.weight;
  result.n_obs = static_cast<long>(std::llround(n));
  result.n_params = n_params(result.spec, p);
  result.aic = -2.0 * result.loglik + 2.0 * result.n_params;
  result.bic = -2.0 * result.loglik + result.n_params * std::log(n);
  attach_standard_errors(result, rows);
}

} // namespace mzcount
