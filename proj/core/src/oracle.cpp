#include "mzcount/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mzcount/fit_base.hpp"
#include "mzcount/fit_em.hpp"
#include "mzcount/fit_mm.hpp"
#include "mzcount/rng.hpp"

namespace mzcount {

double grid_total_mass(const ModelSpec& spec, const ParameterSet& params,
                       const Eigen::VectorXd& covariates, const GridSpec& grid) {
  const LocalParams local = local_params(spec, params, covariates);
  double mass = 0.0;
  for_each_count_vector(grid.upper, [&](const Eigen::VectorXi& z) {
    mass += std::exp(log_pmf_joint(spec, local, z));
  });
  return mass;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& objective,
                            const Eigen::VectorXd& point, double rel_step) {
  Eigen::VectorXd grad(point.size());
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::abs(point[k]));
    Eigen::VectorXd up = point, dn = point;
    up[k] += h;
    dn[k] -= h;
    grad[k] = (objective(up) - objective(dn)) / (2.0 * h);
  }
  return grad;
}

Eigen::VectorXd nelder_mead_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                     Eigen::VectorXd start, double initial_step, int max_evals,
                                     double tol) {
  const auto dim = start.size();
  int evals = 0;
  auto f = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = objective(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(start);
  values.push_back(f(start));
  for (Eigen::Index k = 0; k < dim; ++k) {
    Eigen::VectorXd vertex = start;
    vertex[k] += initial_step * std::max(1.0, std::abs(start[k]));
    simplex.push_back(vertex);
    values.push_back(f(vertex));
  }

  auto order = [&]() {
    std::vector<std::size_t> idx(simplex.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b];
    });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> v2;
    for (std::size_t i : idx) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };

  while (evals < max_evals) {
    order();
    if (std::abs(values.back() - values.front()) <
        tol * (1.0 + std::abs(values.front())))
      break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i + 1 < simplex.size(); ++i) centroid += simplex[i];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd worst = simplex.back();
    const Eigen::VectorXd reflected = centroid + (centroid - worst);
    const double fr = f(reflected);
    if (fr < values.front()) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - worst);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex.back() = expanded;
        values.back() = fe;
      } else {
        simplex.back() = reflected;
        values.back() = fr;
      }
    } else if (fr < values[values.size() - 2]) {
      simplex.back() = reflected;
      values.back() = fr;
    } else {
      const Eigen::VectorXd contracted = centroid + 0.5 * (worst - centroid);
      const double fc = f(contracted);
      if (fc < values.back()) {
        simplex.back() = contracted;
        values.back() = fc;
      } else {
        for (std::size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = simplex.front() + 0.5 * (simplex[i] - simplex.front());
          values[i] = f(simplex[i]);
        }
      }
    }
  }
  order();
  return simplex.front();
}

DirectMleResult direct_mle_small(const ObservationSet& data, const ModelSpec& spec) {
  if (data.p() != 0)
    throw std::invalid_argument("direct_mle_small: intercept-only data expected");
  const auto rows = compress_rows(data);

  DirectMleResult result;
  bool any_nonzero = false, any_zero = false;
  for (const auto& row : rows) {
    (row.z.sum() > 0 ? any_nonzero : any_zero) = true;
  }
  if (!any_nonzero || (!any_zero && !is_base_family(spec.family))) {
    result.identifiable = false;
    return result;
  }

  const ParameterSet init = initial_parameters(spec, rows, 0);
  auto objective = [&](const Eigen::VectorXd& theta) {
    try {
      return observed_loglik(spec, unpack_parameters(spec, theta, 0, true), rows);
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  const Eigen::VectorXd start = pack_parameters(spec, init, 0, true).values;
  Eigen::VectorXd best = start;
  double best_value = objective(best);
  // multi-start: the moment start plus deterministic jitters, each refined
  auto rng = Rng::stream(7, 0);
  for (int attempt = 0; attempt < 3; ++attempt) {
    Eigen::VectorXd s = best;
    if (attempt > 0) {
      for (Eigen::Index k = 0; k < s.size(); ++k) s[k] += 0.6 * (rng.uniform() - 0.5);
    }
    const Eigen::VectorXd candidate = nelder_mead_maximize(objective, s, 0.25, 60000, 1e-10);
    const double value = objective(candidate);
    if (value > best_value) {
      best_value = value;
      best = candidate;
    }
  }
  // final polish with a tighter simplex
  const Eigen::VectorXd polished = nelder_mead_maximize(objective, best, 0.02, 60000, 1e-12);
  if (objective(polished) > best_value) {
    best = polished;
    best_value = objective(polished);
  }

  result.params = unpack_parameters(spec, best, 0, true);
  result.loglik = best_value;
  return result;
}

namespace {

void record(SelfCheckReport& report, bool ok, const std::string& what) {
  (ok ? report.passed : report.failed) += 1;
  report.messages.push_back(std::string(ok ? "pass: " : "FAIL: ") + what);
}

} // namespace

SelfCheckReport run_self_check(std::uint64_t seed) {
  SelfCheckReport report;

  // normalization of a base and a modified pmf
  {
    ModelSpec spec;
    spec.family = ModelFamily::MIP;
    ParameterSet params;
    params.beta = {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 0.0)};
    GridSpec grid;
    grid.upper = Eigen::VectorXi::Constant(2, 40);
    const double mass = grid_total_mass(spec, params, Eigen::VectorXd::Ones(1), grid);
    record(report, std::abs(mass - 1.0) < 1e-10, "independent Poisson pmf normalizes");
  }
  {
    ModelSpec spec;
    spec.family = ModelFamily::MZMP1;
    ParameterSet params;
    params.gamma = Eigen::VectorXd::Constant(1, 0.4);
    params.beta = {Eigen::VectorXd::Constant(1, std::log(0.7)),
                   Eigen::VectorXd::Constant(1, std::log(1.1))};
    GridSpec grid;
    grid.upper = Eigen::VectorXi::Constant(2, 60);
    const double mass = grid_total_mass(spec, params, Eigen::VectorXd::Ones(1), grid);
    record(report, mass >= 1.0 - 1e-8 && mass <= 1.0 + 1e-8,
           "zero-modified Poisson pmf normalizes");
  }

  // engine vs direct search on one zero-inflated and one zero-modified sample
  {
    ModelSpec gen;
    gen.family = ModelFamily::MZIP1;
    ParameterSet truth;
    truth.gamma = Eigen::VectorXd::Constant(1, 0.8);
    truth.beta = {Eigen::VectorXd::Constant(1, std::log(0.9)),
                  Eigen::VectorXd::Constant(1, std::log(0.5))};
    const ObservationSet sample =
        sample_joint(gen, truth, Eigen::MatrixXd::Ones(800, 1), seed);
    const FitResult em = fit_zero_inflated(sample, gen);
    const DirectMleResult oracle = direct_mle_small(sample, gen);
    record(report, std::abs(em.loglik - oracle.loglik) < 1e-4,
           "EM matches direct search (zero-inflated Poisson)");

    ModelSpec zm = gen;
    zm.family = ModelFamily::MZMP1;
    const FitResult mm = fit_zero_modified(sample, zm);
    const DirectMleResult zm_oracle = direct_mle_small(sample, zm);
    record(report, std::abs(mm.loglik - zm_oracle.loglik) < 1e-4,
           "MM matches direct search (zero-modified Poisson)");
  }

  // closed-form moments vs Monte Carlo
  {
    ModelSpec spec;
    spec.family = ModelFamily::MZINB2;
    ParameterSet params;
    params.gamma = Eigen::VectorXd::Constant(1, 1.0);
    params.beta = {Eigen::VectorXd::Constant(1, std::log(0.8)),
                   Eigen::VectorXd::Constant(1, std::log(1.4))};
    params.phi = {1.7};
    const MomentSummary closed = moments(spec, params, Eigen::VectorXd::Ones(1));
    const int draws = 200000;
    const ObservationSet sample =
        sample_joint(spec, params, Eigen::MatrixXd::Ones(draws, 1), seed + 1);
    const Eigen::VectorXd mean = sample.counts.cast<double>().colwise().mean();
    bool ok = true;
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt(closed.variance[j] / draws);
      if (std::abs(mean[j] - closed.mean[j]) > 5.0 * se) ok = false;
    }
    record(report, ok, "closed-form means match Monte Carlo");
  }

  // spot gradient check on the Bernoulli mixing block
  {
    Eigen::MatrixXd design = Eigen::MatrixXd::Ones(5, 1);
    Eigen::VectorXd a(5), b(5);
    a << 0.2, 1.0, 0.7, 0.1, 0.9;
    b << 0.8, 0.0, 0.3, 0.9, 0.1;
    const QBlock block = bernoulli_block(design, a, b);
    const Eigen::VectorXd at = Eigen::VectorXd::Constant(1, 0.3);
    const double diff = (block.gradient(at) - fd_gradient(block.value, at)).cwiseAbs().maxCoeff();
    record(report, diff < 1e-6, "analytic mixing gradient matches finite differences");
  }

  return report;
}

} // namespace mzcount
