#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mzcount/oracle.hpp"
#include "mzcount/univariate.hpp"

using namespace mzcount;

namespace {

UnivariateParams make_params(MarginKind kind, double lambda, double phi) {
  UnivariateParams params;
  params.lambda = lambda;
  if (margin_has_dispersion(kind)) params.phi = phi;
  return params;
}

const MarginKind kAllKinds[] = {MarginKind::ZTP, MarginKind::ZTNB, MarginKind::USP,
                                MarginKind::USNB};

} // namespace

TEST_CASE("poisson and negbin pmfs normalize and match moments") {
  for (double lambda : {0.3, 1.7, 6.0}) {
    double mass = 0.0, mean = 0.0;
    for (int y = 0; y < 200; ++y) {
      const double p = pmf_poisson(y, lambda);
      mass += p;
      mean += y * p;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mean == doctest::Approx(lambda).epsilon(1e-10));
  }
  for (double lambda : {0.5, 2.5}) {
    for (double phi : {0.4, 3.0}) {
      double mass = 0.0, mean = 0.0, second = 0.0;
      for (int y = 0; y < 3000; ++y) {
        const double p = pmf_negbin(y, lambda, phi);
        mass += p;
        mean += y * p;
        second += double(y) * y * p;
      }
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(mean == doctest::Approx(lambda).epsilon(1e-8));
      CHECK(second - mean * mean ==
            doctest::Approx(lambda + lambda * lambda / phi).epsilon(1e-6));
    }
  }
}

TEST_CASE("positive-support margins normalize over w >= 1") {
  for (MarginKind kind : kAllKinds) {
    for (double lambda : {0.2, 1.1, 4.0}) {
      const auto params = make_params(kind, lambda, 1.3);
      double mass = 0.0;
      for (int w = 1; w < 2000; ++w) mass += pmf_margin(w, kind, params);
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("zero truncation identity") {
  // ZT pmf is the parent pmf renormalized over the positive support
  for (double lambda : {0.6, 2.4}) {
    const auto params = make_params(MarginKind::ZTP, lambda, 0.0);
    const double p0 = std::exp(parent_log_zero_mass(MarginKind::ZTP, lambda, 0.0));
    for (int w = 1; w <= 10; ++w) {
      CHECK(pmf_margin(w, MarginKind::ZTP, params) ==
            doctest::Approx(pmf_poisson(w, lambda) / (1.0 - p0)).epsilon(1e-12));
    }
    const auto nb = make_params(MarginKind::ZTNB, lambda, 0.9);
    const double q0 = std::exp(parent_log_zero_mass(MarginKind::ZTNB, lambda, 0.9));
    for (int w = 1; w <= 10; ++w) {
      CHECK(pmf_margin(w, MarginKind::ZTNB, nb) ==
            doctest::Approx(pmf_negbin(w, lambda, 0.9) / (1.0 - q0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("unit shift identity") {
  const auto params = make_params(MarginKind::USP, 1.8, 0.0);
  for (int w = 1; w <= 12; ++w) {
    CHECK(pmf_margin(w, MarginKind::USP, params) ==
          doctest::Approx(pmf_poisson(w - 1, 1.8)).epsilon(1e-14));
  }
  const auto nb = make_params(MarginKind::USNB, 0.7, 2.2);
  for (int w = 1; w <= 12; ++w) {
    CHECK(pmf_margin(w, MarginKind::USNB, nb) ==
          doctest::Approx(pmf_negbin(w - 1, 0.7, 2.2)).epsilon(1e-14));
  }
}

TEST_CASE("two-part pmf splits mass at zero") {
  for (MarginKind kind : kAllKinds) {
    const auto params = make_params(kind, 1.4, 1.1);
    const double pi0p = 0.37;
    CHECK(pmf_zero_modified(0, kind, params, pi0p) == doctest::Approx(1.0 - pi0p));
    double mass = pmf_zero_modified(0, kind, params, pi0p);
    for (int w = 1; w < 500; ++w) mass += pmf_zero_modified(w, kind, params, pi0p);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(pmf_zero_modified(3, kind, params, pi0p) ==
          doctest::Approx(pi0p * pmf_margin(3, kind, params)).epsilon(1e-14));
  }
}

TEST_CASE("margin regression gradient matches finite differences") {
  std::vector<int> counts = {1, 2, 1, 4, 3, 1, 2, 6, 1, 2};
  Eigen::MatrixXd design(10, 2);
  design.col(0).setOnes();
  design.col(1) << 0, 1, 0, 1, 1, 0, 0, 1, 0, 1;
  std::vector<double> weights = {1, 1, 2, 1, 0.5, 1, 3, 1, 1, 1.5};
  for (MarginKind kind : kAllKinds) {
    TruncatedMarginObjective objective(counts, design, weights, kind);
    Eigen::VectorXd theta(objective.dim());
    theta.setZero();
    theta[0] = 0.3;
    if (objective.dim() == 3) theta[2] = 0.2; // log phi
    const Eigen::VectorXd analytic = objective.gradient(theta);
    const Eigen::VectorXd numeric = fd_gradient(
        [&](const Eigen::VectorXd& t) { return objective.value(t); }, theta, 1e-6);
    CHECK((analytic - numeric).cwiseAbs().maxCoeff() <
          1e-4 * std::max(1.0, analytic.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("fit trace is nondecreasing and the gradient vanishes at the optimum") {
  for (MarginKind kind : kAllKinds) {
    const auto sample = sample_margin(kind, make_params(kind, 1.6, 1.2), 4000, 11);
    const auto fit = fit_truncated_margin(sample, kind);
    REQUIRE(fit.converged);
    for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t) {
      CHECK(fit.loglik_trace[t] >=
            fit.loglik_trace[t - 1] - 1e-8 * std::abs(fit.loglik_trace[t - 1]));
    }
    // stationarity in the unconstrained scale
    Eigen::MatrixXd design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(sample.size()), 1);
    std::vector<double> weights(sample.size(), 1.0);
    TruncatedMarginObjective objective(std::vector<int>(sample.begin(), sample.end()), design,
                                       weights, kind);
    Eigen::VectorXd theta(objective.dim());
    theta[0] = std::log(fit.params.lambda);
    if (objective.dim() == 2) theta[1] = std::log(*fit.params.phi);
    CHECK(objective.gradient(theta).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("goodness-of-fit cells are consistent") {
  const auto sample = sample_margin(MarginKind::USNB, make_params(MarginKind::USNB, 0.8, 1.0),
                                    5000, 21);
  const auto fit = fit_truncated_margin(sample, MarginKind::USNB);
  REQUIRE(fit.observed_cells.size() == 6);
  REQUIRE(fit.expected_cells.size() == 6);
  const long observed_total =
      std::accumulate(fit.observed_cells.begin(), fit.observed_cells.end(), 0L);
  CHECK(observed_total == static_cast<long>(sample.size()));
  const double expected_total =
      std::accumulate(fit.expected_cells.begin(), fit.expected_cells.end(), 0.0);
  CHECK(expected_total == doctest::Approx(double(sample.size())).epsilon(1e-6));
  CHECK(fit.chi_square >= 0.0);
}

TEST_CASE("samplers reproduce their first moments") {
  const int n = 60000;
  {
    const auto draws = sample_poisson(2.3, n, 5);
    const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
    CHECK(mean == doctest::Approx(2.3).epsilon(0.02));
  }
  {
    const auto draws = sample_negbin(1.5, 0.8, n, 6);
    const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
    CHECK(mean == doctest::Approx(1.5).epsilon(0.03));
  }
  {
    UnivariateParams params = make_params(MarginKind::USNB, 1.5, 0.8);
    const auto draws = sample_zero_modified(MarginKind::USNB, params, 0.4, n, 7);
    const long zeros = std::count(draws.begin(), draws.end(), 0);
    CHECK(double(zeros) / n == doctest::Approx(0.6).epsilon(0.02));
  }
  {
    UnivariateParams params = make_params(MarginKind::ZTP, 1.0, 0.0);
    params.pi0 = 0.3;
    const auto draws = sample_zero_inflated(params, n, 8);
    const long zeros = std::count(draws.begin(), draws.end(), 0);
    const double expected_zero = 0.7 + 0.3 * std::exp(-1.0);
    CHECK(double(zeros) / n == doctest::Approx(expected_zero).epsilon(0.02));
  }
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto a = sample_margin(MarginKind::ZTNB, make_params(MarginKind::ZTNB, 1.1, 0.6), 200, 42);
  const auto b = sample_margin(MarginKind::ZTNB, make_params(MarginKind::ZTNB, 1.1, 0.6), 200, 42);
  CHECK(a == b);
}
