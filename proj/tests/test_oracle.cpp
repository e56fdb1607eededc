#include <doctest.h>

#include <cmath>

#include "mzcount/fit_base.hpp"
#include "mzcount/fit_em.hpp"
#include "mzcount/fit_mm.hpp"
#include "mzcount/oracle.hpp"
#include "mzcount/rng.hpp"

using namespace mzcount;

TEST_CASE("nelder-mead recovers known maxima") {
  // smooth concave function with maximum at (1, -2)
  auto objective = [](const Eigen::VectorXd& x) {
    return -std::pow(x[0] - 1.0, 2) - 2.0 * std::pow(x[1] + 2.0, 2) -
           0.5 * std::pow(x[0] - 1.0, 4);
  };
  Eigen::VectorXd start = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd best = nelder_mead_maximize(objective, start);
  CHECK(best[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(best[1] == doctest::Approx(-2.0).epsilon(1e-4));
}

TEST_CASE("fd_gradient on a polynomial") {
  auto f = [](const Eigen::VectorXd& x) { return x[0] * x[0] * x[1] + 3.0 * x[1]; };
  Eigen::VectorXd at(2);
  at << 2.0, -1.0;
  const Eigen::VectorXd g = fd_gradient(f, at);
  CHECK(g[0] == doctest::Approx(-4.0).epsilon(1e-7));
  CHECK(g[1] == doctest::Approx(7.0).epsilon(1e-7));
}

TEST_CASE("direct search refuses degenerate data") {
  ObservationSet all_zero;
  all_zero.counts = Eigen::MatrixXi::Zero(20, 2);
  all_zero.design = Eigen::MatrixXd::Ones(20, 1);
  ModelSpec spec;
  spec.family = ModelFamily::MZIP1;
  const DirectMleResult result = direct_mle_small(all_zero, spec);
  CHECK_FALSE(result.identifiable);
}

TEST_CASE("engines agree with the direct search across families") {
  // one synthetic instance per family here; the acceptance gate runs ten
  auto rng = Rng::stream(4000, 0);
  for (ModelFamily family : kAllFamilies) {
    ModelSpec spec;
    spec.family = family;
    if (is_hurdle_family(family)) spec.margin_kinds = {MarginKind::USNB, MarginKind::USNB};

    ParameterSet truth;
    if (!is_base_family(family))
      truth.gamma = Eigen::VectorXd::Constant(1, 0.4 + 0.4 * rng.uniform());
    for (int j = 0; j < 2; ++j) {
      if (is_hurdle_family(family)) {
        truth.beta.push_back(Eigen::VectorXd::Constant(1, -0.4 + 0.8 * rng.uniform()));
        truth.alpha.push_back(
            Eigen::VectorXd::Constant(1, std::log(0.4 + 0.5 * rng.uniform())));
      } else {
        truth.beta.push_back(
            Eigen::VectorXd::Constant(1, std::log(0.4 + 0.8 * rng.uniform())));
      }
    }
    if (has_shared_dispersion(family)) truth.phi = {0.8 + rng.uniform()};
    if (has_margin_dispersion(family) || is_hurdle_family(family))
      truth.phi = {0.8 + rng.uniform(), 0.8 + rng.uniform()};
    if (has_common_shock(family)) truth.lambda0 = 0.15;

    const ObservationSet data =
        sample_joint(spec, truth, Eigen::MatrixXd::Ones(500, 1), 4100 + int(family));
    const FitResult engine = fit_model(data, spec);
    const DirectMleResult oracle = direct_mle_small(data, spec);
    REQUIRE(oracle.identifiable);
    INFO(family_name(family), " engine ", engine.loglik, " oracle ", oracle.loglik);
    CHECK(engine.loglik >= oracle.loglik - 1e-4);
  }
}

TEST_CASE("self-check battery passes") {
  const SelfCheckReport report = run_self_check();
  INFO(report.failed, " failures");
  for (const auto& message : report.messages) INFO(message);
  CHECK(report.ok());
}
