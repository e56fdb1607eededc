#include <doctest.h>

#include <cmath>

#include "mzcount/multivariate.hpp"
#include "mzcount/oracle.hpp"
#include "mzcount/rng.hpp"

using namespace mzcount;

namespace {

ModelSpec make_spec(ModelFamily family, int m = 2) {
  ModelSpec spec;
  spec.family = family;
  spec.m = m;
  if (is_hurdle_family(family))
    spec.margin_kinds.assign(static_cast<std::size_t>(m), MarginKind::USNB);
  return spec;
}

ParameterSet random_params(const ModelSpec& spec, Rng& rng) {
  ParameterSet params;
  if (!is_base_family(spec.family))
    params.gamma = Eigen::VectorXd::Constant(1, rng.normal());
  for (int j = 0; j < spec.m; ++j) {
    if (is_hurdle_family(spec.family)) {
      params.beta.push_back(Eigen::VectorXd::Constant(1, rng.normal()));
      params.alpha.push_back(Eigen::VectorXd::Constant(1, std::log(0.2 + rng.uniform())));
    } else {
      params.beta.push_back(Eigen::VectorXd::Constant(1, std::log(0.2 + rng.uniform())));
    }
  }
  if (has_shared_dispersion(spec.family)) params.phi = {0.4 + 2.0 * rng.uniform()};
  if (has_margin_dispersion(spec.family))
    for (int j = 0; j < spec.m; ++j) params.phi.push_back(0.4 + 2.0 * rng.uniform());
  if (is_hurdle_family(spec.family)) {
    params.phi.clear();
    for (int j = 0; j < spec.m; ++j) params.phi.push_back(0.4 + 2.0 * rng.uniform());
  }
  if (has_common_shock(spec.family)) params.lambda0 = 0.1 + 0.4 * rng.uniform();
  return params;
}

const Eigen::VectorXd kIntercept = Eigen::VectorXd::Ones(1);

} // namespace

TEST_CASE("every joint pmf normalizes on a tail-bounded grid") {
  auto rng = Rng::stream(3001, 0);
  for (ModelFamily family : kAllFamilies) {
    const ModelSpec spec = make_spec(family);
    for (int rep = 0; rep < 3; ++rep) {
      const ParameterSet params = random_params(spec, rng);
      const LocalParams local = local_params(spec, params, kIntercept);
      GridSpec grid;
      grid.upper = default_grid_upper(spec, local, 1e-12);
      const double mass = grid_total_mass(spec, params, kIntercept, grid);
      INFO(family_name(family), " rep ", rep, " mass ", mass);
      CHECK(mass >= 1.0 - 1e-8);
      CHECK(mass <= 1.0 + 1e-8);
    }
  }
}

TEST_CASE("zero-cell identities") {
  auto rng = Rng::stream(3002, 0);
  Eigen::VectorXi zero = Eigen::VectorXi::Zero(2);
  for (ModelFamily family : kAllFamilies) {
    const ModelSpec spec = make_spec(family);
    for (int rep = 0; rep < 5; ++rep) {
      const ParameterSet params = random_params(spec, rng);
      const LocalParams local = local_params(spec, params, kIntercept);
      // closed-form f_Y(0) equals the pmf dispatch evaluated at the origin
      const double direct = base_log_zero_mass(spec, local);
      const double via_pmf = log_base_pmf(spec, local, zero);
      CHECK(direct == doctest::Approx(via_pmf).epsilon(1e-12));

      const double pi0 = induced_pi0(spec, local);
      CHECK(pi0 > 0.0);
      CHECK(pi0 < 1.0);
      CHECK(pi0 == doctest::Approx(-std::expm1(direct)).epsilon(1e-14));

      if (is_zero_inflated(family)) {
        const double expected =
            std::log((1.0 - local.mix) + local.mix * std::exp(direct));
        CHECK(log_pmf_joint(spec, local, zero) ==
              doctest::Approx(expected).epsilon(1e-12));
      }
      if (is_zero_modified(family)) {
        CHECK(log_pmf_joint(spec, local, zero) ==
              doctest::Approx(std::log1p(-local.mix)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("common shock at lambda0 = 0 reduces to independent Poisson") {
  ParameterSet params;
  params.beta = {Eigen::VectorXd::Constant(1, std::log(0.8)),
                 Eigen::VectorXd::Constant(1, std::log(1.3))};
  params.lambda0 = 0.0;
  const ModelSpec mp = make_spec(ModelFamily::MP);
  const ModelSpec mip = make_spec(ModelFamily::MIP);
  ParameterSet mip_params = params;
  mip_params.lambda0 = 0.0;
  Eigen::VectorXi z(2);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      z << a, b;
      CHECK(log_pmf_joint(mp, params, kIntercept, z) ==
            doctest::Approx(log_pmf_joint(mip, mip_params, kIntercept, z)).epsilon(1e-12));
    }
}

TEST_CASE("type II zero-modified Poisson at lambda0 = 0 equals type I") {
  ParameterSet p1, p2;
  p1.gamma = p2.gamma = Eigen::VectorXd::Constant(1, 0.3);
  p1.beta = p2.beta = {Eigen::VectorXd::Constant(1, std::log(0.6)),
                       Eigen::VectorXd::Constant(1, std::log(1.1))};
  p2.lambda0 = 0.0;
  const ModelSpec m1 = make_spec(ModelFamily::MZMP1);
  const ModelSpec m2 = make_spec(ModelFamily::MZMP2);
  Eigen::VectorXi z(2);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      z << a, b;
      CHECK(log_pmf_joint(m1, p1, kIntercept, z) ==
            doctest::Approx(log_pmf_joint(m2, p2, kIntercept, z)).epsilon(1e-12));
    }
}

TEST_CASE("zero-inflated and zero-modified agree under the reparameterization") {
  // ZM with pi0' = pi0_zi * (1 - f_Y(0)) / (1 - pi0_zi f_Y(0)) ... equivalently:
  // ZI with mixing pi and base Y puts pi * f_Y(z) on nonzero z; ZM matches when
  // pi0'_zm = pi * pi0_induced.
  auto rng = Rng::stream(3003, 0);
  struct Pair {
    ModelFamily zi, zm;
  };
  const Pair pairs[] = {{ModelFamily::MZIP1, ModelFamily::MZMP1},
                        {ModelFamily::MZINB1, ModelFamily::MZMNB1},
                        {ModelFamily::MZIH1, ModelFamily::MZMH1},
                        {ModelFamily::MZIP2, ModelFamily::MZMP2},
                        {ModelFamily::MZINB2, ModelFamily::MZMNB2}};
  for (const auto& pair : pairs) {
    const ModelSpec zi_spec = make_spec(pair.zi);
    const ModelSpec zm_spec = make_spec(pair.zm);
    for (int rep = 0; rep < 3; ++rep) {
      ParameterSet zi_params = random_params(zi_spec, rng);
      const LocalParams zi_local = local_params(zi_spec, zi_params, kIntercept);
      const double pi = zi_local.mix;
      const double pi0 = induced_pi0(zi_spec, zi_local);
      ParameterSet zm_params = zi_params;
      const double target = pi * pi0; // matched P(Z != 0)
      zm_params.gamma[0] = std::log(target / (1.0 - target));
      Eigen::VectorXi z(2);
      for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
          z << a, b;
          CHECK(log_pmf_joint(zi_spec, zi_params, kIntercept, z) ==
                doctest::Approx(log_pmf_joint(zm_spec, zm_params, kIntercept, z))
                    .epsilon(1e-10));
        }
    }
  }
}

TEST_CASE("gamma-mixture margins are univariate negative binomial") {
  const ModelSpec spec = make_spec(ModelFamily::MNB);
  ParameterSet params;
  params.beta = {Eigen::VectorXd::Constant(1, std::log(0.9)),
                 Eigen::VectorXd::Constant(1, std::log(0.5))};
  params.phi = {1.4};
  // marginalize the joint over the second margin
  for (int a = 0; a < 8; ++a) {
    double mass = 0.0;
    Eigen::VectorXi z(2);
    for (int b = 0; b < 400; ++b) {
      z << a, b;
      mass += pmf_joint(spec, params, kIntercept, z);
    }
    CHECK(mass == doctest::Approx(pmf_negbin(a, 0.9, 1.4)).epsilon(1e-9));
  }
}

TEST_CASE("classification of the modification direction") {
  CHECK(classify_modification(0.4, 0.2) == ZeroModification::Inflated);
  CHECK(classify_modification(0.4, 0.6) == ZeroModification::Deflated);
  CHECK(classify_modification(0.4, 0.4) == ZeroModification::Standard);
  CHECK(zero_modification_name(ZeroModification::Inflated) == "zero-inflated");
}

TEST_CASE("moment summaries are coherent") {
  auto rng = Rng::stream(3004, 0);
  for (ModelFamily family : kAllFamilies) {
    const ModelSpec spec = make_spec(family);
    for (int rep = 0; rep < 3; ++rep) {
      const ParameterSet params = random_params(spec, rng);
      const MomentSummary mom = moments(spec, params, kIntercept);
      REQUIRE(mom.mean.size() == 2);
      for (int j = 0; j < 2; ++j) {
        CHECK(mom.mean[j] > 0.0);
        CHECK(mom.variance[j] > 0.0);
        CHECK(mom.covariance(j, j) == doctest::Approx(mom.variance[j]).epsilon(1e-10));
      }
      CHECK(mom.covariance(0, 1) == doctest::Approx(mom.covariance(1, 0)).epsilon(1e-10));
      const double corr =
          mom.covariance(0, 1) / std::sqrt(mom.variance[0] * mom.variance[1]);
      CHECK(corr >= -1.0);
      CHECK(corr <= 1.0);
      CHECK(mom.total_mean == doctest::Approx(mom.mean.sum()).epsilon(1e-10));
      CHECK(mom.total_variance ==
            doctest::Approx(mom.variance.sum() + 2.0 * mom.covariance(0, 1)).epsilon(1e-10));
    }
  }
}

TEST_CASE("closed-form moments match grid summation") {
  auto rng = Rng::stream(3005, 0);
  for (ModelFamily family : kAllFamilies) {
    const ModelSpec spec = make_spec(family);
    const ParameterSet params = random_params(spec, rng);
    const LocalParams local = local_params(spec, params, kIntercept);
    const Eigen::VectorXi upper = default_grid_upper(spec, local, 1e-13);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(2, 2);
    for_each_count_vector(upper, [&](const Eigen::VectorXi& z) {
      const double p = std::exp(log_pmf_joint(spec, local, z));
      const Eigen::VectorXd zd = z.cast<double>();
      mean += p * zd;
      second += p * zd * zd.transpose();
    });
    const Eigen::MatrixXd cov = second - mean * mean.transpose();
    const MomentSummary mom = moments(spec, params, kIntercept);
    INFO(family_name(family));
    for (int j = 0; j < 2; ++j) {
      CHECK(mom.mean[j] == doctest::Approx(mean[j]).epsilon(1e-6));
      CHECK(mom.variance[j] == doctest::Approx(cov(j, j)).epsilon(1e-5));
    }
    CHECK(mom.covariance(0, 1) == doctest::Approx(cov(0, 1)).epsilon(2e-5));
  }
}

TEST_CASE("sampling matches the pmf cell frequencies") {
  const ModelSpec spec = make_spec(ModelFamily::MZIP2);
  ParameterSet params;
  params.gamma = Eigen::VectorXd::Constant(1, 0.9);
  params.beta = {Eigen::VectorXd::Constant(1, std::log(0.5)),
                 Eigen::VectorXd::Constant(1, std::log(0.8))};
  params.lambda0 = 0.3;
  const int n = 120000;
  const ObservationSet sample =
      sample_joint(spec, params, Eigen::MatrixXd::Ones(n, 1), 77);
  Eigen::VectorXi z(2);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      z << a, b;
      long hits = 0;
      for (int i = 0; i < n; ++i)
        if (sample.counts(i, 0) == a && sample.counts(i, 1) == b) ++hits;
      const double p = pmf_joint(spec, params, kIntercept, z);
      const double se = std::sqrt(p * (1.0 - p) / n);
      CHECK(std::abs(double(hits) / n - p) < 5.0 * se + 1e-9);
    }
}

TEST_CASE("sampling is reproducible and row-order invariant in the seed") {
  const ModelSpec spec = make_spec(ModelFamily::MZMNB1);
  ParameterSet params;
  params.gamma = Eigen::VectorXd::Constant(1, -0.2);
  params.beta = {Eigen::VectorXd::Constant(1, std::log(0.7)),
                 Eigen::VectorXd::Constant(1, std::log(0.4))};
  params.phi = {1.1, 0.9};
  const Eigen::MatrixXd design = Eigen::MatrixXd::Ones(300, 1);
  const ObservationSet a = sample_joint(spec, params, design, 123);
  const ObservationSet b = sample_joint(spec, params, design, 123);
  CHECK(a.counts == b.counts);
  const ObservationSet c = sample_joint(spec, params, design, 124);
  CHECK(a.counts != c.counts);
}
