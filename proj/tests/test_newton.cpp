#include <doctest.h>

#include "mzcount/newton.hpp"
#include "mzcount/rng.hpp"

using namespace mzcount;

namespace {

// concave quadratic -0.5 (x-c)' A (x-c)
struct Quadratic {
  Eigen::MatrixXd A;
  Eigen::VectorXd c;
  double value(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd d = x - c;
    return -0.5 * d.dot(A * d);
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return -A * (x - c); }
};

} // namespace

TEST_CASE("exact step on a quadratic reaches the maximizer") {
  Quadratic q;
  q.A.resize(2, 2);
  q.A << 3.0, 1.0, 1.0, 2.0;
  q.c.resize(2);
  q.c << -1.5, 4.0;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  const auto report = ascent_newton_step(
      q.gradient(x0), q.A, x0, [&](const Eigen::VectorXd& x) { return q.value(x); });
  CHECK((report.new_params - q.c).norm() < 1e-12);
  CHECK(report.objective_after >= report.objective_before);
  CHECK(report.halvings_used == 0);
}

TEST_CASE("objective never decreases across random problems") {
  auto rng = Rng::stream(99, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 4;
    Eigen::MatrixXd B(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) B(i, j) = rng.normal();
    Quadratic q;
    q.A = B.transpose() * B + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
    q.c = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) q.c[i] = 3.0 * rng.normal();
    Eigen::VectorXd x0(dim);
    for (int i = 0; i < dim; ++i) x0[i] = 2.0 * rng.normal();

    // deliberately inflate the gradient so the full step overshoots and the
    // halving safeguard has to engage on a non-quadratic objective
    auto objective = [&](const Eigen::VectorXd& x) {
      return q.value(x) - 0.05 * std::pow((x - q.c).squaredNorm(), 2);
    };
    const auto report =
        ascent_newton_step(3.0 * q.gradient(x0), q.A, x0, objective);
    CHECK(report.objective_after >= report.objective_before);
  }
}

TEST_CASE("out-of-domain proposals are halved back into the domain") {
  // concave for x > 0.5, maximum at x = 1; undefined at or below the boundary
  auto objective = [](const Eigen::VectorXd& x) {
    if (x[0] <= 0.5) return -std::numeric_limits<double>::infinity();
    return std::log(x[0] - 0.5) - 2.0 * x[0];
  };
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 2.0);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 1.0 / 1.5 - 2.0); // true gradient
  // understated curvature overshoots past the boundary
  Eigen::MatrixXd H = Eigen::MatrixXd::Constant(1, 1, 0.5);
  const auto report = ascent_newton_step(g, H, x0, objective);
  CHECK(report.new_params[0] > 0.5);
  CHECK(std::isfinite(report.objective_after));
  CHECK(report.objective_after >= report.objective_before);
  CHECK(report.halvings_used > 0);
}

TEST_CASE("indefinite curvature is ridged into an ascent direction") {
  // concave objective but a wrong-signed Hessian handed to the step
  auto objective = [](const Eigen::VectorXd& x) { return -x.squaredNorm(); };
  Eigen::VectorXd x0(2);
  x0 << 2.0, -1.0;
  Eigen::VectorXd g(2);
  g << -4.0, 2.0; // true gradient
  Eigen::MatrixXd H(2, 2);
  H << 1.0, 0.0, 0.0, -3.0; // indefinite
  const auto report = ascent_newton_step(g, H, x0, objective);
  CHECK(report.objective_after > report.objective_before);
  CHECK(g.dot(report.proposed_delta) > 0.0);
}

TEST_CASE("flat objective with zero curvature still returns a non-decreasing step") {
  Eigen::VectorXd g = Eigen::VectorXd::Ones(2);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, 2);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  auto objective = [](const Eigen::VectorXd&) { return 0.0; };
  const auto report = ascent_newton_step(g, H, x0, objective);
  CHECK(report.objective_after == report.objective_before);
}
