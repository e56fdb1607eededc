#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

namespace mzcount {

struct SingularSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonAscentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NewtonStepReport {
  Eigen::VectorXd proposed_delta; // already scaled by the accepted step factor
  Eigen::VectorXd new_params;
  int halvings_used = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
};

struct NewtonOptions {
  int max_halvings = 40;
  double ridge_scale = 1e-8; // one-shot diagonal ridge: ridge_scale * trace / dim
};

/// One Newton-Raphson ascent step delta = H^{-1} g solved by LDLT, with the
/// step factor halved until the objective does not decrease. The objective
/// callable may return -inf/NaN for out-of-domain points; such points are
/// treated as decreases.
NewtonStepReport ascent_newton_step(
    const Eigen::VectorXd& gradient, const Eigen::MatrixXd& negative_hessian,
    const Eigen::VectorXd& current_params,
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const NewtonOptions& options = {});

} // namespace mzcount
