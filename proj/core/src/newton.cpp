#include "mzcount/newton.hpp"

#include <cmath>

namespace mzcount {

namespace {

bool solvable(const Eigen::LDLT<Eigen::MatrixXd>& ldlt, const Eigen::MatrixXd& a,
              const Eigen::VectorXd& g, Eigen::VectorXd& out) {
  if (ldlt.info() != Eigen::Success) return false;
  out = ldlt.solve(g);
  if (!out.allFinite()) return false;
  // reject grossly inconsistent solves (semi-definite or indefinite systems)
  const double resid = (a * out - g).norm();
  return resid <= 1e-6 * (1.0 + g.norm());
}

} // namespace

NewtonStepReport ascent_newton_step(
    const Eigen::VectorXd& gradient, const Eigen::MatrixXd& negative_hessian,
    const Eigen::VectorXd& current_params,
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const NewtonOptions& options) {
  const auto dim = gradient.size();
  if (negative_hessian.rows() != dim || negative_hessian.cols() != dim ||
      current_params.size() != dim) {
    throw std::invalid_argument("ascent_newton_step: dimension mismatch");
  }

  NewtonStepReport report;
  report.objective_before = objective(current_params);
  if (!std::isfinite(report.objective_before)) {
    throw std::invalid_argument("ascent_newton_step: objective not finite at current point");
  }

  if (gradient.isZero(0.0)) {
    report.proposed_delta = Eigen::VectorXd::Zero(dim);
    report.new_params = current_params;
    report.objective_after = report.objective_before;
    return report;
  }

  // Escalate a diagonal ridge until the system solves cleanly and the
  // direction is an ascent direction. Far from the optimum the objective need
  // not be concave, so the raw Newton direction can point downhill; a large
  // enough ridge degrades gracefully toward a scaled gradient step.
  Eigen::VectorXd full_step;
  bool have_step = false;
  double ridge = std::abs(options.ridge_scale * negative_hessian.trace() /
                          static_cast<double>(dim)) +
                 1e-300;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(negative_hessian);
  if (solvable(ldlt, negative_hessian, gradient, full_step) &&
      gradient.dot(full_step) > 0.0) {
    have_step = true;
  }
  for (int escalation = 0; !have_step && escalation < 80; ++escalation) {
    Eigen::MatrixXd ridged = negative_hessian;
    ridged.diagonal().array() += ridge;
    ldlt.compute(ridged);
    if (solvable(ldlt, ridged, gradient, full_step) && gradient.dot(full_step) > 0.0) {
      have_step = true;
      break;
    }
    ridge = std::max(ridge * 10.0, 1e-12);
  }
  if (!have_step) {
    throw SingularSystemError("ascent_newton_step: factorization failed");
  }

  double scale = 1.0;
  for (int halvings = 0; halvings <= options.max_halvings; ++halvings, scale *= 0.5) {
    Eigen::VectorXd candidate = current_params + scale * full_step;
    const double value = objective(candidate);
    if (std::isfinite(value) && value >= report.objective_before) {
      report.proposed_delta = scale * full_step;
      report.new_params = std::move(candidate);
      report.halvings_used = halvings;
      report.objective_after = value;
      return report;
    }
  }
  throw NonAscentError("ascent_newton_step: no ascent after max halvings");
}

} // namespace mzcount
