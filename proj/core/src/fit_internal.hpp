#pragma once

#include <memory>

#include "mzcount/fit_common.hpp"
#include "mzcount/newton.hpp"

namespace mzcount::detail {

/// Compressed rows re-laid as dense matrices for block accumulation.
struct RowMatrices {
  Eigen::MatrixXd X;  // R x (p+1)
  Eigen::MatrixXd Zd; // counts as double
  Eigen::MatrixXi Zi;
  Eigen::VectorXd w;  // multiplicities
  Eigen::VectorXd v;  // all-zero indicator
};

inline RowMatrices make_matrices(const std::vector<WeightedRow>& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto m = rows.front().z.size();
  const auto width = rows.front().x.size();
  RowMatrices out;
  out.X.resize(r, width);
  out.Zd.resize(r, m);
  out.Zi.resize(r, m);
  out.w.resize(r);
  out.v.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    out.X.row(i) = rows[static_cast<std::size_t>(i)].x.transpose();
    out.Zi.row(i) = rows[static_cast<std::size_t>(i)].z.transpose();
    out.Zd.row(i) = rows[static_cast<std::size_t>(i)].z.cast<double>().transpose();
    out.w[i] = rows[static_cast<std::size_t>(i)].weight;
    out.v[i] = (rows[static_cast<std::size_t>(i)].z.array() == 0).all() ? 1.0 : 0.0;
  }
  return out;
}

/// One safeguarded Newton step; returns false when the step is degenerate
/// (singular system or no ascent), leaving theta unchanged.
inline bool newton_step_inplace(const QBlock& block, Eigen::VectorXd& theta) {
  try {
    const auto report =
        ascent_newton_step(block.gradient(theta), block.negative_hessian(theta), theta,
                           block.value);
    theta = report.new_params;
    return true;
  } catch (const SingularSystemError&) {
    return false;
  } catch (const NonAscentError&) {
    return false;
  }
}

struct NewtonLoopResult {
  Eigen::VectorXd theta;
  int iterations = 0;
  bool converged = false;
};

inline NewtonLoopResult newton_maximize(const QBlock& block, Eigen::VectorXd theta,
                                        const FitConfig& config) {
  NewtonLoopResult out;
  double value = block.value(theta);
  for (int iter = 0; iter < config.max_iter; ++iter) {
    Eigen::VectorXd prev = theta;
    if (!newton_step_inplace(block, theta)) {
      out.converged = true; // stationary up to numerics
      break;
    }
    out.iterations = iter + 1;
    const double next = block.value(theta);
    const double rel = std::abs(next - value) / std::max(1.0, std::abs(next));
    const double delta = (theta - prev).cwiseAbs().maxCoeff();
    value = next;
    if (rel < config.loglik_tol && delta < config.param_tol) {
      out.converged = true;
      break;
    }
  }
  out.theta = std::move(theta);
  return out;
}

inline bool iteration_converged(double prev_ll, double next_ll, double param_delta,
                                const FitConfig& config) {
  const double rel = std::abs(next_ll - prev_ll) / std::max(1.0, std::abs(next_ll));
  return rel < config.loglik_tol && param_delta < config.param_tol;
}

} // namespace mzcount::detail
