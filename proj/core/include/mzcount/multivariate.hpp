#pragma once

#include <Eigen/Dense>
#include <functional>

#include "mzcount/model.hpp"

namespace mzcount {

/// Common-shock Poisson joint pmf: a shared Poisson(lambda0) count added to
/// independent Poisson(lambda_j) margins. Inner sum over the latent shock is
/// evaluated with log-sum-exp.
double log_pmf_mp(const Eigen::VectorXi& z, double lambda0, const Eigen::VectorXd& lambdas);
double pmf_mp(const Eigen::VectorXi& z, double lambda0, const Eigen::VectorXd& lambdas);

/// Gamma-mixture joint negative binomial (one shared dispersion phi).
double log_pmf_mnb(const Eigen::VectorXi& z, const Eigen::VectorXd& lambdas, double phi);
double pmf_mnb(const Eigen::VectorXi& z, const Eigen::VectorXd& lambdas, double phi);

/// Natural-scale parameters of one row, after applying the link functions to
/// that row's covariates.
struct LocalParams {
  double mix = 1.0;       // pi0 (zero-inflated) or pi0' (zero-modified); 1 for base
  Eigen::VectorXd lambda; // margin rates; hurdle: positive-part locations
  Eigen::VectorXd pi;     // hurdle occurrence probabilities (empty otherwise)
  std::vector<double> phi;
  double lambda0 = 0.0;
};

LocalParams local_params(const ModelSpec& spec, const ParameterSet& params,
                         const Eigen::VectorXd& covariates);

/// Dispersion of margin j, or absent for Poisson-type margins.
std::optional<double> phi_for_margin(const ModelSpec& spec, const LocalParams& local, int j);

/// log f_Y(z) of the underlying base distribution (the Y layer shared by the
/// base, zero-inflated and zero-modified variants of each family).
double log_base_pmf(const ModelSpec& spec, const LocalParams& local, const Eigen::VectorXi& z);

/// log f_Y(0), via the family's closed form.
double base_log_zero_mass(const ModelSpec& spec, const LocalParams& local);

/// pi0 = 1 - f_Y(0): the probability the base vector is not identically zero.
/// For zero-modified families this is the induced quantity paired with pi0'.
double induced_pi0(const ModelSpec& spec, const LocalParams& local);

double log_pmf_joint(const ModelSpec& spec, const LocalParams& local, const Eigen::VectorXi& z);
double log_pmf_joint(const ModelSpec& spec, const ParameterSet& params,
                     const Eigen::VectorXd& covariates, const Eigen::VectorXi& z);
double pmf_joint(const ModelSpec& spec, const ParameterSet& params,
                 const Eigen::VectorXd& covariates, const Eigen::VectorXi& z);

enum class ZeroModification { Inflated, Standard, Deflated };
std::string zero_modification_name(ZeroModification kind);
ZeroModification classify_modification(double pi0, double pi0_prime, double tol = 1e-9);

struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd covariance;
  double total_mean = 0.0;
  double total_variance = 0.0;
};

/// Closed-form moments where a formula exists; base hurdle (MIH) and hurdle
/// variants with non unit-shifted-NB margins fall back to grid summation.
MomentSummary moments(const ModelSpec& spec, const ParameterSet& params,
                      const Eigen::VectorXd& covariates);

/// Per-margin grid bounds with neglected tail mass below tail_mass_bound.
Eigen::VectorXi default_grid_upper(const ModelSpec& spec, const LocalParams& local,
                                   double tail_mass_bound = 1e-10);

/// Visit every count vector in the box [0, upper_1] x ... x [0, upper_m].
void for_each_count_vector(const Eigen::VectorXi& upper,
                           const std::function<void(const Eigen::VectorXi&)>& visit);

/// Draw one observation per design row; stream-split per (seed, row) so
/// parallel generation reproduces serial output.
ObservationSet sample_joint(const ModelSpec& spec, const ParameterSet& params,
                            const Eigen::MatrixXd& design, std::uint64_t seed);

} // namespace mzcount
