#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mzcount/univariate.hpp"

namespace mzcount {

/// The fifteen joint claim-count families. Base models, then zero-inflated,
/// then zero-modified; the trailing 1/2 distinguishes independent-margin
/// (Type I) from dependence-carrying (Type II) bases.
enum class ModelFamily {
  MIP, MINB, MIH, MP, MNB,
  MZIP1, MZINB1, MZIH1, MZIP2, MZINB2,
  MZMP1, MZMNB1, MZMH1, MZMP2, MZMNB2,
};

inline constexpr ModelFamily kAllFamilies[] = {
    ModelFamily::MIP, ModelFamily::MINB, ModelFamily::MIH, ModelFamily::MP,
    ModelFamily::MNB, ModelFamily::MZIP1, ModelFamily::MZINB1, ModelFamily::MZIH1,
    ModelFamily::MZIP2, ModelFamily::MZINB2, ModelFamily::MZMP1, ModelFamily::MZMNB1,
    ModelFamily::MZMH1, ModelFamily::MZMP2, ModelFamily::MZMNB2,
};

std::string family_name(ModelFamily family);
std::optional<ModelFamily> parse_family(std::string_view name);

bool is_base_family(ModelFamily family);
bool is_zero_inflated(ModelFamily family);
bool is_zero_modified(ModelFamily family);
/// Hurdle families carry per-margin occurrence probabilities and explicit
/// positive-support margins.
bool is_hurdle_family(ModelFamily family);
/// Families with a common-shock Poisson base (rate lambda0).
bool has_common_shock(ModelFamily family);
/// Families with one shared gamma-mixture dispersion.
bool has_shared_dispersion(ModelFamily family);
/// Families with one dispersion per margin (NB margins only for hurdles).
bool has_margin_dispersion(ModelFamily family);

/// Which coefficient blocks carry covariates beyond the intercept.
struct CovariateMask {
  bool gamma = false; // mixing probability pi0 / pi0'
  bool beta = false;  // margin rates lambda_j (or occurrence pi_j for hurdles)
  bool alpha = false; // hurdle positive-part locations
};

struct ModelSpec {
  ModelFamily family = ModelFamily::MIP;
  int m = 2;
  std::vector<MarginKind> margin_kinds; // hurdle families only
  CovariateMask covariates;

  void validate() const; // throws std::invalid_argument
};

/// Coefficients in the link scale. gamma is empty for base families; alpha is
/// empty for non-hurdle families; phi has one entry per dispersed margin or a
/// single shared entry; lambda0 applies to common-shock families only.
struct ParameterSet {
  Eigen::VectorXd gamma;
  std::vector<Eigen::VectorXd> beta;
  std::vector<Eigen::VectorXd> alpha;
  std::vector<double> phi;
  double lambda0 = 0.0;
};

/// Number of free parameters for an intercept width of p+1 per masked block.
int n_params(const ModelSpec& spec, int p);

/// Shape/positivity checks; throws std::invalid_argument on mismatch.
void validate_parameters(const ModelSpec& spec, const ParameterSet& params, int p);

struct ObservationSet {
  Eigen::MatrixXi counts; // n x m
  Eigen::MatrixXd design; // n x (p+1), first column all ones

  int n() const { return static_cast<int>(counts.rows()); }
  int m() const { return static_cast<int>(counts.cols()); }
  int p() const { return static_cast<int>(design.cols()) - 1; }
  bool zero_row(int i) const { return counts.row(i).sum() == 0; }

  void validate() const; // throws std::invalid_argument
};

inline double logistic(double eta) {
  return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

} // namespace mzcount
