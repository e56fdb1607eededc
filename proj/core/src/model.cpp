#include "mzcount/model.hpp"

#include <stdexcept>

namespace mzcount {

std::string family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::MIP: return "MIP";
    case ModelFamily::MINB: return "MINB";
    case ModelFamily::MIH: return "MIH";
    case ModelFamily::MP: return "MP";
    case ModelFamily::MNB: return "MNB";
    case ModelFamily::MZIP1: return "MZIP1";
    case ModelFamily::MZINB1: return "MZINB1";
    case ModelFamily::MZIH1: return "MZIH1";
    case ModelFamily::MZIP2: return "MZIP2";
    case ModelFamily::MZINB2: return "MZINB2";
    case ModelFamily::MZMP1: return "MZMP1";
    case ModelFamily::MZMNB1: return "MZMNB1";
    case ModelFamily::MZMH1: return "MZMH1";
    case ModelFamily::MZMP2: return "MZMP2";
    case ModelFamily::MZMNB2: return "MZMNB2";
  }
  return "?";
}

std::optional<ModelFamily> parse_family(std::string_view name) {
  for (ModelFamily f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

bool is_base_family(ModelFamily f) {
  return f == ModelFamily::MIP || f == ModelFamily::MINB || f == ModelFamily::MIH ||
         f == ModelFamily::MP || f == ModelFamily::MNB;
}

bool is_zero_inflated(ModelFamily f) {
  return f == ModelFamily::MZIP1 || f == ModelFamily::MZINB1 || f == ModelFamily::MZIH1 ||
         f == ModelFamily::MZIP2 || f == ModelFamily::MZINB2;
}

bool is_zero_modified(ModelFamily f) {
  return f == ModelFamily::MZMP1 || f == ModelFamily::MZMNB1 || f == ModelFamily::MZMH1 ||
         f == ModelFamily::MZMP2 || f == ModelFamily::MZMNB2;
}

bool is_hurdle_family(ModelFamily f) {
  return f == ModelFamily::MIH || f == ModelFamily::MZIH1 || f == ModelFamily::MZMH1;
}

bool has_common_shock(ModelFamily f) {
  return f == ModelFamily::MP || f == ModelFamily::MZIP2 || f == ModelFamily::MZMP2;
}

bool has_shared_dispersion(ModelFamily f) {
  return f == ModelFamily::MNB || f == ModelFamily::MZINB2 || f == ModelFamily::MZMNB2;
}

bool has_margin_dispersion(ModelFamily f) {
  return f == ModelFamily::MINB || f == ModelFamily::MZINB1 || f == ModelFamily::MZMNB1;
}

void ModelSpec::validate() const {
  if (m < 2) throw std::invalid_argument("ModelSpec: m must be at least 2");
  if (is_hurdle_family(family)) {
    if (static_cast<int>(margin_kinds.size()) != m)
      throw std::invalid_argument("ModelSpec: hurdle families need one margin kind per margin");
  } else if (!margin_kinds.empty()) {
    throw std::invalid_argument("ModelSpec: margin kinds apply to hurdle families only");
  }
  if (is_base_family(family) && covariates.gamma)
    throw std::invalid_argument("ModelSpec: base families have no mixing block");
  if (!is_hurdle_family(family) && covariates.alpha)
    throw std::invalid_argument("ModelSpec: alpha block exists for hurdle families only");
  // lambda0 is covariate-free by construction: no mask entry for it.
}

namespace {

int margin_dispersion_count(const ModelSpec& spec) {
  if (has_margin_dispersion(spec.family)) return spec.m;
  if (is_hurdle_family(spec.family)) {
    int c = 0;
    for (MarginKind k : spec.margin_kinds)
      if (margin_has_dispersion(k)) ++c;
    return c;
  }
  return 0;
}

} // namespace

int n_params(const ModelSpec& spec, int p) {
  spec.validate();
  const int gamma_w = 1 + (spec.covariates.gamma ? p : 0);
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const int alpha_w = 1 + (spec.covariates.alpha ? p : 0);
  int total = spec.m * beta_w;
  if (is_hurdle_family(spec.family)) total += spec.m * alpha_w;
  if (!is_base_family(spec.family)) total += gamma_w;
  if (has_common_shock(spec.family)) total += 1;
  if (has_shared_dispersion(spec.family)) total += 1;
  total += margin_dispersion_count(spec);
  return total;
}

void validate_parameters(const ModelSpec& spec, const ParameterSet& params, int p) {
  spec.validate();
  const int gamma_w = 1 + (spec.covariates.gamma ? p : 0);
  const int beta_w = 1 + (spec.covariates.beta ? p : 0);
  const int alpha_w = 1 + (spec.covariates.alpha ? p : 0);

  if (is_base_family(spec.family)) {
    if (params.gamma.size() != 0)
      throw std::invalid_argument("parameters: base family must not carry gamma");
  } else if (params.gamma.size() != gamma_w) {
    throw std::invalid_argument("parameters: gamma width mismatch");
  }

  if (static_cast<int>(params.beta.size()) != spec.m)
    throw std::invalid_argument("parameters: need one beta vector per margin");
  for (const auto& b : params.beta)
    if (b.size() != beta_w) throw std::invalid_argument("parameters: beta width mismatch");

  if (is_hurdle_family(spec.family)) {
    if (static_cast<int>(params.alpha.size()) != spec.m)
      throw std::invalid_argument("parameters: need one alpha vector per margin");
    for (const auto& a : params.alpha)
      if (a.size() != alpha_w) throw std::invalid_argument("parameters: alpha width mismatch");
  } else if (!params.alpha.empty()) {
    throw std::invalid_argument("parameters: alpha applies to hurdle families only");
  }

  int phi_expected = has_shared_dispersion(spec.family) ? 1 : margin_dispersion_count(spec);
  if (static_cast<int>(params.phi.size()) != phi_expected)
    throw std::invalid_argument("parameters: dispersion count mismatch");
  for (double v : params.phi)
    if (!(v > 0.0)) throw std::invalid_argument("parameters: phi must be positive");

  if (has_common_shock(spec.family)) {
    if (!(params.lambda0 >= 0.0))
      throw std::invalid_argument("parameters: lambda0 must be nonnegative");
  } else if (params.lambda0 != 0.0) {
    throw std::invalid_argument("parameters: lambda0 applies to common-shock families only");
  }
}

void ObservationSet::validate() const {
  if (counts.rows() != design.rows())
    throw std::invalid_argument("observations: counts/design row mismatch");
  if (counts.rows() == 0) throw std::invalid_argument("observations: empty");
  if (counts.cols() < 2) throw std::invalid_argument("observations: need at least 2 margins");
  if (design.cols() < 1 || !(design.col(0).array() == 1.0).all())
    throw std::invalid_argument("observations: design must start with an intercept column");
  if ((counts.array() < 0).any())
    throw std::invalid_argument("observations: negative count");
}

} // namespace mzcount
