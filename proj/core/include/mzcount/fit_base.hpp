#pragma once

#include "mzcount/fit_common.hpp"

namespace mzcount {

/// Maximum likelihood for the five base families. The independent-margin
/// families reduce to per-margin Newton ascent; the common-shock and
/// gamma-mixture families use EM over their latent variable.
FitResult fit_base_model(const ObservationSet& data, const ModelSpec& spec,
                         const FitConfig& config = {});

} // namespace mzcount
