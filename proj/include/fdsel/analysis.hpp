#pragma once

#include <optional>

#include "fdsel/datamodel.hpp"
#include "fdsel/effectsize.hpp"
#include "fdsel/iwt.hpp"
#include "fdsel/presmooth.hpp"
#include "fdsel/splinefit.hpp"

namespace fdsel {

/// Every tunable of the domain-selection workflow.
struct AnalysisConfig {
  PresmoothOptions presmooth;  // presmooth.max_order is L
  MEstimatorConfig mestimator;
  IwtConfig iwt;
  bool effect_sizes = false;
  std::size_t R = 500;
  ValidationOptions validation;
  unsigned threads = 0;
};

struct AnalysisResult {
  GroupedDataset dataset;  // validated
  SmoothedSample smoothed;
  SampleFits fits;
  IwtResult iwt;
  std::optional<EffectSizeResult> effect_sizes;
};

/// validate -> presmooth -> tune and fit -> interval-wise test (-> effect sizes).
AnalysisResult analyze(const GroupedDataset& raw, const AnalysisConfig& config);

}  // namespace fdsel
