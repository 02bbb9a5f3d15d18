#include "fdsel/analysis.hpp"

namespace fdsel {

AnalysisResult analyze(const GroupedDataset& raw, const AnalysisConfig& config) {
  GroupedDataset dataset = validate_dataset(raw, config.validation);

  PresmoothOptions ps = config.presmooth;
  ps.threads = config.threads;
  SmoothedSample smoothed = presmooth(dataset, ps);

  SampleFits fits = fit_sample(smoothed, config.mestimator, config.threads);

  IwtConfig iwt_cfg = config.iwt;
  iwt_cfg.threads = config.threads;
  IwtResult iwt = run_iwt(smoothed, fits.tuning, config.mestimator, iwt_cfg);

  std::optional<EffectSizeResult> es;
  if (config.effect_sizes)
    es = compute_effect_sizes(smoothed, fits, config.mestimator, config.R, config.iwt.seed,
                              config.threads);
  return {std::move(dataset), std::move(smoothed), std::move(fits), std::move(iwt), std::move(es)};
}

}  // namespace fdsel
