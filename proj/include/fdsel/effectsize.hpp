#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fdsel/datamodel.hpp"
#include "fdsel/presmooth.hpp"
#include "fdsel/splinefit.hpp"

namespace fdsel {

struct VarianceEstimate {
  std::vector<double> xi2;                           // pooled per-observation variance
  std::size_t R = 0;
  std::vector<std::vector<double>> group_variance;  // v_g(t_j), estimator scale
};

/// Within-group curve bootstrap with tuning frozen. Pooled variance
/// xi2(t_j) = sum_g (n_g / n) n_g v_g(t_j). A replicate that draws fewer than
/// two distinct curves is redrawn (at most 10 times, then DegenerateResample).
VarianceEstimate bootstrap_variance(const SmoothedSample& sample, std::size_t order,
                                    const std::vector<Tuning>& tuning,
                                    const MEstimatorConfig& config, std::size_t R,
                                    std::uint64_t seed, unsigned threads);

/// sum_g n_g (theta_g - theta_bar)^2 / xi2 pointwise; 0 / 0 is 0 and a positive
/// signal over zero variance gives +inf with a warning appended to `warnings`.
std::vector<double> fsnr2(const std::vector<std::vector<double>>& group_values,
                          const std::vector<std::size_t>& group_sizes,
                          const std::vector<double>& xi2,
                          std::vector<std::string>* warnings = nullptr);

struct EffectSizeMap {
  std::vector<double> ladder;                       // Delta_1 < ... < Delta_S
  std::vector<std::vector<double>> values;          // [r][j] = G^2(t_j; Delta_r)
  std::vector<std::vector<std::uint8_t>> triangle;  // window not truncated
};

/// Delta_r = r * spacing for r = 1 .. 2(m - 1); the top rung covers [a, b] from
/// every t, so the top row is the domain-wide mean.
std::vector<double> default_ladder(const Grid& grid);

/// G^2(t; Delta) = |u - l|^{-1} int_l^u fSNR^2, l = max(a, t - Delta/2),
/// u = min(b, t + Delta/2). fSNR^2 is integrated as a step function over the
/// grid cells, which reproduces trapezoidal weights on grid-aligned windows.
EffectSizeMap aggregate(const Grid& grid, const std::vector<double>& fsnr2,
                        const std::vector<double>& ladder);

struct EffectSizeOrder {
  VarianceEstimate variance;
  std::vector<double> fsnr2;
  EffectSizeMap map;
};

struct EffectSizeResult {
  std::vector<EffectSizeOrder> orders;
  std::vector<std::string> warnings;
};

/// Bootstrap, fSNR^2 and heatmap for every order of `fits`.
EffectSizeResult compute_effect_sizes(const SmoothedSample& sample, const SampleFits& fits,
                                      const MEstimatorConfig& config, std::size_t R,
                                      std::uint64_t seed, unsigned threads);

}  // namespace fdsel
