#include "fdsel/effectsize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fdsel/error.hpp"
#include "fdsel/parallel.hpp"
#include "fdsel/rng.hpp"

namespace fdsel {

VarianceEstimate bootstrap_variance(const SmoothedSample& sample, std::size_t order,
                                    const std::vector<Tuning>& tuning,
                                    const MEstimatorConfig& config, std::size_t R,
                                    std::uint64_t seed, unsigned threads) {
  if (R < 100) fail(ErrorCode::InvalidConfig, "bootstrap needs at least 100 replicates");
  const std::size_t k = sample.groups.size();
  const std::size_t m = sample.grid.size();
  const auto members = group_members(sample.labels, k);
  MEstimatorConfig inner = config;
  inner.threads = 1;

  VarianceEstimate out;
  out.R = R;
  out.group_variance.assign(k, std::vector<double>(m, 0.0));
  for (std::size_t g = 0; g < k; ++g) {
    const auto& pool = members[g];
    const SplineSmoother smoother(sample.grid, tuning[g].knot_count, inner);
    std::vector<std::vector<double>> replicate(R);
    parallel_for(R, threads, [&](std::size_t r) {
      // Keyed by the group's first curve so renaming groups changes nothing.
      Stream stream(splitmix64(seed) + pool.front(), StreamTag::Bootstrap, r);
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      std::vector<std::size_t> draw(pool.size());
      for (int attempt = 0;; ++attempt) {
        if (attempt == 10)
          fail(ErrorCode::DegenerateResample,
               "group " + sample.groups[g] + " keeps resampling fewer than two distinct curves");
        for (auto& d : draw) d = pool[pick(stream)];
        std::vector<std::size_t> distinct = draw;
        std::sort(distinct.begin(), distinct.end());
        if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() >= 2) break;
      }
      replicate[r] = smoother.fit(sample.orders[order], draw, tuning[g].lambda, false).fitted;
    });
    for (std::size_t j = 0; j < m; ++j) {
      // Shifted by the first replicate: identical replicates give exactly 0.
      const double shift = replicate[0][j];
      double sum = 0.0, ss = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const double x = replicate[r][j] - shift;
        sum += x;
        ss += x * x;
      }
      out.group_variance[g][j] = std::max(0.0, (ss - sum * sum / double(R)) / double(R - 1));
    }
  }

  const double n = double(sample.labels.size());
  out.xi2.assign(m, 0.0);
  for (std::size_t g = 0; g < k; ++g) {
    const double ng = double(members[g].size());
    for (std::size_t j = 0; j < m; ++j) out.xi2[j] += ng / n * ng * out.group_variance[g][j];
  }
  return out;
}

std::vector<double> fsnr2(const std::vector<std::vector<double>>& group_values,
                          const std::vector<std::size_t>& group_sizes,
                          const std::vector<double>& xi2, std::vector<std::string>* warnings) {
  const std::size_t k = group_values.size();
  const std::size_t m = xi2.size();
  double n = 0.0;
  for (auto s : group_sizes) n += double(s);
  std::vector<double> out(m, 0.0);
  std::size_t infinite = 0;
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0, mag = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      mean += double(group_sizes[g]) / n * group_values[g][j];
      mag += double(group_sizes[g]) * group_values[g][j] * group_values[g][j];
    }
    double num = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      const double dev = group_values[g][j] - mean;
      num += double(group_sizes[g]) * dev * dev;
    }
    if (xi2[j] > 0.0) {
      out[j] = num / xi2[j];
    } else if (num <= 1e-24 * std::max(mag, 1e-300)) {
      out[j] = 0.0;
    } else {
      out[j] = std::numeric_limits<double>::infinity();
      ++infinite;
    }
  }
  if (infinite > 0 && warnings)
    warnings->push_back("ZeroVarianceNonzeroSignal: " + std::to_string(infinite) +
                        " grid points have zero variance but a group difference; fSNR^2 set to +inf");
  return out;
}

std::vector<double> default_ladder(const Grid& grid) {
  const std::size_t m = grid.size();
  const double h = grid.mean_spacing();
  std::vector<double> ladder(2 * (m - 1));
  for (std::size_t r = 0; r < ladder.size(); ++r) ladder[r] = double(r + 1) * h;
  return ladder;
}

EffectSizeMap aggregate(const Grid& grid, const std::vector<double>& values,
                        const std::vector<double>& ladder) {
  const std::size_t m = grid.size();
  if (values.size() != m) fail(ErrorCode::GridMismatch, "fSNR^2 length differs from m");
  EffectSizeMap map;
  map.ladder = ladder;
  map.values.assign(ladder.size(), std::vector<double>(m, 0.0));
  map.triangle.assign(ladder.size(), std::vector<std::uint8_t>(m, 0));
  const double a = grid.a(), b = grid.b();
  for (std::size_t r = 0; r < ladder.size(); ++r) {
    const double delta = ladder[r];
    if (!(delta > 0)) fail(ErrorCode::InvalidConfig, "scale ladder entries must be positive");
    const double eps = 1e-9 * delta;
    for (std::size_t j = 0; j < m; ++j) {
      const double t = grid[j];
      const double lo = std::max(a, t - 0.5 * delta);
      const double hi = std::min(b, t + 0.5 * delta);
      double integral = 0.0;
      for (std::size_t q = 0; q < m; ++q) {
        const double overlap = std::min(hi, grid.cell_upper(q)) - std::max(lo, grid.cell_lower(q));
        if (overlap > 0.0) integral += values[q] * overlap;
      }
      map.values[r][j] = integral / (hi - lo);
      map.triangle[r][j] = (t - 0.5 * delta >= a - eps && t + 0.5 * delta <= b + eps) ? 1 : 0;
    }
  }
  return map;
}

EffectSizeResult compute_effect_sizes(const SmoothedSample& sample, const SampleFits& fits,
                                      const MEstimatorConfig& config, std::size_t R,
                                      std::uint64_t seed, unsigned threads) {
  EffectSizeResult out;
  const std::size_t k = sample.groups.size();
  std::vector<std::size_t> sizes(k, 0);
  for (auto g : sample.labels) ++sizes[g];
  const auto ladder = default_ladder(sample.grid);
  for (std::size_t l = 0; l < sample.orders.size(); ++l) {
    EffectSizeOrder eo;
    // Distinct substream per order.
    eo.variance = bootstrap_variance(sample, l, fits.tuning[l], config, R,
                                     splitmix64(seed ^ (0xA5A5A5A5ULL + l)), threads);
    std::vector<std::vector<double>> theta(k);
    for (std::size_t g = 0; g < k; ++g) theta[g] = fits.fits[l][g].fitted;
    std::vector<std::string> warnings;
    eo.fsnr2 = fsnr2(theta, sizes, eo.variance.xi2, &warnings);
    for (auto& w : warnings) out.warnings.push_back("order " + std::to_string(l) + ": " + w);
    eo.map = aggregate(sample.grid, eo.fsnr2, ladder);
    out.orders.push_back(std::move(eo));
  }
  return out;
}

}  // namespace fdsel
