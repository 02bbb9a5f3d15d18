#include "fdsel/iwt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fdsel/error.hpp"
#include "fdsel/parallel.hpp"
#include "fdsel/rng.hpp"

namespace fdsel {

std::vector<std::vector<std::size_t>> permute_labels(const std::vector<std::size_t>& labels,
                                                     std::size_t B, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> out(B, labels);
  for (std::size_t b = 0; b < B; ++b) {
    Stream stream(seed, StreamTag::Permutation, b + 1);
    auto& perm = out[b];
    for (std::size_t i = perm.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(perm[i - 1], perm[pick(stream)]);
    }
  }
  return out;
}

std::vector<double> pointwise_statistic(const std::vector<std::vector<double>>& group_values,
                                        const std::vector<std::size_t>& group_sizes) {
  const std::size_t k = group_values.size();
  const std::size_t m = group_values.front().size();
  const double n = double(std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0}));
  std::vector<double> out(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (std::size_t g = 0; g < k; ++g) mean += double(group_sizes[g]) / n * group_values[g][j];
    double s = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      const double dev = group_values[g][j] - mean;
      s += double(group_sizes[g]) / n * dev * dev;
    }
    out[j] = s;
  }
  return out;
}

PointwiseStatField pointwise_field(const SmoothedSample& sample, std::size_t order,
                                   const std::vector<Tuning>& tuning,
                                   const std::vector<std::vector<std::size_t>>& relabelings,
                                   const MEstimatorConfig& config, unsigned threads) {
  const std::size_t k = sample.groups.size();
  const std::size_t m = sample.grid.size();
  if (tuning.size() != k) fail(ErrorCode::InvalidConfig, "tuning does not cover every group");
  std::vector<SplineSmoother> smoothers;
  smoothers.reserve(k);
  for (std::size_t g = 0; g < k; ++g) smoothers.emplace_back(sample.grid, tuning[g].knot_count, config);

  PointwiseStatField field(relabelings.size() + 1, m);
  parallel_for(field.rows(), threads, [&](std::size_t b) {
    const auto& labels = b == 0 ? sample.labels : relabelings[b - 1];
    const auto members = group_members(labels, k);
    std::vector<std::vector<double>> values(k);
    std::vector<std::size_t> sizes(k);
    for (std::size_t g = 0; g < k; ++g) {
      values[g] = smoothers[g].fit(sample.orders[order], members[g], tuning[g].lambda, false).fitted;
      sizes[g] = members[g].size();
    }
    const auto row = pointwise_statistic(values, sizes);
    std::copy(row.begin(), row.end(), field.row(b).begin());
  });
  return field;
}

namespace {

// Prefix sums of weight * value over the doubled index range 0..2m-1.
std::vector<long double> doubled_prefix(std::span<const double> values,
                                        const std::vector<double>& weights) {
  const std::size_t m = values.size();
  std::vector<long double> prefix(2 * m + 1, 0.0L);
  for (std::size_t k = 0; k < 2 * m; ++k)
    prefix[k + 1] = prefix[k] + (long double)weights[k % m] * (long double)values[k % m];
  return prefix;
}

std::vector<long double> doubled_weight_prefix(const std::vector<double>& weights) {
  const std::size_t m = weights.size();
  std::vector<long double> prefix(2 * m + 1, 0.0L);
  for (std::size_t k = 0; k < 2 * m; ++k) prefix[k + 1] = prefix[k] + weights[k % m];
  return prefix;
}

double arc_mean(const std::vector<long double>& prefix, const std::vector<long double>& wprefix,
                const Arc& arc) {
  const std::size_t lo = arc.start, hi = arc.start + arc.length;
  return double((prefix[hi] - prefix[lo]) / (wprefix[hi] - wprefix[lo]));
}

double field_scale(const PointwiseStatField& field) {
  double s = 0.0;
  for (std::size_t b = 0; b < field.rows(); ++b)
    for (double v : field.row(b)) s = std::max(s, std::abs(v));
  return s;
}

}  // namespace

std::vector<std::vector<double>> arc_statistics(const PointwiseStatField& field,
                                                const IntervalSet& arcs, const Grid& grid) {
  const auto& w = grid.cell_weights();
  const auto wprefix = doubled_weight_prefix(w);
  std::vector<std::vector<double>> out(arcs.size(), std::vector<double>(field.rows()));
  for (std::size_t b = 0; b < field.rows(); ++b) {
    const auto prefix = doubled_prefix(field.row(b), w);
    for (std::size_t a = 0; a < arcs.size(); ++a) out[a][b] = arc_mean(prefix, wprefix, arcs[a]);
  }
  return out;
}

std::vector<double> interval_pvalues(const PointwiseStatField& field, const IntervalSet& arcs,
                                     const Grid& grid) {
  if (field.m() != grid.size() || arcs.m() != grid.size())
    fail(ErrorCode::GridMismatch, "field, arcs and grid disagree on m");
  const auto& w = grid.cell_weights();
  const auto wprefix = doubled_weight_prefix(w);
  std::vector<std::vector<long double>> prefix(field.rows());
  for (std::size_t b = 0; b < field.rows(); ++b) prefix[b] = doubled_prefix(field.row(b), w);
  const double scale = field_scale(field);
  const std::size_t B = field.rows() - 1;

  std::vector<double> p(arcs.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const double observed = arc_mean(prefix[0], wprefix, arcs[a]);
    std::size_t count = 0;
    for (std::size_t b = 1; b <= B; ++b)
      if (at_least(arc_mean(prefix[b], wprefix, arcs[a]), observed, scale)) ++count;
    p[a] = double(1 + count) / double(B + 1);
  }
  return p;
}

PValueFunctions adjust(const std::vector<double>& arc_pvalues, const IntervalSet& arcs,
                       std::size_t unadjusted_width) {
  const std::size_t m = arcs.m();
  if (arc_pvalues.size() != arcs.size())
    fail(ErrorCode::InvalidConfig, "one p-value per arc is required");
  PValueFunctions out;
  out.adjusted.assign(m, 0.0);
  out.unadjusted.assign(m, std::numeric_limits<double>::quiet_NaN());

  // lookup[start * (m + 1) + length] -> arc index
  std::vector<std::size_t> lookup(m * (m + 1), arcs.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const Arc& arc = arcs[a];
    lookup[arc.start * (m + 1) + arc.length] = a;
    for (std::size_t o = 0; o < arc.length; ++o) {
      const std::size_t j = (arc.start + o) % m;
      out.adjusted[j] = std::max(out.adjusted[j], arc_pvalues[a]);
    }
  }
  const std::size_t width = std::max<std::size_t>(1, std::min(unadjusted_width, m));
  for (std::size_t j = 0; j < m; ++j) {
    // Centred window clipped to the grid; never wraps.
    const std::size_t half = (width - 1) / 2;
    std::size_t start = j >= half ? j - half : 0;
    std::size_t stop = std::min(m, start + width);
    start = stop >= width ? stop - width : 0;
    const std::size_t a = lookup[start * (m + 1) + (stop - start)];
    if (a < arcs.size()) out.unadjusted[j] = arc_pvalues[a];
  }
  return out;
}

IntervalSet windows_only(const IntervalSet& arcs) {
  std::vector<Arc> kept;
  for (const Arc& a : arcs.arcs())
    if (!a.wraps(arcs.m())) kept.push_back(a);
  return IntervalSet(arcs.m(), std::move(kept));
}

std::string to_string(Correction c) {
  switch (c) {
    case Correction::Bonferroni: return "bonferroni";
    case Correction::Holm: return "holm";
    case Correction::Hochberg: return "hochberg";
  }
  return "bonferroni";
}

Correction parse_correction(const std::string& name) {
  if (name == "bonferroni") return Correction::Bonferroni;
  if (name == "holm") return Correction::Holm;
  if (name == "hochberg") return Correction::Hochberg;
  fail(ErrorCode::InvalidConfig, "unknown correction '" + name + "'");
}

double bonferroni_alpha(double alpha, std::size_t L) { return alpha / double(L + 1); }

CorrectionResult correct_alpha(const std::vector<std::vector<double>>& adjusted, double alpha,
                               Correction method) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidAlpha, "alpha must lie in (0, 1)");
  if (adjusted.empty()) fail(ErrorCode::InvalidConfig, "no p-value functions");
  const std::size_t orders = adjusted.size();
  const std::size_t m = adjusted.front().size();
  CorrectionResult out;
  out.method = method;
  out.alpha = alpha;
  out.alpha_star = bonferroni_alpha(alpha, orders - 1);
  out.reject.assign(orders, std::vector<std::uint8_t>(m, 0));
  auto le = [](double p, double level) { return p <= level * (1.0 + 1e-12); };

  std::vector<std::size_t> idx(orders);
  for (std::size_t j = 0; j < m; ++j) {
    if (method == Correction::Bonferroni) {
      for (std::size_t l = 0; l < orders; ++l) out.reject[l][j] = le(adjusted[l][j], out.alpha_star);
      continue;
    }
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](auto x, auto y) { return adjusted[x][j] < adjusted[y][j]; });
    if (method == Correction::Holm) {
      for (std::size_t i = 0; i < orders; ++i) {
        if (!le(adjusted[idx[i]][j], alpha / double(orders - i))) break;
        out.reject[idx[i]][j] = 1;
      }
    } else {
      std::size_t cutoff = orders;  // none
      for (std::size_t i = orders; i-- > 0;) {
        if (le(adjusted[idx[i]][j], alpha / double(orders - i))) {
          cutoff = i;
          break;
        }
      }
      if (cutoff < orders)
        for (std::size_t i = 0; i <= cutoff; ++i) out.reject[idx[i]][j] = 1;
    }
  }
  return out;
}

std::vector<SelectedInterval> index_runs(const std::vector<std::size_t>& indices, const Grid& grid) {
  std::vector<SelectedInterval> out;
  for (std::size_t i = 0; i < indices.size();) {
    std::size_t k = i;
    while (k + 1 < indices.size() && indices[k + 1] == indices[k] + 1) ++k;
    out.push_back({grid[indices[i]], grid[indices[k]], indices[i], indices[k]});
    i = k + 1;
  }
  return out;
}

SelectionReport select_domain(const CorrectionResult& correction, const Grid& grid) {
  SelectionReport rep;
  rep.alpha = correction.alpha;
  rep.method = correction.method;
  rep.alpha_star = correction.alpha_star;
  const std::size_t m = grid.size();
  std::vector<std::uint8_t> any(m, 0);
  for (const auto& row : correction.reject) {
    if (row.size() != m) fail(ErrorCode::GridMismatch, "decision vector length differs from m");
    std::vector<std::size_t> sel;
    for (std::size_t j = 0; j < m; ++j) {
      if (row[j]) {
        sel.push_back(j);
        any[j] = 1;
      }
    }
    rep.selected_by_order.push_back(std::move(sel));
  }
  for (std::size_t j = 0; j < m; ++j)
    if (any[j]) rep.selected.push_back(j);
  rep.intervals = index_runs(rep.selected, grid);
  return rep;
}

void IwtConfig::validate(std::size_t) const {
  if (B < 99) fail(ErrorCode::InvalidConfig, "B must be at least 99");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidAlpha, "alpha must lie in (0, 1)");
}

IwtResult run_iwt(const SmoothedSample& sample, const std::vector<std::vector<Tuning>>& tuning,
                  const MEstimatorConfig& fit_config, const IwtConfig& config) {
  const std::size_t orders = sample.orders.size();
  const std::size_t L = orders - 1;
  config.validate(L);
  fit_config.validate();
  if (tuning.size() != orders) fail(ErrorCode::InvalidConfig, "tuning does not cover every order");

  IwtResult out;
  if (L >= 1 && config.B < 399)
    out.warnings.push_back("B = " + std::to_string(config.B) +
                           " is coarse for the corrected level; 1/(B+1) should be well below alpha*");

  const std::size_t m = sample.grid.size();
  const std::size_t k = sample.groups.size();
  const auto members = group_members(sample.labels, k);
  for (std::size_t l = 0; l < orders; ++l) {
    for (std::size_t g = 0; g < k; ++g) {
      std::size_t uncovered = 0;
      for (std::size_t j = 0; j < m; ++j) {
        bool seen = false;
        for (std::size_t i : members[g]) seen = seen || sample.orders[l].masks[i][j];
        if (!seen) ++uncovered;
      }
      if (uncovered > 0)
        out.warnings.push_back("order " + std::to_string(l) + ", group " + sample.groups[g] + ": " +
                               std::to_string(uncovered) +
                               " grid points have no data; fit relies on the penalty there");
    }
  }

  const auto relabelings = permute_labels(sample.labels, config.B, config.seed);
  IntervalSet arcs = enumerate_arcs(m);
  if (!config.include_complements) arcs = windows_only(arcs);
  MEstimatorConfig inner = fit_config;
  inner.threads = 1;

  std::vector<std::vector<double>> adjusted;
  for (std::size_t l = 0; l < orders; ++l) {
    const auto field = pointwise_field(sample, l, tuning[l], relabelings, inner, config.threads);
    auto pv = adjust(interval_pvalues(field, arcs, sample.grid), arcs, config.unadjusted_width);
    pv.B = config.B;
    adjusted.push_back(pv.adjusted);
    out.pvalues.push_back(std::move(pv));
  }
  out.correction = correct_alpha(adjusted, config.alpha, config.correction);
  out.selection = select_domain(out.correction, sample.grid);
  return out;
}

}  // namespace fdsel
