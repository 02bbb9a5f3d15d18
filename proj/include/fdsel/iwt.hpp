#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fdsel/datamodel.hpp"
#include "fdsel/presmooth.hpp"
#include "fdsel/splinefit.hpp"

namespace fdsel {

/// B relabelings of the curves. Relabeling b (1-based) is a uniformly random
/// permutation of `labels` drawn from substream (seed, Permutation, b), so
/// group sizes are preserved and each relabeling is reproducible on its own.
std::vector<std::vector<std::size_t>> permute_labels(const std::vector<std::size_t>& labels,
                                                     std::size_t B, std::uint64_t seed);

/// sum_g alpha_g (theta_g(t_j) - theta_bar(t_j))^2 with alpha_g = n_g / n and
/// theta_bar the alpha-weighted grand mean.
std::vector<double> pointwise_statistic(const std::vector<std::vector<double>>& group_values,
                                        const std::vector<std::size_t>& group_sizes);

/// (B + 1) x m pointwise integrand; row 0 is the observed labelling.
class PointwiseStatField {
 public:
  PointwiseStatField(std::size_t rows, std::size_t m) : rows_(rows), m_(m), data_(rows * m, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t m() const noexcept { return m_; }
  double& operator()(std::size_t b, std::size_t j) { return data_[b * m_ + j]; }
  double operator()(std::size_t b, std::size_t j) const { return data_[b * m_ + j]; }
  std::span<const double> row(std::size_t b) const { return {data_.data() + b * m_, m_}; }
  std::span<double> row(std::size_t b) { return {data_.data() + b * m_, m_}; }

 private:
  std::size_t rows_;
  std::size_t m_;
  std::vector<double> data_;
};

/// Fits every group at order `order` for the observed labels and each
/// relabeling, with tuning frozen, and evaluates the pointwise statistic.
PointwiseStatField pointwise_field(const SmoothedSample& sample, std::size_t order,
                                   const std::vector<Tuning>& tuning,
                                   const std::vector<std::vector<std::size_t>>& relabelings,
                                   const MEstimatorConfig& config, unsigned threads);

/// Arc means of every row, T_b(I) = int_I D_b / |I| with cell (trapezoidal)
/// weights, computed from prefix sums over the doubled index range.
/// Result is [arc][b].
std::vector<std::vector<double>> arc_statistics(const PointwiseStatField& field,
                                                const IntervalSet& arcs, const Grid& grid);

/// True when `value` is at least `reference` up to a tolerance relative to the
/// field scale; shared by every route that compares arc statistics.
inline bool at_least(double value, double reference, double scale) {
  return value >= reference - 1e-9 * scale;
}

/// p^I = (1 + #{b >= 1 : T_b(I) >= T_0(I)}) / (B + 1) for every arc.
std::vector<double> interval_pvalues(const PointwiseStatField& field, const IntervalSet& arcs,
                                     const Grid& grid);

struct PValueFunctions {
  std::vector<double> unadjusted;  // p(t_j)
  std::vector<double> adjusted;    // p~(t_j)
  std::size_t B = 0;
};

/// p~(t_j) = max of p^I over arcs containing j; p(t_j) = p-value of the
/// centred window of `unadjusted_width` points (1 = the singleton arc).
PValueFunctions adjust(const std::vector<double>& arc_pvalues, const IntervalSet& arcs,
                       std::size_t unadjusted_width = 1);

/// Ordinary windows (non-wrapping arcs) plus the full domain.
IntervalSet windows_only(const IntervalSet& arcs);

enum class Correction { Bonferroni, Holm, Hochberg };
std::string to_string(Correction c);
Correction parse_correction(const std::string& name);

struct CorrectionResult {
  Correction method = Correction::Bonferroni;
  double alpha = 0.05;
  double alpha_star = 0.05;                  // alpha / (L + 1)
  std::vector<std::vector<std::uint8_t>> reject;  // [order][j]
};

/// Bonferroni applies alpha / (L + 1) to every adjusted p-value; Holm and
/// Hochberg are applied pointwise to the (L + 1)-vector of adjusted p-values.
/// Throws InvalidAlpha unless 0 < alpha < 1.
CorrectionResult correct_alpha(const std::vector<std::vector<double>>& adjusted, double alpha,
                               Correction method);

/// alpha / (L + 1).
double bonferroni_alpha(double alpha, std::size_t L);

struct SelectedInterval {
  double lower;
  double upper;
  std::size_t first;
  std::size_t last;
};

struct SelectionReport {
  double alpha = 0.05;
  Correction method = Correction::Bonferroni;
  double alpha_star = 0.05;
  std::vector<std::vector<std::size_t>> selected_by_order;  // C_l
  std::vector<std::size_t> selected;                        // C
  std::vector<SelectedInterval> intervals;                  // runs of C in t units
};

SelectionReport select_domain(const CorrectionResult& correction, const Grid& grid);

/// Contiguous runs of sorted indices as closed intervals.
std::vector<SelectedInterval> index_runs(const std::vector<std::size_t>& indices, const Grid& grid);

struct IwtConfig {
  std::size_t B = 1000;
  double alpha = 0.05;
  Correction correction = Correction::Bonferroni;
  std::uint64_t seed = 7;
  std::size_t unadjusted_width = 1;
  bool include_complements = true;
  unsigned threads = 0;

  void validate(std::size_t L) const;
};

struct IwtResult {
  std::vector<PValueFunctions> pvalues;  // per order
  CorrectionResult correction;
  SelectionReport selection;
  std::vector<std::string> warnings;
};

/// Full interval-wise test on a smoothed sample with frozen per-(order, group)
/// tuning.
IwtResult run_iwt(const SmoothedSample& sample, const std::vector<std::vector<Tuning>>& tuning,
                  const MEstimatorConfig& fit_config, const IwtConfig& config);

}  // namespace fdsel
