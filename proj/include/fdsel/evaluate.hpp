#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fdsel/analysis.hpp"
#include "fdsel/iwt.hpp"
#include "fdsel/simulate.hpp"

namespace fdsel {

struct SelectionScore {
  std::optional<double> sensitivity;  // empty when A is empty
  double frr = 0.0;                   // 0 when nothing is selected
  bool false_rejection_present = false;
  std::size_t truth_size = 0;     // |A|
  std::size_t selected_size = 0;  // |A^|
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
};

/// Sensitivity TP / |A| and FRR FP / |A^| for a selected index set.
SelectionScore score(const GroundTruth& truth, const std::vector<std::size_t>& selected);

/// As above; throws GridMismatch when the report was produced on another grid.
SelectionScore score(const GroundTruth& truth, const SelectionReport& report, const Grid& grid);

/// What a method hands back for one simulated dataset. `adjusted` (per order)
/// is optional; when present, Holm and Hochberg decisions are compared with
/// the primary ones.
struct MethodOutput {
  SelectionReport selection;
  std::vector<std::vector<double>> adjusted;
};

using Method = std::function<MethodOutput(const SimulatedData&)>;

/// The domain-selection workflow of `analyze` as an experiment method.
Method domain_selection_method(AnalysisConfig config);

struct DesignCell {
  std::string name;
  ScenarioConfig scenario;  // scenario.seed is replaced per replicate
};

struct ExperimentDesign {
  std::vector<DesignCell> cells;
  std::size_t replicates = 100;
  std::uint64_t base_seed = 1;
};

struct ReplicateRecord {
  std::string cell;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  SelectionScore score;
  // Grid points where the union decision of Holm / Hochberg equals the
  // primary decision, out of `points`.
  std::size_t agree_holm = 0;
  std::size_t agree_hochberg = 0;
  std::size_t points = 0;
};

struct CellSummary {
  std::string cell;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  bool flagged = false;  // more than 5% of replicates failed
  std::optional<double> mean_sensitivity;
  double mean_frr = 0.0;
  double p_false_rejection = 0.0;
  double holm_agreement = 1.0;
  double hochberg_agreement = 1.0;
};

struct ExperimentResult {
  std::vector<CellSummary> summary;
  std::vector<ReplicateRecord> replicates;
};

/// Replicate r of every cell uses seed base_seed XOR r. Replicates run on
/// `threads` workers; records are reduced in (cell, replicate) order.
ExperimentResult run_experiment(const ExperimentDesign& design, const Method& method,
                                unsigned threads);

void write_summary_csv(std::ostream& os, const std::vector<CellSummary>& summary);
void write_replicates_csv(std::ostream& os, const std::vector<ReplicateRecord>& records);

}  // namespace fdsel
