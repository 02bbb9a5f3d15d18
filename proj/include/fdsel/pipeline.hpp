#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "fdsel/analysis.hpp"
#include "fdsel/error.hpp"
#include "fdsel/io.hpp"

namespace fdsel {

inline constexpr const char* kVersion = "0.1.0";

/// 2 input, 3 numerical, 4 configuration.
int exit_code(ErrorCode code);

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path out_dir;
  AnalysisConfig analysis;  // analysis.iwt.seed seeds permutations and bootstrap
  std::optional<std::filesystem::path> matrix_csv;
  PipelineConfig();
  void validate() const;
};

/// Flat keys (input, out_dir, L, delta, B, R, alpha, correction, seed,
/// knot_candidates, lambda_grid, global_bandwidth, threads) plus an optional
/// nested "analysis" block; present keys override `config`.
void update_from_json(PipelineConfig& config, const Json& j);
Json to_json(const PipelineConfig& config);

/// Seed from FDA_SEED when set.
std::optional<std::uint64_t> seed_from_env();

struct PipelineOutcome {
  int exit_code = 0;
  Json manifest;
};

/// Runs validate -> presmooth -> fit -> iwt -> effect sizes on one CSV and
/// writes smoothed.csv, fits.json, report.json, esmap.json, pvals.svg,
/// heatmap.svg and manifest.json into out_dir. Errors are caught and
/// recorded in manifest.json.
PipelineOutcome run_pipeline(const PipelineConfig& config);

}  // namespace fdsel
