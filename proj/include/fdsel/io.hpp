#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdsel/analysis.hpp"
#include "fdsel/effectsize.hpp"
#include "fdsel/evaluate.hpp"
#include "fdsel/iwt.hpp"
#include "fdsel/presmooth.hpp"
#include "fdsel/simulate.hpp"
#include "fdsel/splinefit.hpp"

namespace fdsel {

using Json = nlohmann::json;

/// Long format `curve_id,group,t,value` with a header row; extra columns are
/// ignored except `order`, which keeps order-0 rows only. Empty or NA values
/// count as unobserved. The grid is the sorted set of distinct t. Curves and
/// groups keep their order of first appearance.
GroupedDataset read_long_csv(std::istream& is);
GroupedDataset read_long_csv(const std::filesystem::path& path);
void write_long_csv(std::ostream& os, const GroupedDataset& data);

/// Long CSV with `order,smoothed_value` added: one row per observed cell and
/// order, NA where the order is undefined at that point.
void write_smoothed_csv(std::ostream& os, const GroupedDataset& data, const SmoothedSample& s);
SmoothedSample read_smoothed_csv(std::istream& is);
SmoothedSample read_smoothed_csv(const std::filesystem::path& path);

Json dataset_metadata(const GroupedDataset& data);

Json to_json(const ScenarioConfig& c);
ScenarioConfig scenario_from_json(const Json& j);
Json to_json(const GroundTruth& t, const ScenarioConfig& c);

Json to_json(const MEstimatorConfig& c);
void update_from_json(MEstimatorConfig& c, const Json& j);
Json to_json(const PresmoothOptions& c);
void update_from_json(PresmoothOptions& c, const Json& j);
Json to_json(const IwtConfig& c);
void update_from_json(IwtConfig& c, const Json& j);
Json to_json(const AnalysisConfig& c);
void update_from_json(AnalysisConfig& c, const Json& j);

Json fits_to_json(const SmoothedSample& s, const SampleFits& fits, const MEstimatorConfig& c);
/// Tuning [order][group] stored in fits.json; checks the group labels.
std::vector<std::vector<Tuning>> tuning_from_json(const Json& j, const SmoothedSample& s);

Json report_to_json(const SmoothedSample& s, const IwtResult& r, const IwtConfig& c);
Json esmap_to_json(const SmoothedSample& s, const EffectSizeResult& r, std::size_t R,
                   std::uint64_t seed);
void write_esmap_csv(std::ostream& os, const EffectSizeMap& map, const Grid& grid);

/// {"replicates", "base_seed", "cells": [{"name", "scenario"}], "analysis"}.
ExperimentDesign design_from_json(const Json& j, AnalysisConfig* analysis = nullptr);

Json read_json(const std::filesystem::path& path);
/// Two-space indented dump with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fdsel
