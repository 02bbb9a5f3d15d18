#include "fdsel/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <Eigen/Core>

#include "fdsel/parallel.hpp"
#include "fdsel/plot.hpp"

namespace fdsel {

namespace {

std::string compiler_version() {
#if defined(__clang__)
  return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  return "gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__) + "." +
         std::to_string(__GNUC_PATCHLEVEL__);
#else
  return "unknown";
#endif
}

Json versions() {
  return {{"fdsel", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", compiler_version()}};
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

int exit_code(ErrorCode code) {
  switch (category(code)) {
    case ErrorCategory::Input: return 2;
    case ErrorCategory::Numerical: return 3;
    case ErrorCategory::Config: return 4;
  }
  return 3;
}

PipelineConfig::PipelineConfig() { analysis.effect_sizes = true; }

void PipelineConfig::validate() const {
  if (input.empty()) fail(ErrorCode::InvalidConfig, "no input path");
  if (out_dir.empty()) fail(ErrorCode::InvalidConfig, "no output directory");
  const auto in = std::filesystem::weakly_canonical(input);
  const auto out = std::filesystem::weakly_canonical(out_dir);
  if (in == out || in.parent_path() == out)
    fail(ErrorCode::InvalidConfig, "the output directory must not hold the input file");
  if (matrix_csv && std::filesystem::weakly_canonical(*matrix_csv) == in)
    fail(ErrorCode::InvalidConfig, "matrix csv path equals the input path");
  analysis.mestimator.validate();
  analysis.iwt.validate(analysis.presmooth.max_order);
  if (analysis.effect_sizes && analysis.R < 100)
    fail(ErrorCode::InvalidConfig, "R must be at least 100");
}

void update_from_json(PipelineConfig& c, const Json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, "pipeline config must be a JSON object");
  if (j.contains("analysis")) update_from_json(c.analysis, j.at("analysis"));
  try {
    if (j.contains("input")) c.input = j.at("input").get<std::string>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("matrix_csv")) c.matrix_csv = j.at("matrix_csv").get<std::string>();
    if (j.contains("L")) c.analysis.presmooth.max_order = j.at("L").get<std::size_t>();
    if (j.contains("delta")) c.analysis.mestimator.delta = j.at("delta").get<double>();
    if (j.contains("B")) c.analysis.iwt.B = j.at("B").get<std::size_t>();
    if (j.contains("R")) c.analysis.R = j.at("R").get<std::size_t>();
    if (j.contains("alpha")) c.analysis.iwt.alpha = j.at("alpha").get<double>();
    if (j.contains("correction"))
      c.analysis.iwt.correction = parse_correction(j.at("correction").get<std::string>());
    if (j.contains("seed")) c.analysis.iwt.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("knot_candidates"))
      c.analysis.mestimator.knot_candidates = j.at("knot_candidates").get<std::vector<std::size_t>>();
    if (j.contains("lambda_grid"))
      c.analysis.mestimator.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    if (j.contains("global_bandwidth"))
      c.analysis.presmooth.global_bandwidth = j.at("global_bandwidth").get<bool>();
    if (j.contains("effect_sizes")) c.analysis.effect_sizes = j.at("effect_sizes").get<bool>();
    if (j.contains("threads")) c.analysis.threads = j.at("threads").get<unsigned>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("pipeline config: ") + e.what());
  }
}

Json to_json(const PipelineConfig& c) {
  Json j = {{"input", c.input.string()},
            {"out_dir", c.out_dir.string()},
            {"L", c.analysis.presmooth.max_order},
            {"delta", c.analysis.mestimator.delta},
            {"B", c.analysis.iwt.B},
            {"R", c.analysis.R},
            {"alpha", c.analysis.iwt.alpha},
            {"correction", to_string(c.analysis.iwt.correction)},
            {"seed", c.analysis.iwt.seed},
            {"analysis", to_json(c.analysis)}};
  if (c.matrix_csv) j["matrix_csv"] = c.matrix_csv->string();
  return j;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("FDA_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') fail(ErrorCode::InvalidConfig, "FDA_SEED must be a non-negative integer");
  return std::uint64_t(s);
}

PipelineOutcome run_pipeline(const PipelineConfig& config) {
  PipelineOutcome outcome;
  Json& manifest = outcome.manifest;
  manifest["tool"] = "fdsel pipeline";
  manifest["versions"] = versions();
  manifest["config"] = to_json(config);
  manifest["threads"] = resolve_threads(config.analysis.threads);
  manifest["seeds"] = {{"permutation", config.analysis.iwt.seed},
                       {"bootstrap", config.analysis.iwt.seed}};
  manifest["artifacts"] = Json::array();
  manifest["wall_time_s"] = Json::object();
  manifest["warnings"] = Json::array();
  manifest["error"] = nullptr;

  Stopwatch total, step;
  auto artifact = [&](const std::string& name) {
    manifest["artifacts"].push_back(name);
    return config.out_dir / name;
  };
  try {
    config.validate();
    std::filesystem::create_directories(config.out_dir);
    AnalysisConfig ac = config.analysis;
    const unsigned threads = resolve_threads(ac.threads);
    ac.presmooth.threads = threads;

    const GroupedDataset raw = read_long_csv(config.input);
    const GroupedDataset data = validate_dataset(raw, ac.validation);
    manifest["dataset"] = dataset_metadata(data);
    manifest["wall_time_s"]["ingest"] = step.lap();

    const SmoothedSample smoothed = presmooth(data, ac.presmooth);
    {
      std::ostringstream os;
      write_smoothed_csv(os, data, smoothed);
      write_text(artifact("smoothed.csv"), os.str());
    }
    manifest["wall_time_s"]["presmooth"] = step.lap();

    const SampleFits fits = fit_sample(smoothed, ac.mestimator, threads);
    write_json(artifact("fits.json"), fits_to_json(smoothed, fits, ac.mestimator));
    manifest["wall_time_s"]["fit"] = step.lap();

    IwtConfig ic = ac.iwt;
    ic.threads = threads;
    const IwtResult iwt = run_iwt(smoothed, fits.tuning, ac.mestimator, ic);
    write_json(artifact("report.json"), report_to_json(smoothed, iwt, ic));
    write_text(artifact("pvals.svg"), pvalue_svg(smoothed.grid, iwt));
    manifest["alpha"] = iwt.selection.alpha;
    manifest["correction"] = to_string(iwt.selection.method);
    manifest["alpha_star"] = iwt.selection.alpha_star;
    manifest["selected_intervals"] = Json::array();
    for (const auto& iv : iwt.selection.intervals)
      manifest["selected_intervals"].push_back({iv.lower, iv.upper});
    manifest["wall_time_s"]["iwt"] = step.lap();

    if (ac.effect_sizes) {
      const EffectSizeResult es =
          compute_effect_sizes(smoothed, fits, ac.mestimator, ac.R, ic.seed, threads);
      write_json(artifact("esmap.json"), esmap_to_json(smoothed, es, ac.R, ic.seed));
      write_text(artifact("heatmap.svg"), heatmap_svg(smoothed.grid, es));
      if (config.matrix_csv) {
        std::ostringstream os;
        write_esmap_csv(os, es.orders.front().map, smoothed.grid);
        write_text(*config.matrix_csv, os.str());
      }
      for (const auto& w : es.warnings) manifest["warnings"].push_back(w);
      manifest["wall_time_s"]["effectsize"] = step.lap();
    }
    for (const auto& w : data.warnings()) manifest["warnings"].push_back(w);
    for (const auto& w : smoothed.warnings) manifest["warnings"].push_back(w);
    for (const auto& w : iwt.warnings) manifest["warnings"].push_back(w);
    manifest["status"] = "ok";
  } catch (const Error& e) {
    outcome.exit_code = exit_code(e.code());
    manifest["status"] = "error";
    manifest["error"] = {{"code", std::string(to_string(e.code()))},
                         {"message", e.what()},
                         {"exit_code", outcome.exit_code}};
  } catch (const std::exception& e) {
    outcome.exit_code = 3;
    manifest["status"] = "error";
    manifest["error"] = {{"code", "Internal"}, {"message", e.what()}, {"exit_code", 3}};
  }
  manifest["wall_time_s"]["total"] = total.lap();
  manifest["artifacts"].push_back("manifest.json");
  try {
    std::filesystem::create_directories(config.out_dir);
    write_json(config.out_dir / "manifest.json", manifest);
  } catch (const std::exception&) {
    if (outcome.exit_code == 0) outcome.exit_code = 2;
  }
  return outcome;
}

}  // namespace fdsel
