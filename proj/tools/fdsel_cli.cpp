#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "fdsel/analysis.hpp"
#include "fdsel/evaluate.hpp"
#include "fdsel/io.hpp"
#include "fdsel/parallel.hpp"
#include "fdsel/pipeline.hpp"
#include "fdsel/plot.hpp"

using namespace fdsel;
namespace fs = std::filesystem;

namespace {

std::string slurp_csv(const std::function<void(std::ostream&)>& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

void check_distinct(std::initializer_list<std::string> paths) {
  std::vector<fs::path> seen;
  for (const auto& p : paths) {
    if (p.empty()) continue;
    const auto c = fs::weakly_canonical(p);
    for (const auto& s : seen)
      if (s == c) fail(ErrorCode::InvalidConfig, "path used twice: " + p);
    seen.push_back(c);
  }
}

std::uint64_t effective_seed(std::uint64_t flag) { return seed_from_env().value_or(flag); }

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// Orders 0..L of a smoothed sample.
SmoothedSample truncate_orders(SmoothedSample s, std::size_t L) {
  if (L + 1 > s.orders.size())
    fail(ErrorCode::InvalidConfig, "L = " + std::to_string(L) + " exceeds the orders in the input (" +
                                       std::to_string(s.orders.size() - 1) + ")");
  s.orders.resize(L + 1);
  s.degrees.resize(L + 1);
  return s;
}

MEstimatorConfig fit_config_from(const Json& fits) {
  MEstimatorConfig c;
  if (fits.contains("config")) update_from_json(c, fits.at("config"));
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interval-wise domain selection for grouped functional data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic two-group dataset");
  std::string sim_cfg, sim_out, sim_truth;
  std::uint64_t sim_seed = 1;
  sim->add_option("--config", sim_cfg, "Scenario JSON");
  sim->add_option("--out", sim_out, "Long CSV output")->required();
  sim->add_option("--truth", sim_truth, "Ground truth JSON output");
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Seed (config seed wins)");

  // smooth
  auto* sm = app.add_subcommand("smooth", "Kernel pre-smoothing with derivatives");
  std::string sm_in, sm_out;
  std::size_t sm_L = 1;
  bool sm_global = false;
  sm->add_option("--in", sm_in)->required();
  sm->add_option("--L", sm_L, "Highest derivative order");
  sm->add_option("--out", sm_out)->required();
  sm->add_flag("--global-bandwidth", sm_global, "One bandwidth shared by all curves");
  bool allow_scatter = false;
  sm->add_flag("--allow-scattered-masks", allow_scatter);

  // fit
  auto* ft = app.add_subcommand("fit", "Penalized spline M-estimates per group and order");
  std::string ft_in, ft_out, ft_cfg;
  double ft_delta = 1.0;
  ft->add_option("--in", ft_in)->required();
  ft->add_option("--delta", ft_delta, "Huber threshold");
  ft->add_option("--config", ft_cfg, "M-estimator JSON");
  ft->add_option("--out", ft_out)->required();

  // iwt
  auto* iw = app.add_subcommand("iwt", "Interval-wise permutation test and domain selection");
  std::string iw_in, iw_fits, iw_out, iw_plot, iw_corr = "bonferroni";
  IwtConfig iw_cfg;
  std::size_t iw_L = 1;
  iw->add_option("--in", iw_in)->required();
  iw->add_option("--fits", iw_fits)->required();
  iw->add_option("--B", iw_cfg.B);
  iw->add_option("--alpha", iw_cfg.alpha);
  iw->add_option("--L", iw_L);
  iw->add_option("--correction", iw_corr);
  iw->add_option("--seed", iw_cfg.seed);
  iw->add_option("--out", iw_out)->required();
  iw->add_option("--plot", iw_plot);

  // effectsize
  auto* es = app.add_subcommand("effectsize", "Bootstrap fSNR and multiscale heatmap");
  std::string es_in, es_fits, es_out, es_plot, es_matrix;
  std::size_t es_R = 500;
  std::uint64_t es_seed = 7;
  es->add_option("--in", es_in)->required();
  es->add_option("--fits", es_fits)->required();
  es->add_option("--R", es_R);
  es->add_option("--seed", es_seed);
  es->add_option("--out", es_out)->required();
  es->add_option("--plot", es_plot);
  es->add_option("--matrix-csv", es_matrix);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Simulation study over a design");
  std::string ev_design, ev_out, ev_reps;
  ev->add_option("--design", ev_design)->required();
  ev->add_option("--out", ev_out)->required();
  ev->add_option("--per-replicate", ev_reps);

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "Full workflow on one dataset");
  std::string pl_cfg, pl_in, pl_out, pl_corr, pl_matrix;
  std::size_t pl_L = 1, pl_B = 1000, pl_R = 500;
  double pl_delta = 1.0, pl_alpha = 0.05;
  std::uint64_t pl_seed = 7;
  pl->add_option("--config", pl_cfg, "Pipeline JSON (overrides flags)");
  auto* o_in = pl->add_option("--in", pl_in);
  auto* o_out = pl->add_option("--out-dir", pl_out);
  auto* o_L = pl->add_option("--L", pl_L);
  auto* o_delta = pl->add_option("--delta", pl_delta);
  auto* o_B = pl->add_option("--B", pl_B);
  auto* o_R = pl->add_option("--R", pl_R);
  auto* o_alpha = pl->add_option("--alpha", pl_alpha);
  auto* o_corr = pl->add_option("--correction", pl_corr);
  auto* o_seed = pl->add_option("--seed", pl_seed);
  auto* o_matrix = pl->add_option("--matrix-csv", pl_matrix);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  try {
    if (*sim) {
      ScenarioConfig sc;
      if (sim_seed_opt->count()) sc.seed = sim_seed;
      if (!sim_cfg.empty()) {
        Json j = read_json(sim_cfg);
        if (sim_seed_opt->count() && !j.contains("seed")) j["seed"] = sim_seed;
        sc = scenario_from_json(j);
      }
      sc.seed = effective_seed(sc.seed);
      check_distinct({sim_cfg, sim_out, sim_truth});
      const SimulatedData data = simulate(sc);
      write_text(sim_out, slurp_csv([&](std::ostream& os) { write_long_csv(os, data.dataset); }));
      if (!sim_truth.empty()) {
        Json t = to_json(data.truth, sc);
        t["dataset"] = dataset_metadata(validate_dataset(data.dataset));
        write_json(sim_truth, t);
      }
      return 0;
    }
    if (*sm) {
      check_distinct({sm_in, sm_out});
      PresmoothOptions po;
      po.max_order = sm_L;
      po.global_bandwidth = sm_global;
      po.threads = threads;
      ValidationOptions vo;
      vo.allow_scattered_masks = allow_scatter;
      const GroupedDataset data = validate_dataset(read_long_csv(fs::path(sm_in)), vo);
      const SmoothedSample s = presmooth(data, po);
      warn_all(data.warnings());
      warn_all(s.warnings);
      write_text(sm_out, slurp_csv([&](std::ostream& os) { write_smoothed_csv(os, data, s); }));
      return 0;
    }
    if (*ft) {
      check_distinct({ft_in, ft_out, ft_cfg});
      MEstimatorConfig mc;
      mc.delta = ft_delta;
      if (!ft_cfg.empty()) update_from_json(mc, read_json(ft_cfg));
      mc.validate();
      const SmoothedSample s = read_smoothed_csv(fs::path(ft_in));
      const SampleFits fits = fit_sample(s, mc, resolve_threads(threads));
      write_json(ft_out, fits_to_json(s, fits, mc));
      return 0;
    }
    if (*iw) {
      check_distinct({iw_in, iw_fits, iw_out, iw_plot});
      iw_cfg.correction = parse_correction(iw_corr);
      iw_cfg.seed = effective_seed(iw_cfg.seed);
      iw_cfg.threads = threads;
      const SmoothedSample s = truncate_orders(read_smoothed_csv(fs::path(iw_in)), iw_L);
      const Json fj = read_json(iw_fits);
      const MEstimatorConfig mc = fit_config_from(fj);
      auto tuning = tuning_from_json(fj, s);
      if (tuning.size() < iw_L + 1) fail(ErrorCode::InvalidConfig, "fits.json covers fewer orders than L");
      tuning.resize(iw_L + 1);
      const IwtResult r = run_iwt(s, tuning, mc, iw_cfg);
      warn_all(r.warnings);
      write_json(iw_out, report_to_json(s, r, iw_cfg));
      if (!iw_plot.empty()) write_text(iw_plot, pvalue_svg(s.grid, r));
      return 0;
    }
    if (*es) {
      check_distinct({es_in, es_fits, es_out, es_plot, es_matrix});
      const std::uint64_t seed = effective_seed(es_seed);
      const SmoothedSample s0 = read_smoothed_csv(fs::path(es_in));
      const Json fj = read_json(es_fits);
      const MEstimatorConfig mc = fit_config_from(fj);
      auto tuning = tuning_from_json(fj, s0);
      const SmoothedSample s = truncate_orders(s0, std::min(tuning.size(), s0.orders.size()) - 1);
      tuning.resize(s.orders.size());
      const unsigned t = resolve_threads(threads);
      const SampleFits fits = fit_sample(s, mc, tuning, t);
      const EffectSizeResult r = compute_effect_sizes(s, fits, mc, es_R, seed, t);
      warn_all(r.warnings);
      write_json(es_out, esmap_to_json(s, r, es_R, seed));
      if (!es_plot.empty()) write_text(es_plot, heatmap_svg(s.grid, r));
      if (!es_matrix.empty())
        write_text(es_matrix, slurp_csv([&](std::ostream& os) {
                     write_esmap_csv(os, r.orders.front().map, s.grid);
                   }));
      return 0;
    }
    if (*ev) {
      check_distinct({ev_design, ev_out, ev_reps});
      AnalysisConfig ac;
      ExperimentDesign d = design_from_json(read_json(ev_design), &ac);
      d.base_seed = effective_seed(d.base_seed);
      ac.threads = 1;
      const ExperimentResult r = run_experiment(d, domain_selection_method(ac), resolve_threads(threads));
      write_text(ev_out, slurp_csv([&](std::ostream& os) { write_summary_csv(os, r.summary); }));
      if (!ev_reps.empty())
        write_text(ev_reps, slurp_csv([&](std::ostream& os) { write_replicates_csv(os, r.replicates); }));
      for (const auto& s : r.summary)
        if (s.flagged) std::cerr << "warning: cell " << s.cell << " failed in " << s.failures << " replicates\n";
      return 0;
    }
    if (*pl) {
      PipelineConfig pc;
      pc.analysis.threads = threads;
      if (o_in->count()) pc.input = pl_in;
      if (o_out->count()) pc.out_dir = pl_out;
      if (o_L->count()) pc.analysis.presmooth.max_order = pl_L;
      if (o_delta->count()) pc.analysis.mestimator.delta = pl_delta;
      if (o_B->count()) pc.analysis.iwt.B = pl_B;
      if (o_R->count()) pc.analysis.R = pl_R;
      if (o_alpha->count()) pc.analysis.iwt.alpha = pl_alpha;
      if (o_corr->count()) pc.analysis.iwt.correction = parse_correction(pl_corr);
      if (o_seed->count()) pc.analysis.iwt.seed = pl_seed;
      if (o_matrix->count()) pc.matrix_csv = pl_matrix;
      if (!pl_cfg.empty()) update_from_json(pc, read_json(pl_cfg));
      pc.analysis.iwt.seed = effective_seed(pc.analysis.iwt.seed);
      const PipelineOutcome out = run_pipeline(pc);
      if (out.exit_code != 0) std::cerr << "error: " << out.manifest["error"]["message"].get<std::string>() << '\n';
      return out.exit_code;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
