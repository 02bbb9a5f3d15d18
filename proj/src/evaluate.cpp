#include "fdsel/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "fdsel/error.hpp"
#include "fdsel/parallel.hpp"

namespace fdsel {

SelectionScore score(const GroundTruth& truth, const std::vector<std::size_t>& selected) {
  const std::set<std::size_t> a(truth.separable_set.begin(), truth.separable_set.end());
  const std::set<std::size_t> ahat(selected.begin(), selected.end());
  SelectionScore s;
  s.truth_size = a.size();
  s.selected_size = ahat.size();
  for (std::size_t j : ahat) {
    if (j >= truth.grid.size()) fail(ErrorCode::GridMismatch, "selected index outside the grid");
    if (a.count(j))
      ++s.true_positives;
    else
      ++s.false_positives;
  }
  if (!a.empty()) s.sensitivity = double(s.true_positives) / double(a.size());
  s.frr = ahat.empty() ? 0.0 : double(s.false_positives) / double(ahat.size());
  s.false_rejection_present = s.false_positives > 0;
  return s;
}

SelectionScore score(const GroundTruth& truth, const SelectionReport& report, const Grid& grid) {
  if (truth.grid != grid.points()) fail(ErrorCode::GridMismatch, "truth and report grids differ");
  return score(truth, report.selected);
}

Method domain_selection_method(AnalysisConfig config) {
  return [config](const SimulatedData& data) {
    AnalysisResult res = analyze(data.dataset, config);
    MethodOutput out;
    out.selection = std::move(res.iwt.selection);
    for (auto& pv : res.iwt.pvalues) out.adjusted.push_back(std::move(pv.adjusted));
    return out;
  };
}

namespace {

std::vector<std::uint8_t> union_decision(const CorrectionResult& c) {
  std::vector<std::uint8_t> any(c.reject.front().size(), 0);
  for (const auto& row : c.reject)
    for (std::size_t j = 0; j < row.size(); ++j) any[j] |= row[j];
  return any;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentDesign& design, const Method& method,
                                unsigned threads) {
  const std::size_t R = design.replicates;
  if (R == 0) fail(ErrorCode::InvalidConfig, "experiment needs at least one replicate");
  for (const auto& cell : design.cells) cell.scenario.validate();

  ExperimentResult out;
  out.replicates.resize(design.cells.size() * R);
  parallel_for(out.replicates.size(), threads, [&](std::size_t task) {
    const auto& cell = design.cells[task / R];
    ReplicateRecord& rec = out.replicates[task];
    rec.cell = cell.name;
    rec.replicate = task % R;
    rec.seed = design.base_seed ^ std::uint64_t(rec.replicate);
    try {
      ScenarioConfig sc = cell.scenario;
      sc.seed = rec.seed;
      const SimulatedData data = simulate(sc);
      const MethodOutput result = method(data);
      rec.score = score(data.truth, result.selection.selected);
      rec.points = data.truth.grid.size();
      if (!result.adjusted.empty()) {
        const auto primary =
            union_decision(correct_alpha(result.adjusted, result.selection.alpha, result.selection.method));
        const auto holm = union_decision(correct_alpha(result.adjusted, result.selection.alpha, Correction::Holm));
        const auto hoch =
            union_decision(correct_alpha(result.adjusted, result.selection.alpha, Correction::Hochberg));
        for (std::size_t j = 0; j < rec.points; ++j) {
          rec.agree_holm += holm[j] == primary[j];
          rec.agree_hochberg += hoch[j] == primary[j];
        }
      } else {
        rec.agree_holm = rec.agree_hochberg = rec.points;
      }
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });

  for (std::size_t c = 0; c < design.cells.size(); ++c) {
    CellSummary s;
    s.cell = design.cells[c].name;
    s.replicates = R;
    double sens = 0.0, frr = 0.0;
    std::size_t sens_count = 0, ok = 0, with_fp = 0, points = 0, agree_h = 0, agree_hb = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& rec = out.replicates[c * R + r];
      if (!rec.ok) {
        ++s.failures;
        continue;
      }
      ++ok;
      if (rec.score.sensitivity) {
        sens += *rec.score.sensitivity;
        ++sens_count;
      }
      frr += rec.score.frr;
      with_fp += rec.score.false_rejection_present ? 1 : 0;
      points += rec.points;
      agree_h += rec.agree_holm;
      agree_hb += rec.agree_hochberg;
    }
    s.flagged = double(s.failures) > 0.05 * double(R);
    if (sens_count > 0) s.mean_sensitivity = sens / double(sens_count);
    if (ok > 0) {
      s.mean_frr = frr / double(ok);
      s.p_false_rejection = double(with_fp) / double(ok);
    }
    if (points > 0) {
      s.holm_agreement = double(agree_h) / double(points);
      s.hochberg_agreement = double(agree_hb) / double(points);
    }
    out.summary.push_back(s);
  }
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<CellSummary>& summary) {
  os << "cell,replicates,failures,flagged,mean_sensitivity,mean_frr,p_false_rejection,"
        "holm_agreement,hochberg_agreement\n";
  for (const auto& s : summary) {
    os << s.cell << ',' << s.replicates << ',' << s.failures << ',' << (s.flagged ? 1 : 0) << ','
       << (s.mean_sensitivity ? format_double(*s.mean_sensitivity) : "NA") << ','
       << format_double(s.mean_frr) << ',' << format_double(s.p_false_rejection) << ','
       << format_double(s.holm_agreement) << ',' << format_double(s.hochberg_agreement) << '\n';
  }
}

void write_replicates_csv(std::ostream& os, const std::vector<ReplicateRecord>& records) {
  os << "cell,replicate,seed,ok,sensitivity,frr,false_rejection,truth_size,selected_size,"
        "true_positives,false_positives\n";
  for (const auto& r : records) {
    os << r.cell << ',' << r.replicate << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
       << (r.ok && r.score.sensitivity ? format_double(*r.score.sensitivity) : "NA") << ','
       << (r.ok ? format_double(r.score.frr) : "NA") << ','
       << (r.score.false_rejection_present ? 1 : 0) << ',' << r.score.truth_size << ','
       << r.score.selected_size << ',' << r.score.true_positives << ','
       << r.score.false_positives << '\n';
  }
}

}  // namespace fdsel
