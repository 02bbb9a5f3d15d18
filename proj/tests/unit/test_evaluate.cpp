#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "fdsel/error.hpp"
#include "fdsel/evaluate.hpp"

using namespace fdsel;

namespace {

GroundTruth truth100() { return make_location_pair(Grid::uniform(100), LocationShape{}); }

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v;
  for (std::size_t j = lo; j <= hi; ++j) v.push_back(j);
  return v;
}

// Selects exactly the true separable set.
MethodOutput oracle(const SimulatedData& d) {
  MethodOutput out;
  out.selection.selected = d.truth.separable_set;
  return out;
}

}  // namespace

TEST_CASE("scores") {
  const auto t = truth100();
  REQUIRE(t.separable_set == range(34, 99));

  const auto perfect = score(t, t.separable_set);
  CHECK(*perfect.sensitivity == 1.0);
  CHECK(perfect.frr == 0.0);
  CHECK_FALSE(perfect.false_rejection_present);

  const auto partial = score(t, range(39, 99));
  CHECK(*partial.sensitivity == doctest::Approx(61.0 / 66.0));
  CHECK(partial.frr == 0);
  CHECK(partial.true_positives == 61);

  const auto inverted = score(t, t.equal_set);
  CHECK(*inverted.sensitivity == 0);
  CHECK(inverted.frr == 1);
  CHECK(inverted.false_rejection_present);

  const auto none = score(t, {});
  CHECK(none.frr == 0);
  CHECK(*none.sensitivity == 0);

  auto shuffled = range(20, 60);
  std::reverse(shuffled.begin(), shuffled.end());
  const auto a = score(t, range(20, 60)), b = score(t, shuffled);
  CHECK(*a.sensitivity == *b.sensitivity);
  CHECK(a.frr == b.frr);

  // Adding true positives never hurts.
  auto grown = range(20, 60);
  for (std::size_t j = 61; j < 80; ++j) grown.push_back(j);
  const auto c = score(t, grown);
  CHECK(*c.sensitivity >= *a.sensitivity);
  CHECK(c.false_positives <= a.false_positives);

  LocationShape null;
  null.c1 = 1.0;
  CHECK_FALSE(score(make_location_pair(Grid::uniform(100), null), range(3, 5)).sensitivity.has_value());

  SelectionReport rep;
  rep.selected = {1, 2};
  CHECK_THROWS_AS(score(t, rep, Grid::uniform(50)), Error);
  CHECK_NOTHROW(score(t, rep, Grid::uniform(100)));
  rep.selected = {100};
  CHECK_THROWS_AS(score(t, rep, Grid::uniform(100)), Error);
}

TEST_CASE("experiment orchestration") {
  ExperimentDesign design;
  ScenarioConfig sc;
  sc.n = 5;
  sc.m = 20;
  design.cells.push_back({"signal", sc});
  auto null = sc;
  null.shape.c1 = 1.0;
  design.cells.push_back({"null", null});
  design.replicates = 1;

  const auto res = run_experiment(design, oracle, 1);
  REQUIRE(res.summary.size() == 2);
  CHECK(*res.summary[0].mean_sensitivity == 1.0);
  CHECK(res.summary[0].mean_frr == 0.0);
  CHECK(res.summary[0].p_false_rejection == 0.0);
  CHECK_FALSE(res.summary[1].mean_sensitivity.has_value());

  std::ostringstream os;
  write_summary_csv(os, res.summary);
  CHECK(os.str().find("NA") != std::string::npos);

  // Failures are recorded and flag the cell.
  design.replicates = 10;
  int calls = 0;
  const Method flaky = [&](const SimulatedData& d) {
    if (d.truth.separable_set.empty()) throw Error(ErrorCode::AllFitsFailed, "stub");
    ++calls;
    return oracle(d);
  };
  const auto f = run_experiment(design, flaky, 1);
  CHECK(f.summary[1].failures == 10);
  CHECK(f.summary[1].flagged);
  CHECK_FALSE(f.summary[0].flagged);
  CHECK(f.replicates[0].seed == (design.base_seed ^ 0));
  CHECK(f.replicates[3].seed == (design.base_seed ^ 3));
}

TEST_CASE("summary csv is reproducible") {
  ExperimentDesign design;
  ScenarioConfig sc;
  sc.n = 6;
  sc.m = 25;
  sc.sigma_e = 0.5;
  design.cells.push_back({"g", sc});
  design.replicates = 2;
  design.base_seed = 41;
  AnalysisConfig cfg;
  cfg.iwt.B = 99;
  cfg.mestimator.knot_candidates = {10};
  cfg.threads = 1;
  cfg.iwt.threads = 1;
  cfg.presmooth.threads = 1;
  auto csv = [&](unsigned threads) {
    const auto r = run_experiment(design, domain_selection_method(cfg), threads);
    std::ostringstream a, b;
    write_summary_csv(a, r.summary);
    write_replicates_csv(b, r.replicates);
    return a.str() + b.str();
  };
  const auto first = csv(1);
  CHECK(first == csv(1));
  CHECK(first == csv(2));
}
