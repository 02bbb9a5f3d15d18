#include <algorithm>
#include <set>

#include "doctest.h"
#include "fdsel/datamodel.hpp"
#include "fdsel/error.hpp"
#include "fdsel/simulate.hpp"
#include "helpers.hpp"

using namespace fdsel;
using testutil::make_dataset;

namespace {

std::set<std::size_t> members(const Arc& arc, std::size_t m) {
  std::set<std::size_t> out;
  for (std::size_t j = 0; j < m; ++j)
    if (arc.contains(j, m)) out.insert(j);
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("grid invariants") {
  CHECK(code_of([] { Grid({0.0, 1.0}); }) == ErrorCode::InvalidGrid);
  CHECK(code_of([] { Grid({0.0, 0.5, 0.5}); }) == ErrorCode::InvalidGrid);
  CHECK(code_of([] { Grid({0.0, 0.5, 1.0}, 0.1, 1.0); }) == ErrorCode::InvalidGrid);
  const Grid g({0.0, 0.2, 0.6, 1.0});
  CHECK(g.spacing(1) == doctest::Approx(0.4));
  double total = 0;
  for (double w : g.cell_weights()) total += w;
  CHECK(total == doctest::Approx(1.0));
  CHECK(g.cell_weights()[0] == doctest::Approx(0.1));
  CHECK(g.cell_weights()[1] == doctest::Approx(0.3));
}

TEST_CASE("full observation validates with unit coverage") {
  const auto d = make_dataset(Grid::uniform(10), {5, 5}, [](auto g, auto i, double t) { return g + i * t; });
  const auto v = validate_dataset(d);
  CHECK(v.validated());
  REQUIRE(v.coverage().size() == 10);
  for (double b : v.coverage()) CHECK(b == 1.0);
  CHECK(v.warnings().empty());
}

TEST_CASE("a grid point observed by no curve is rejected") {
  auto d = make_dataset(Grid::uniform(10), {5, 5}, [](auto, auto, double t) { return t; });
  auto curves = d.curves();
  for (auto& c : curves) c.mask[0] = 0;
  CHECK(code_of([&] { validate_dataset(GroupedDataset(d.grid(), curves)); }) ==
        ErrorCode::UncoveredGridPoint);
}

TEST_CASE("ingestion errors") {
  const Grid grid = Grid::uniform(6);
  SUBCASE("single group") {
    const auto d = make_dataset(grid, {4}, [](auto, auto, double t) { return t; });
    CHECK(code_of([&] { validate_dataset(d); }) == ErrorCode::EmptyGroup);
  }
  SUBCASE("non-finite observed value") {
    auto d = make_dataset(grid, {2, 2}, [](auto, auto, double t) { return t; });
    auto curves = d.curves();
    curves[1].values[3] = std::nan("");
    CHECK(code_of([&] { validate_dataset(GroupedDataset(grid, curves)); }) == ErrorCode::NonFiniteValue);
    curves[1].mask[3] = 0;  // unobserved NaN is never read
    CHECK_NOTHROW(validate_dataset(GroupedDataset(grid, curves)));
  }
  SUBCASE("scattered mask") {
    auto d = make_dataset(grid, {2, 2}, [](auto, auto, double t) { return t; });
    auto curves = d.curves();
    curves[0].mask = {1, 1, 0, 1, 0, 1};
    CHECK(code_of([&] { validate_dataset(GroupedDataset(grid, curves)); }) == ErrorCode::InvalidMask);
    ValidationOptions relaxed;
    relaxed.allow_scattered_masks = true;
    CHECK_NOTHROW(validate_dataset(GroupedDataset(grid, curves), relaxed));
  }
  SUBCASE("empty curve") {
    auto d = make_dataset(grid, {2, 2}, [](auto, auto, double t) { return t; });
    auto curves = d.curves();
    curves[2].mask.assign(6, 0);
    CHECK(code_of([&] { validate_dataset(GroupedDataset(grid, curves)); }) == ErrorCode::InvalidMask);
  }
}

TEST_CASE("low coverage raises a warning only") {
  auto d = make_dataset(Grid::uniform(8), {5, 5}, [](auto, auto, double t) { return t; });
  auto curves = d.curves();
  for (std::size_t i = 1; i < curves.size(); ++i) curves[i].mask[7] = 0;
  const auto v = validate_dataset(GroupedDataset(d.grid(), curves));
  CHECK(v.coverage()[7] == doctest::Approx(0.1));
  CHECK_FALSE(v.warnings().empty());
}

TEST_CASE("validation is idempotent") {
  ScenarioConfig sc;
  sc.n = 10;
  sc.m = 30;
  sc.sampling = Sampling::Partial;
  const auto once = validate_dataset(simulate(sc).dataset);
  const auto twice = validate_dataset(once);
  CHECK(once.coverage() == twice.coverage());
  CHECK(once.warnings() == twice.warnings());
  CHECK(once.labels() == twice.labels());
  for (std::size_t i = 0; i < once.n(); ++i) CHECK(once.curves()[i].mask == twice.curves()[i].mask);
}

TEST_CASE("removing a curve that is not a sole observer keeps the dataset valid") {
  ScenarioConfig sc;
  sc.n = 10;
  sc.m = 30;
  sc.sampling = Sampling::Partial;
  const auto d = validate_dataset(simulate(sc).dataset);
  for (std::size_t drop = 0; drop < d.n(); ++drop) {
    bool sole = false;
    for (std::size_t j = 0; j < d.m(); ++j)
      if (d.curves()[drop].mask[j] && d.coverage()[j] * double(d.n()) < 1.5) sole = true;
    std::vector<GriddedCurve> rest;
    for (std::size_t i = 0; i < d.n(); ++i)
      if (i != drop) rest.push_back(d.curves()[i]);
    if (sole) continue;
    CHECK_NOTHROW(validate_dataset(GroupedDataset(d.grid(), rest)));
  }
}

TEST_CASE("partial sampling leaves every grid point covered in nearly all datasets") {
  const Grid grid = Grid::uniform(100);
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto ps = apply_partial_sampling(grid, 100, 1.2, 0.3, 0.5, seed);
    std::vector<int> count(100, 0);
    for (const auto& mk : ps.masks)
      for (std::size_t j = 0; j < 100; ++j) count[j] += mk[j];
    covered += *std::min_element(count.begin(), count.end()) > 0;
  }
  CHECK(covered >= 990);
}

TEST_CASE("arcs on three points") {
  const auto arcs = enumerate_arcs(3);
  REQUIRE(arcs.size() == 7);
  std::set<std::set<std::size_t>> got;
  for (const auto& a : arcs.arcs()) got.insert(members(a, 3));
  const std::set<std::set<std::size_t>> want{{0}, {1}, {2}, {0, 1}, {1, 2}, {2, 0}, {0, 1, 2}};
  CHECK(got == want);
  CHECK(arcs.arcs().back().length == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    std::size_t count = 0;
    for (const auto& a : arcs.arcs()) count += a.contains(j, 3);
    CHECK(count == 4);
  }
}

TEST_CASE("arc count and brute-force enumeration") {
  for (std::size_t m : {3u, 4u, 5u, 9u, 17u}) {
    const auto arcs = enumerate_arcs(m);
    CHECK(arcs.size() == m * (m - 1) + 1);
    // Brute force: every contiguous window, every complement of a proper
    // window, and the whole domain.
    std::set<std::set<std::size_t>> brute;
    for (std::size_t lo = 0; lo < m; ++lo)
      for (std::size_t hi = lo; hi < m; ++hi) {
        std::set<std::size_t> w, c;
        for (std::size_t j = 0; j < m; ++j) (j >= lo && j <= hi ? w : c).insert(j);
        brute.insert(w);
        if (!c.empty()) brute.insert(c);
      }
    std::set<std::set<std::size_t>> got;
    for (const auto& a : arcs.arcs()) got.insert(members(a, m));
    CHECK(got.size() == arcs.size());
    CHECK(got == brute);
    for (std::size_t j = 0; j < m; ++j) {
      std::size_t count = 0;
      for (const auto& a : arcs.arcs()) count += a.contains(j, m);
      CHECK(count == m * (m - 1) / 2 + 1);
    }
  }
}

TEST_CASE("complement of every window is an arc") {
  const std::size_t m = 12;
  const auto arcs = enumerate_arcs(m);
  std::set<std::set<std::size_t>> all;
  for (const auto& a : arcs.arcs()) all.insert(members(a, m));
  for (const auto& a : arcs.arcs()) {
    if (a.wraps(m) || a.length == m) continue;
    std::set<std::size_t> comp;
    for (std::size_t j = 0; j < m; ++j)
      if (!a.contains(j, m)) comp.insert(j);
    CHECK(all.count(comp) == 1);
  }
}

TEST_CASE("singleton arc j has index j") {
  const auto arcs = enumerate_arcs(7);
  for (std::size_t j = 0; j < 7; ++j) {
    CHECK(arcs[j].length == 1);
    CHECK(arcs[j].start == j);
  }
}
