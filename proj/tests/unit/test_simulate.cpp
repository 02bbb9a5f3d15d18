#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fdsel/error.hpp"
#include "fdsel/simulate.hpp"

using namespace fdsel;

namespace {

struct Moments {
  double mean = 0, var = 0, kurt = 0;
};

Moments moments(const std::vector<double>& x) {
  Moments r;
  const double n = double(x.size());
  for (double v : x) r.mean += v;
  r.mean /= n;
  double m2 = 0, m4 = 0;
  for (double v : x) {
    const double d = (v - r.mean) * (v - r.mean);
    m2 += d;
    m4 += d * d;
  }
  r.var = m2 / (n - 1);
  r.kurt = (m4 / n) / ((m2 / n) * (m2 / n));
  return r;
}

std::vector<double> column(const CurveValues& c, std::size_t j) {
  std::vector<double> out;
  for (const auto& row : c) out.push_back(row[j]);
  return out;
}

}  // namespace

TEST_CASE("location pair") {
  const Grid grid = Grid::uniform(100);
  SUBCASE("one-signed") {
    const auto truth = make_location_pair(grid, LocationShape{});
    CHECK(truth.separable_set.size() == 66);
    for (std::size_t j : truth.equal_set) {
      CHECK(grid[j] <= 0.34);
      CHECK(truth.mu1[j] == truth.mu2[j]);
    }
    for (std::size_t j : truth.separable_set) {
      CHECK(grid[j] > 0.34);
      CHECK(truth.mu2[j] - truth.mu1[j] > 0);
    }
    CHECK(truth.equal_set.size() + truth.separable_set.size() == 100);
  }
  SUBCASE("global null") {
    LocationShape s;
    s.c1 = 1.0;
    CHECK(make_location_pair(grid, s).separable_set.empty());
  }
  SUBCASE("cross-over changes sign once") {
    LocationShape s;
    s.preset = "cross-over";
    const auto truth = make_location_pair(grid, s);
    int changes = 0, last = 0;
    for (std::size_t j = 0; j < 100; ++j) {
      const double diff = truth.mu1[j] - truth.mu2[j];
      const int sign = (diff > 0) - (diff < 0);
      if (sign != 0 && last != 0 && sign != last) ++changes;
      if (sign != 0) last = sign;
    }
    CHECK(changes == 1);
    CHECK(truth.separable_set.size() == 66);
  }
  SUBCASE("difference is C2 across both ends of the ramp") {
    const Grid fine = Grid::uniform(4001);
    const auto truth = make_location_pair(fine, LocationShape{});
    const double h = fine.spacing(0);
    std::vector<double> d2(4001, 0.0);
    for (std::size_t j = 1; j + 1 < 4001; ++j) {
      auto s = [&](std::size_t k) { return truth.mu2[k] - truth.mu1[k]; };
      d2[j] = (s(j + 1) - 2 * s(j) + s(j - 1)) / (h * h);
    }
    double peak = 0;
    for (double v : d2) peak = std::max(peak, std::abs(v));
    // A jump in s'' would leave a second difference of order `peak` next to the knot.
    for (double knot : {0.34, 0.44}) {
      const auto j = std::size_t(std::lround(knot / h));
      CHECK(std::abs(d2[j]) < 0.1 * peak);
      CHECK(std::abs(d2[j + 1]) < 0.1 * peak);
    }
  }
  SUBCASE("unknown preset") {
    LocationShape s;
    s.preset = "zigzag";
    CHECK_THROWS_AS(make_location_pair(grid, s), Error);
  }
}

TEST_CASE("exponential covariance") {
  CHECK(exp_covariance(0, 3, 0.2) == doctest::Approx(9));
  CHECK(exp_covariance(0.7, 0, 0.2) == 0);
  CHECK(exp_covariance(0.2, 1, 0.2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("gaussian process errors") {
  const Grid grid = Grid::uniform(11);  // t = 0.2 is index 2
  const auto e = sample_gaussian_errors(grid, 5000, 1.5, 0.2, 0);
  CHECK(std::abs(moments(column(e, 0)).var / 2.25 - 1) < 0.05);
  CHECK(std::abs(moments(column(e, 5)).var / 2.25 - 1) < 0.05);
  const auto a = column(e, 0), b = column(e, 2);
  const auto ma = moments(a), mb = moments(b);
  double cov = 0;
  for (std::size_t i = 0; i < a.size(); ++i) cov += (a[i] - ma.mean) * (b[i] - mb.mean);
  cov /= double(a.size() - 1);
  CHECK(std::abs(cov / std::sqrt(ma.var * mb.var) - std::exp(-1.0)) < 0.05);
  CHECK(sample_gaussian_errors(grid, 50, 1.5, 0.2, 0) ==
        CurveValues(e.begin(), e.begin() + 50));
}

TEST_CASE("t3 errors") {
  const Grid grid = Grid::uniform(20);
  const double sigma = 2.0;
  const auto e = sample_t3_errors(grid, 20000, sigma, 0.2, 5);
  const auto m = moments(column(e, 7));
  CHECK(std::abs(m.var / (3 * sigma * sigma) - 1) < 0.10);
  // Gaussian sample kurtosis has sd sqrt(24 / N); 2.33 sd is the one-sided 99% bound.
  CHECK(m.kurt > 3 + 2.33 * std::sqrt(24.0 / 20000));
  CHECK(sample_t3_errors(grid, 30, sigma, 0.2, 5, 3.0) == sample_gaussian_errors(grid, 30, sigma, 0.2, 5));
}

TEST_CASE("curve outliers") {
  const Grid grid = Grid::uniform(30);
  const auto base = sample_gaussian_errors(grid, 100, 1.0, 0.2, 3);
  const auto r = apply_curve_outliers(base, 0.05, 1.0, 9);
  CHECK(r.shifted.size() == 5);
  std::set<std::size_t> shifted(r.shifted.begin(), r.shifted.end());
  for (std::size_t i = 0; i < 100; ++i) {
    const double d0 = r.curves[i][0] - base[i][0];
    for (std::size_t j = 0; j < 30; ++j) CHECK(r.curves[i][j] - base[i][j] == doctest::Approx(d0).epsilon(1e-12));
    if (!shifted.count(i)) CHECK(d0 == 0);
  }
  CHECK(apply_curve_outliers(base, 0.0, 1.0, 9).curves == base);

  std::vector<std::size_t> labels(100);
  for (std::size_t i = 50; i < 100; ++i) labels[i] = 1;
  const auto per_group = apply_curve_outliers(base, 0.05, 1.0, 9, &labels);
  std::size_t first = 0;
  for (std::size_t i : per_group.shifted) first += i < 50;
  CHECK(first == 3);
  CHECK(per_group.shifted.size() == 6);

  // Shift variance 3 sigma^2.
  std::vector<double> shifts;
  const CurveValues zero(100, std::vector<double>(3, 0.0));
  for (std::uint64_t s = 0; s < 4000; ++s)
    for (double v : apply_curve_outliers(zero, 0.05, 2.0, s).shifts) shifts.push_back(v);
  CHECK(std::abs(moments(shifts).var / 12.0 - 1) < 0.1);
}

TEST_CASE("local outliers") {
  const Grid grid = Grid::uniform(100);
  const auto base = sample_gaussian_errors(grid, 100, 1.0, 0.2, 4);
  const auto r = apply_local_outliers(base, 0.05, 1.0, 2);
  CHECK(r.cells.size() == 500);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < 100; ++j) changed += r.curves[i][j] != base[i][j];
  CHECK(changed == 500);
  std::set<std::pair<std::size_t, std::size_t>> distinct(r.cells.begin(), r.cells.end());
  CHECK(distinct.size() == 500);
  CHECK(apply_local_outliers(base, 0.0, 1.0, 2).curves == base);

  const double sigma = 1.5;
  const CurveValues zero(100, std::vector<double>(100, 0.0));
  std::vector<double> noise;
  for (std::uint64_t s = 0; s < 5000; ++s) {
    const auto out = apply_local_outliers(zero, 0.05, sigma, s);
    for (auto [i, j] : out.cells) noise.push_back(out.curves[i][j]);
  }
  CHECK(std::abs(moments(noise).var / (2 * sigma * sigma) - 1) < 0.1);
}

TEST_CASE("partial sampling") {
  const Grid grid = Grid::uniform(100);
  SUBCASE("p = 0 masks nothing") {
    const auto ps = apply_partial_sampling(grid, 50, 1.2, 0.3, 0.0, 1);
    for (const auto& mk : ps.masks) CHECK(std::all_of(mk.begin(), mk.end(), [](auto v) { return v == 1; }));
  }
  SUBCASE("average removed fraction") {
    double removed = 0;
    std::size_t drew = 0, null_effective = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto ps = apply_partial_sampling(grid, 100, 1.2, 0.3, 0.5, s);
      for (std::size_t i = 0; i < 100; ++i) {
        if (!ps.drew_interval[i]) {
          CHECK(ps.removed_fraction[i] == 0);
          continue;
        }
        if (ps.removed_fraction[i] == 0) {
          ++null_effective;
          continue;
        }
        ++drew;
        removed += ps.removed_fraction[i];
        CHECK(ps.masks[i][0] + ps.masks[i][99] >= 1);
      }
    }
    CHECK(std::abs(removed / double(drew) - 0.256) < 0.01);
    CHECK(null_effective > 0);
  }
}

TEST_CASE("simulated datasets") {
  ScenarioConfig sc;
  sc.n = 8;
  sc.m = 40;
  sc.scenario = Scenario::T3;
  sc.sampling = Sampling::Partial;
  sc.seed = 77;
  const auto a = simulate(sc);
  const auto b = simulate(sc);
  REQUIRE(a.dataset.n() == 16);
  CHECK(a.dataset.k() == 2);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& ca = a.dataset.curves()[i];
    const auto& cb = b.dataset.curves()[i];
    CHECK(ca.mask == cb.mask);
    for (std::size_t j = 0; j < 40; ++j)
      if (ca.mask[j]) CHECK(ca.values[j] == cb.values[j]);
  }
  // Masks are drawn without looking at the values.
  auto louder = sc;
  louder.sigma_e = 4.0;
  louder.scenario = Scenario::LocalOutlier;
  const auto c = simulate(louder);
  for (std::size_t i = 0; i < 16; ++i) CHECK(a.dataset.curves()[i].mask == c.dataset.curves()[i].mask);

  for (auto scen : {Scenario::Gaussian, Scenario::T3, Scenario::CurveOutlier, Scenario::LocalOutlier}) {
    auto null = sc;
    null.scenario = scen;
    null.shape.c1 = 1.0;
    const auto d = simulate(null);
    CHECK(d.truth.separable_set.empty());
    CHECK(d.truth.mu1 == d.truth.mu2);
  }
  auto bad = sc;
  bad.phi = 0;
  CHECK_THROWS_AS(simulate(bad), Error);
}
