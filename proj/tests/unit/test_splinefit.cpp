#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fdsel/error.hpp"
#include "fdsel/rng.hpp"
#include "fdsel/simulate.hpp"
#include "fdsel/splinefit.hpp"
#include "helpers.hpp"

using namespace fdsel;
using testutil::make_dataset;
using testutil::raw_sample;
using testutil::sup_diff;

namespace {

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

MEstimatorConfig config_with(double delta) {
  MEstimatorConfig c;
  c.delta = delta;
  return c;
}

// Noisy sine curves, one group.
OrderSample noisy_sines(const Grid& g, std::size_t n, double sigma, std::uint64_t seed) {
  const auto e = sample_gaussian_errors(g, n, sigma, 0.2, seed);
  const auto d = make_dataset(g, {n, 1}, [&](auto grp, auto i, double t) {
    const double base = std::sin(2 * std::numbers::pi * t);
    return grp == 0 ? base + e[i][std::size_t(std::lround(t * double(g.size() - 1)))] : base;
  });
  return raw_sample(d).orders[0];
}

}  // namespace

TEST_CASE("huber loss") {
  CHECK(huber_rho(0, 1) == 0);
  CHECK(huber_rho(0.5, 1) == doctest::Approx(0.125));
  CHECK(huber_rho(2, 1) == doctest::Approx(1.5));
  CHECK(huber_rho(-2, 1) == doctest::Approx(1.5));
  // C1 at the joint.
  const double e = 1e-7;
  CHECK((huber_rho(1 + e, 1) - huber_rho(1 - e, 1)) / (2 * e) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(huber_weight(0.3, 1) == 1);
  CHECK(huber_weight(-4, 1) == doctest::Approx(0.25));
}

TEST_CASE("b-spline basis") {
  const Grid g = Grid::uniform(57);
  const auto knots = uniform_interior_knots(0, 1, 9);
  const auto B = build_basis(g, knots, 3);
  CHECK(B.cols() == 9 + 3 + 1);
  for (Eigen::Index j = 0; j < B.rows(); ++j) CHECK(std::abs(B.row(j).sum() - 1) < 1e-12);
  CHECK(B.minCoeff() >= 0);

  const SplineBasis basis(g, knots, 3);
  const auto& kn = basis.knots();
  for (Eigen::Index k = 0; k < B.cols(); ++k)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      if (g[j] < kn[k] || g[j] > kn[k + 4]) CHECK(B(j, k) == 0);

  CHECK_THROWS_AS(build_basis(g, {0.3, 0.3}), Error);
  CHECK_THROWS_AS(build_basis(g, {0.5, 1.2}), Error);
  CHECK_THROWS_AS(build_basis(g, {0.6, 0.2}), Error);
  CHECK(build_basis(g, {}, 3).cols() == 4);
}

TEST_CASE("cubic reproduced without interior knots") {
  const Grid g = Grid::uniform(50);
  const auto d = make_dataset(g, {3, 1}, [](auto, auto, double t) { return t * t * t - 0.5 * t; });
  const auto s = raw_sample(d);
  const auto members = iota(3);
  const auto fit = irwls_fit(g, s.orders[0], members, 0, 0.0, MEstimatorConfig{});
  std::vector<double> want(50);
  for (std::size_t j = 0; j < 50; ++j) want[j] = g[j] * g[j] * g[j] - 0.5 * g[j];
  CHECK(sup_diff(fit.fitted, want) < 1e-10);
  CHECK(fit.coefficients.size() == 4);
}

TEST_CASE("difference penalty") {
  const auto P = penalty_matrix(6, 2);
  CHECK((P - P.transpose()).norm() == 0);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(6), lin(6);
  for (int i = 0; i < 6; ++i) lin(i) = 3.0 * i - 1;
  CHECK(one.dot(P * one) == doctest::Approx(0).scale(1));
  CHECK(lin.dot(P * lin) == doctest::Approx(0).scale(1));
  Eigen::VectorXd bump(3);
  bump << 0, 1, 0;
  CHECK(bump.dot(penalty_matrix(3, 2) * bump) == doctest::Approx(4));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("derivative gram penalty integrates squared curvature") {
  const Grid g = Grid::uniform(80);
  const SplineBasis basis(g, uniform_interior_knots(0, 1, 6), 3);
  const auto G = derivative_gram_penalty(basis, 2);
  auto coef_of = [&](double (*f)(double)) {
    std::vector<double> y(80);
    for (std::size_t j = 0; j < 80; ++j) y[j] = f(g[j]);
    const Eigen::MatrixXd B = basis.dense();
    return Eigen::VectorXd(B.colPivHouseholderQr().solve(Eigen::Map<Eigen::VectorXd>(y.data(), 80)));
  };
  const auto c_lin = coef_of([](double t) { return 2 * t + 1; });
  const auto c_sq = coef_of([](double t) { return t * t; });
  CHECK(c_lin.dot(G * c_lin) == doctest::Approx(0).scale(1));
  CHECK(c_sq.dot(G * c_sq) == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("constant data gives a constant fit") {
  const Grid g = Grid::uniform(40);
  const auto d = make_dataset(g, {5, 1}, [](auto, auto, double) { return 2.75; });
  const auto s = raw_sample(d);
  for (double delta : {0.1, 1.0, 1e6})
    for (double lambda : {1e-6, 1.0, 100.0}) {
      const auto fit = irwls_fit(g, s.orders[0], iota(5), 10, lambda, config_with(delta));
      for (double v : fit.fitted) CHECK(v == doctest::Approx(2.75).epsilon(1e-10));
    }
}

TEST_CASE("large delta matches penalized weighted least squares") {
  const Grid g = Grid::uniform(60);
  ScenarioConfig sc;
  sc.n = 12;
  sc.m = 60;
  sc.sampling = Sampling::Partial;
  sc.seed = 5;
  const auto data = simulate(sc).dataset;
  const auto s = raw_sample(data);
  const auto members = iota(12);  // group g1
  const auto cfg = config_with(1e6);
  const SplineSmoother sm(g, 20, cfg);
  const double lambda = 0.01;
  const auto fit = sm.fit(s.orders[0], members, lambda);

  const Eigen::MatrixXd B = sm.basis().dense();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(60), wx = Eigen::VectorXd::Zero(60);
  for (std::size_t i : members) {
    const auto& mk = s.orders[0].masks[i];
    double cnt = 0;
    for (auto v : mk) cnt += v;
    for (std::size_t j = 0; j < 60; ++j)
      if (mk[j]) {
        w(j) += 1.0 / cnt;
        wx(j) += s.orders[0].values[i][j] / cnt;
      }
  }
  const double lam = lambda * sm.lambda_scale(members.size());
  const Eigen::MatrixXd A = B.transpose() * w.asDiagonal() * B + 2 * lam * sm.penalty();
  const Eigen::VectorXd c = A.ldlt().solve(B.transpose() * wx);
  const Eigen::Map<const Eigen::VectorXd> got(fit.coefficients.data(), fit.coefficients.size());
  CHECK((got - c).norm() / c.norm() < 1e-6);

  // Grid evaluation is basis times coefficients.
  const Eigen::VectorXd ev = B * got;
  for (std::size_t j = 0; j < 60; ++j) CHECK(std::abs(ev(j) - fit.fitted[j]) < 1e-10);
  CHECK(fit.objective <= fit.initial_objective);
  CHECK(sm.objective(s.orders[0], members, lambda, got) == doctest::Approx(fit.objective).epsilon(1e-10));
}

TEST_CASE("one gross outlier") {
  const Grid g = Grid::uniform(100);
  auto clean = noisy_sines(g, 21, 0.3, 3);
  auto dirty = clean;
  for (double& v : dirty.values[20]) v += 1000;
  const auto members = iota(21);
  const auto clean_members = iota(20);
  for (double delta : {1.0, 1e12}) {
    const auto cfg = config_with(delta);
    const SplineSmoother sm(g, 20, cfg);
    const auto ref = sm.fit(clean, clean_members, 1e-3);
    const auto out = sm.fit(dirty, members, 1e-3);
    const double moved = sup_diff(ref.fitted, out.fitted);
    if (delta == 1.0)
      CHECK(moved < 0.15);
    else
      CHECK(moved > 1.0);
  }
}

TEST_CASE("influence of one curve is bounded") {
  const Grid g = Grid::uniform(60);
  const auto base = noisy_sines(g, 15, 0.5, 8);
  const SplineSmoother sm(g, 10, MEstimatorConfig{});
  const auto members = iota(15);
  const auto ref = sm.fit(base, members, 1e-2);
  std::vector<double> change;
  for (double shift : {1e2, 1e4, 1e6}) {
    auto x = base;
    for (double& v : x.values[4]) v += shift;
    change.push_back(sup_diff(ref.fitted, sm.fit(x, members, 1e-2).fitted));
  }
  CHECK(change[1] / change[0] < 1.1);
  CHECK(change[2] / change[1] < 1.1);
}

TEST_CASE("translation equivariance and duplicated curves") {
  const Grid g = Grid::uniform(50);
  const auto base = noisy_sines(g, 8, 1.0, 21);
  const SplineSmoother sm(g, 10, MEstimatorConfig{});
  const auto members = iota(8);
  const auto ref = sm.fit(base, members, 0.05);

  auto shifted = base;
  for (auto& row : shifted.values)
    for (double& v : row) v += 7.5;
  const auto fs = sm.fit(shifted, members, 0.05);
  for (std::size_t j = 0; j < 50; ++j) CHECK(fs.fitted[j] - ref.fitted[j] == doctest::Approx(7.5).epsilon(1e-8));

  auto doubled = base;
  for (std::size_t i = 0; i < 8; ++i) {
    doubled.values.push_back(base.values[i]);
    doubled.masks.push_back(base.masks[i]);
  }
  std::vector<std::size_t> both = iota(8);
  for (std::size_t i = 9; i < 17; ++i) both.push_back(i);  // row 8 is the other group
  CHECK(sup_diff(sm.fit(doubled, both, 0.05).fitted, ref.fitted) < 1e-8);

  OrderSample twins;
  twins.values = {base.values[2], base.values[2]};
  twins.masks = {base.masks[2], base.masks[2]};
  const std::vector<std::size_t> one{2};
  CHECK(sup_diff(sm.fit(twins, iota(2), 0.05).fitted, sm.fit(base, one, 0.05).fitted) < 1e-8);
}

TEST_CASE("rank-deficient design falls back to the lambda floor") {
  const Grid g = Grid::uniform(12);
  const auto d = make_dataset(g, {2, 1}, [](auto, auto i, double t) { return std::cos(4 * t) + 0.1 * double(i); });
  const auto s = raw_sample(d);
  const SplineSmoother sm(g, 40, MEstimatorConfig{});
  const auto fit = sm.fit(s.orders[0], iota(2), 0.0);
  CHECK(fit.lambda_effective > 0);
  for (double v : fit.fitted) CHECK(std::isfinite(v));
}

TEST_CASE("gcv on noiseless data") {
  const Grid g = Grid::uniform(100);
  const auto clean = noisy_sines(g, 10, 1e-300, 1);
  MEstimatorConfig cfg;
  const auto members = iota(10);
  const auto sel = select_lambda_gcv(g, clean, members, 20, cfg);
  const auto& grid = cfg.lambda_grid;
  CHECK(sel.lambda <= grid[grid.size() / 2]);
  const auto fit = irwls_fit(g, clean, members, 20, sel.lambda, cfg);
  std::vector<double> truth(100);
  for (std::size_t j = 0; j < 100; ++j) truth[j] = std::sin(2 * std::numbers::pi * g[j]);
  CHECK(sup_diff(fit.fitted, truth) < 1e-3);

  cfg.lambda_grid = {0.37};
  CHECK(select_lambda_gcv(g, clean, members, 20, cfg).lambda == 0.37);
}

TEST_CASE("gcv on pure noise prefers heavy smoothing") {
  const Grid g = Grid::uniform(50);
  MEstimatorConfig cfg;
  const auto& grid = cfg.lambda_grid;
  const double top_quartile = grid[grid.size() - grid.size() / 4];
  int smooth = 0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    Stream st(r, StreamTag::ErrorCurve, 99);
    std::normal_distribution<double> z;
    const auto d = make_dataset(g, {10, 1}, [&](auto, auto, double) { return 3.0 + z(st); });
    const auto s = raw_sample(d);
    smooth += select_lambda_gcv(g, s.orders[0], iota(10), 10, cfg).lambda >= top_quartile;
  }
  CHECK(smooth >= 180);
}

TEST_CASE("knot count by cross-validation") {
  const Grid g = Grid::uniform(100);
  MEstimatorConfig cfg;
  SUBCASE("constant data") {
    const auto d = make_dataset(g, {10, 1}, [](auto, auto, double) { return -1.0; });
    CHECK(select_knots_cv(g, raw_sample(d).orders[0], iota(10), cfg).knot_count == 10);
  }
  SUBCASE("single candidate") {
    cfg.knot_candidates = {20};
    const auto d = make_dataset(g, {6, 1}, [](auto, auto i, double t) { return t * double(i); });
    CHECK(select_knots_cv(g, raw_sample(d).orders[0], iota(6), cfg).knot_count == 20);
  }
  SUBCASE("ten-knot truth") {
    const SplineBasis truth_basis(g, uniform_interior_knots(0, 1, 10), 3);
    int hits = 0;
    for (std::uint64_t r = 0; r < 100; ++r) {
      Stream st(r, StreamTag::ErrorCurve, 7);
      std::normal_distribution<double> z;
      Eigen::VectorXd c(truth_basis.dim());
      for (auto& v : c) v = 2.0 * z(st);
      const auto mean = truth_basis.evaluate(c);
      const auto d = make_dataset(g, {20, 1}, [&](auto, auto, double t) {
        return mean[std::size_t(std::lround(t * 99))] + 0.5 * z(st);
      });
      const auto k = select_knots_cv(g, raw_sample(d).orders[0], iota(20), cfg).knot_count;
      hits += k == 10 || k == 20;
    }
    CHECK(hits >= 80);
  }
}

TEST_CASE("irwls never increases the objective") {
  CHECK(irwls_monotonicity_violations() == 0);
}
