#include "fdsel/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fdsel/error.hpp"

namespace fdsel {

namespace {

// C2 ramp: 0 for x <= 0, 1 for x >= 1.
double quintic_ramp(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

// Partial Fisher-Yates: the first `count` entries of a random permutation of [0, total).
std::vector<std::size_t> sample_without_replacement(std::size_t total, std::size_t count,
                                                    Stream& stream) {
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  count = std::min(count, total);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(idx[i], idx[pick(stream)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Gaussian: return "gaussian";
    case Scenario::T3: return "t3";
    case Scenario::CurveOutlier: return "curve_outlier";
    case Scenario::LocalOutlier: return "local_outlier";
  }
  return "gaussian";
}

std::string to_string(Sampling s) { return s == Sampling::Full ? "full" : "partial"; }

Scenario parse_scenario(const std::string& name) {
  if (name == "gaussian") return Scenario::Gaussian;
  if (name == "t3") return Scenario::T3;
  if (name == "curve_outlier") return Scenario::CurveOutlier;
  if (name == "local_outlier") return Scenario::LocalOutlier;
  fail(ErrorCode::InvalidConfig, "unknown scenario '" + name + "'");
}

Sampling parse_sampling(const std::string& name) {
  if (name == "full") return Sampling::Full;
  if (name == "partial") return Sampling::Partial;
  fail(ErrorCode::InvalidConfig, "unknown sampling scheme '" + name + "'");
}

void ScenarioConfig::validate() const {
  if (n < 1) fail(ErrorCode::InvalidConfig, "n must be positive");
  if (m < 3) fail(ErrorCode::InvalidConfig, "m must be at least 3");
  if (!(sigma_e > 0)) fail(ErrorCode::InvalidConfig, "sigma_e must be positive");
  if (!(phi > 0)) fail(ErrorCode::InvalidConfig, "phi must be positive");
  if (!(outlier_fraction >= 0 && outlier_fraction <= 1))
    fail(ErrorCode::InvalidConfig, "outlier fraction must lie in [0, 1]");
  if (!(d >= 0) || !(f >= 0)) fail(ErrorCode::InvalidConfig, "d and f must be nonnegative");
  if (!(p >= 0 && p <= 1)) fail(ErrorCode::InvalidConfig, "p must lie in [0, 1]");
  if (!(shape.c1 > 0 && shape.c1 <= 1))
    fail(ErrorCode::InvalidConfig, "c1 must lie in (0, 1]");
  if (!(shape.ramp_width > 0)) fail(ErrorCode::InvalidConfig, "ramp width must be positive");
}

GroundTruth make_location_pair(const Grid& grid, const LocationShape& shape) {
  const bool crossover = shape.preset == "cross-over";
  if (!crossover && shape.preset != "one-signed")
    fail(ErrorCode::UnknownPreset, "'" + shape.preset + "'");

  const double c1 = shape.c1;
  const double b = grid.b();
  // Sign change halfway through the separable region.
  const double t_cross = c1 + 0.5 * (b - c1);

  GroundTruth truth;
  truth.shape = shape;
  truth.grid = grid.points();
  const std::size_t m = grid.size();
  truth.mu1.resize(m);
  truth.mu2.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double t = grid[j];
    const double base = std::sin(2.0 * std::numbers::pi * t) + 2.0 * t;
    double s = shape.amplitude * quintic_ramp((t - c1) / shape.ramp_width);
    if (crossover && s != 0.0) s *= (t - t_cross) / (b - t_cross);
    truth.mu1[j] = base;
    truth.mu2[j] = base + s;
    if (truth.mu1[j] == truth.mu2[j])
      truth.equal_set.push_back(j);
    else
      truth.separable_set.push_back(j);
  }
  return truth;
}

double exp_covariance(double distance, double sigma_e, double phi) {
  return sigma_e * sigma_e * std::exp(-distance / phi);
}

GaussianProcessSampler::GaussianProcessSampler(const Grid& grid, double sigma_e, double phi) {
  const std::size_t m = grid.size();
  Eigen::MatrixXd gram(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      gram(i, j) = exp_covariance(std::abs(grid[i] - grid[j]), sigma_e, phi);
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    gram.diagonal().array() += 1e-10;
    llt.compute(gram);
    jittered_ = true;
    if (llt.info() != Eigen::Success)
      fail(ErrorCode::FactorizationFailure, "covariance matrix is not positive definite");
  }
  chol_ = llt.matrixL();
}

std::vector<double> GaussianProcessSampler::draw(Stream& stream) const {
  const auto m = chol_.rows();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z(i) = normal(stream);
  Eigen::VectorXd e = chol_.triangularView<Eigen::Lower>() * z;
  return {e.data(), e.data() + m};
}

CurveValues sample_gaussian_errors(const Grid& grid, std::size_t count, double sigma_e,
                                   double phi, std::uint64_t seed) {
  GaussianProcessSampler sampler(grid, sigma_e, phi);
  CurveValues out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Stream stream(seed, StreamTag::ErrorCurve, i);
    out[i] = sampler.draw(stream);
  }
  return out;
}

CurveValues sample_t3_errors(const Grid& grid, std::size_t count, double sigma_e, double phi,
                             std::uint64_t seed, std::optional<double> fixed_chi2) {
  CurveValues out = sample_gaussian_errors(grid, count, sigma_e, phi, seed);
  for (std::size_t i = 0; i < count; ++i) {
    double w = 0.0;
    if (fixed_chi2) {
      w = *fixed_chi2;
    } else {
      Stream stream(seed, StreamTag::ChiSquare, i);
      std::chi_squared_distribution<double> chi2(3.0);
      w = chi2(stream);
    }
    const double scale = std::sqrt(3.0 / w);
    for (double& v : out[i]) v *= scale;
  }
  return out;
}

std::size_t contaminated_count(double fraction, std::size_t total) {
  const double x = fraction * double(total);
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

CurveOutlierResult apply_curve_outliers(CurveValues curves, double fraction, double sigma_e,
                                        std::uint64_t seed,
                                        const std::vector<std::size_t>* labels) {
  CurveOutlierResult result;
  Stream stream(seed, StreamTag::CurveOutlier, 0);
  std::vector<std::size_t> chosen;
  if (labels == nullptr) {
    chosen = sample_without_replacement(curves.size(), contaminated_count(fraction, curves.size()),
                                        stream);
  } else {
    const std::size_t k = labels->empty() ? 0 : *std::max_element(labels->begin(), labels->end()) + 1;
    for (std::size_t g = 0; g < k; ++g) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < labels->size(); ++i)
        if ((*labels)[i] == g) members.push_back(i);
      for (std::size_t pos : sample_without_replacement(
               members.size(), contaminated_count(fraction, members.size()), stream))
        chosen.push_back(members[pos]);
    }
    std::sort(chosen.begin(), chosen.end());
  }
  // Var(t3) = 3, so scaling by sigma_e gives variance 3 sigma_e^2.
  std::student_t_distribution<double> t3(3.0);
  for (std::size_t i : chosen) {
    const double shift = sigma_e * t3(stream);
    for (double& v : curves[i]) v += shift;
    result.shifted.push_back(i);
    result.shifts.push_back(shift);
  }
  result.curves = std::move(curves);
  return result;
}

LocalOutlierResult apply_local_outliers(CurveValues curves, double fraction, double sigma_e,
                                        std::uint64_t seed) {
  LocalOutlierResult result;
  if (curves.empty()) return result;
  const std::size_t m = curves.front().size();
  const std::size_t total = curves.size() * m;
  Stream stream(seed, StreamTag::LocalOutlier, 0);
  const auto chosen = sample_without_replacement(total, contaminated_count(fraction, total), stream);
  std::student_t_distribution<double> t3(3.0);
  const double scale = std::sqrt(2.0 * sigma_e * sigma_e / 3.0);
  for (std::size_t cell : chosen) {
    const std::size_t i = cell / m;
    const std::size_t j = cell % m;
    curves[i][j] += scale * t3(stream);
    result.cells.emplace_back(i, j);
  }
  result.curves = std::move(curves);
  return result;
}

PartialSamplingResult apply_partial_sampling(const Grid& grid, std::size_t count, double d,
                                             double f, double p, std::uint64_t seed) {
  const std::size_t m = grid.size();
  PartialSamplingResult result;
  result.masks.assign(count, Mask(m, 1));
  result.drew_interval.assign(count, 0);
  result.removed_fraction.assign(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    Stream stream(seed, StreamTag::Mask, i);
    if (!(stream.uniform() < p)) continue;
    result.drew_interval[i] = 1;
    for (;;) {
      const double centre = d * stream.uniform();
      const double half = f * stream.uniform();
      const double lo = std::max(centre - half, 0.0);
      const double hi = std::min(centre + half, 1.0);
      Mask mask(m, 1);
      std::size_t removed = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if (grid[j] >= lo && grid[j] <= hi) {
          mask[j] = 0;
          ++removed;
        }
      }
      if (removed == m) continue;
      result.masks[i] = std::move(mask);
      result.removed_fraction[i] = double(removed) / double(m);
      break;
    }
  }
  return result;
}

SimulatedData simulate(const ScenarioConfig& config) {
  config.validate();
  const Grid grid = Grid::uniform(config.m, 0.0, 1.0);
  GroundTruth truth = make_location_pair(grid, config.shape);

  const std::size_t total = 2 * config.n;
  std::vector<std::size_t> labels(total);
  for (std::size_t i = 0; i < total; ++i) labels[i] = i / config.n;

  CurveValues errors;
  switch (config.scenario) {
    case Scenario::Gaussian:
      errors = sample_gaussian_errors(grid, total, config.sigma_e, config.phi, config.seed);
      break;
    case Scenario::T3:
      errors = sample_t3_errors(grid, total, config.sigma_e, config.phi, config.seed);
      break;
    case Scenario::CurveOutlier:
      errors = apply_curve_outliers(
                   sample_gaussian_errors(grid, total, config.sigma_e, config.phi, config.seed),
                   config.outlier_fraction, config.sigma_e, config.seed,
                   config.outliers_per_group ? &labels : nullptr)
                   .curves;
      break;
    case Scenario::LocalOutlier:
      errors = apply_local_outliers(
                   sample_gaussian_errors(grid, total, config.sigma_e, config.phi, config.seed),
                   config.outlier_fraction, config.sigma_e, config.seed)
                   .curves;
      break;
  }

  std::vector<Mask> masks(total, Mask(config.m, 1));
  if (config.sampling == Sampling::Partial)
    masks = apply_partial_sampling(grid, total, config.d, config.f, config.p, config.seed).masks;

  std::vector<GriddedCurve> curves(total);
  for (std::size_t i = 0; i < total; ++i) {
    const auto& mu = labels[i] == 0 ? truth.mu1 : truth.mu2;
    auto& c = curves[i];
    c.values.resize(config.m);
    c.mask = std::move(masks[i]);
    for (std::size_t j = 0; j < config.m; ++j)
      c.values[j] = c.mask[j] ? mu[j] + errors[i][j] : std::numeric_limits<double>::quiet_NaN();
    c.group_id = labels[i] == 0 ? "g1" : "g2";
    c.curve_id = c.group_id + "_" + std::to_string(i % config.n + 1);
  }
  return {GroupedDataset(grid, std::move(curves)), std::move(truth)};
}

}  // namespace fdsel
