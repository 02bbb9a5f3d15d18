#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdsel/datamodel.hpp"
#include "fdsel/rng.hpp"

namespace fdsel {

enum class Scenario { Gaussian, T3, CurveOutlier, LocalOutlier };
enum class Sampling { Full, Partial };

std::string to_string(Scenario s);
std::string to_string(Sampling s);
Scenario parse_scenario(const std::string& name);
Sampling parse_sampling(const std::string& name);

/// Shape of the synthetic location pair. mu1(t) = sin(2 pi t) + 2t and
/// mu2 = mu1 + s(t), where s vanishes identically on [a, c1] and rises through
/// a C2 quintic ramp of the given width.
struct LocationShape {
  std::string preset = "one-signed";  // or "cross-over"
  double c1 = 0.34;
  double amplitude = 4.0;
  double ramp_width = 0.1;
};

struct ScenarioConfig {
  std::size_t n = 50;  // curves per group
  std::size_t m = 100;
  double sigma_e = 1.0;
  double phi = 0.2;
  Scenario scenario = Scenario::Gaussian;
  Sampling sampling = Sampling::Full;
  double d = 1.2;
  double f = 0.3;
  double p = 0.5;
  double outlier_fraction = 0.05;
  bool outliers_per_group = false;
  LocationShape shape;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruth {
  std::vector<double> grid;
  std::vector<double> mu1;
  std::vector<double> mu2;
  std::vector<std::size_t> equal_set;
  std::vector<std::size_t> separable_set;  // A
  LocationShape shape;
};

/// Throws UnknownPreset for names other than "one-signed" / "cross-over".
GroundTruth make_location_pair(const Grid& grid, const LocationShape& shape);

/// sigma_e^2 exp(-d / phi).
double exp_covariance(double distance, double sigma_e, double phi);

/// Draws zero-mean Gaussian curves with Gram matrix exp_covariance(|t_i - t_j|)
/// from a Cholesky factor computed once.
class GaussianProcessSampler {
 public:
  GaussianProcessSampler(const Grid& grid, double sigma_e, double phi);

  std::vector<double> draw(Stream& stream) const;
  const Eigen::MatrixXd& factor() const noexcept { return chol_; }
  bool jittered() const noexcept { return jittered_; }

 private:
  Eigen::MatrixXd chol_;
  bool jittered_ = false;
};

using CurveValues = std::vector<std::vector<double>>;

/// Curve i uses substream (seed, ErrorCurve, i).
CurveValues sample_gaussian_errors(const Grid& grid, std::size_t count, double sigma_e,
                                   double phi, std::uint64_t seed);

/// Z * sqrt(3 / W) with Z Gaussian and W ~ chi^2_3 per curve. `fixed_chi2`
/// replaces W (debug hook; W = 3 reproduces the Gaussian draw).
CurveValues sample_t3_errors(const Grid& grid, std::size_t count, double sigma_e, double phi,
                             std::uint64_t seed, std::optional<double> fixed_chi2 = {});

/// ceil(fraction * N) with a guard against representation error (0.05 * 100).
std::size_t contaminated_count(double fraction, std::size_t total);

struct CurveOutlierResult {
  CurveValues curves;
  std::vector<std::size_t> shifted;  // curve indices
  std::vector<double> shifts;
};

/// Adds one constant t3 shift with variance 3 sigma_e^2 to ceil(fraction * n)
/// curves. With `labels`, the count is taken per group instead of pooled.
CurveOutlierResult apply_curve_outliers(CurveValues curves, double fraction, double sigma_e,
                                        std::uint64_t seed,
                                        const std::vector<std::size_t>* labels = nullptr);

struct LocalOutlierResult {
  CurveValues curves;
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (curve, grid index)
};

/// Adds t3 noise with variance 2 sigma_e^2 to a fraction of all (curve, point)
/// cells sampled without replacement.
LocalOutlierResult apply_local_outliers(CurveValues curves, double fraction, double sigma_e,
                                        std::uint64_t seed);

struct PartialSamplingResult {
  std::vector<Mask> masks;
  std::vector<std::uint8_t> drew_interval;   // B_i
  std::vector<double> removed_fraction;      // per curve, over the grid
};

/// Kraus-style missing interval M = [C - E, C + E] ∩ [0, 1], C = d U1, E = f U2,
/// applied with probability p. Masks never depend on curve values.
PartialSamplingResult apply_partial_sampling(const Grid& grid, std::size_t count, double d,
                                             double f, double p, std::uint64_t seed);

struct SimulatedData {
  GroupedDataset dataset;
  GroundTruth truth;
};

/// Two groups "g1" / "g2" of `n` curves each on a uniform grid over [0, 1].
SimulatedData simulate(const ScenarioConfig& config);

}  // namespace fdsel
