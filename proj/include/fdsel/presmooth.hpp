#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdsel/datamodel.hpp"

namespace fdsel {

/// Values of every curve at one derivative order. Entries with mask 0 are
/// undefined (unobserved, or inside a run too short for this order).
struct OrderSample {
  std::vector<std::vector<double>> values;  // [curve][j]
  std::vector<Mask> masks;                  // [curve][j]
};

struct SmoothedSample {
  Grid grid;
  std::vector<std::string> groups;
  std::vector<std::size_t> labels;
  std::vector<std::string> curve_ids;
  std::vector<OrderSample> orders;  // orders[l], l = 0..L
  std::vector<double> bandwidths;   // order-0 bandwidth per curve
  std::vector<int> degrees;         // polynomial degree per order
  std::vector<std::string> warnings;

  std::size_t max_order() const { return orders.size() - 1; }
  std::size_t n() const { return labels.size(); }
};

/// Epanechnikov kernel on [-1, 1].
inline double epanechnikov(double u) { return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0; }

/// 12 log-spaced candidates on [2 * spacing, 0.25 * |T|].
std::vector<double> bandwidth_candidates(const Grid& grid, std::size_t count = 12);

/// Local polynomial estimate of the `order`-th derivative at grid index
/// `target`, using only points of the observed run [run.begin, run.end).
/// `skip` excludes one index (leave-one-out). Returns nullopt when fewer than
/// degree + 1 points carry positive weight or the local system is singular.
std::optional<double> local_estimate(const Grid& grid, std::span<const double> values, Run run,
                                     std::size_t target, double bandwidth, int degree, int order,
                                     std::optional<std::size_t> skip = {});

/// As local_estimate, doubling the bandwidth up to three times before giving up
/// with SingularLocalFit.
double local_estimate_widening(const Grid& grid, std::span<const double> values, Run run,
                               std::size_t target, double bandwidth, int degree, int order,
                               std::optional<std::size_t> skip = {});

struct SmoothedCurve {
  std::vector<double> values;
  Mask mask;
};

/// ℓ! times the ℓ-th local coefficient at every observed point whose run holds
/// at least degree + 2 points; other entries are masked out. Weights never
/// cross a missing segment. Requires degree >= order + 1 and bandwidth > 0.
SmoothedCurve local_poly(const Grid& grid, std::span<const double> values, const Mask& mask,
                         double bandwidth, int degree, int order);

struct BandwidthChoice {
  double bandwidth = 0.0;
  std::vector<double> candidates;
  std::vector<double> cv_error;  // mean squared leave-one-out error, +inf if infeasible
  std::optional<std::string> warning;
};

/// Leave-one-point-out cross-validation over `candidates` (defaults to
/// bandwidth_candidates). Throws TooFewPoints with fewer than degree + 2
/// observations in usable runs.
BandwidthChoice select_bandwidth(const Grid& grid, std::span<const double> values,
                                 const Mask& mask, int degree,
                                 std::vector<double> candidates = {});

struct PresmoothOptions {
  std::size_t max_order = 1;  // L
  std::size_t candidate_count = 12;
  double derivative_inflation = 1.5;
  bool global_bandwidth = false;
  unsigned threads = 0;
};

/// Smooths every curve of a validated dataset at orders 0..L with degree l + 1
/// and bandwidth h0 * inflation^l, where h0 is the curve's CV bandwidth.
SmoothedSample presmooth(const GroupedDataset& dataset, const PresmoothOptions& options = {});

}  // namespace fdsel
