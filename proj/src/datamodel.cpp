#include "fdsel/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "fdsel/error.hpp"

namespace fdsel {

namespace {

void check_points(const std::vector<double>& points, double a, double b) {
  if (points.size() < 3) fail(ErrorCode::InvalidGrid, "grid needs at least 3 points");
  for (double t : points) {
    if (!std::isfinite(t)) fail(ErrorCode::InvalidGrid, "grid point is not finite");
  }
  for (std::size_t j = 1; j < points.size(); ++j) {
    if (!(points[j] > points[j - 1]))
      fail(ErrorCode::InvalidGrid, "grid points must be strictly increasing");
  }
  if (!(a <= points.front()) || !(points.back() <= b))
    fail(ErrorCode::InvalidGrid, "grid points must lie inside [a, b]");
}

}  // namespace

Grid::Grid(std::vector<double> points)
    : Grid(points, points.empty() ? 0.0 : points.front(),
           points.empty() ? 0.0 : points.back()) {}

Grid::Grid(std::vector<double> points, double a, double b)
    : points_(std::move(points)), a_(a), b_(b) {
  check_points(points_, a_, b_);
  weights_.resize(points_.size());
  for (std::size_t j = 0; j < points_.size(); ++j)
    weights_[j] = cell_upper(j) - cell_lower(j);
}

Grid Grid::uniform(std::size_t m, double a, double b) {
  if (m < 3) fail(ErrorCode::InvalidGrid, "grid needs at least 3 points");
  std::vector<double> pts(m);
  for (std::size_t j = 0; j < m; ++j)
    pts[j] = a + (b - a) * double(j) / double(m - 1);
  pts.back() = b;
  return Grid(std::move(pts), a, b);
}

double Grid::cell_lower(std::size_t j) const {
  return j == 0 ? a_ : 0.5 * (points_[j - 1] + points_[j]);
}

double Grid::cell_upper(std::size_t j) const {
  return j + 1 == points_.size() ? b_ : 0.5 * (points_[j] + points_[j + 1]);
}

std::vector<Run> observed_runs(const Mask& mask) {
  std::vector<Run> runs;
  std::size_t j = 0;
  while (j < mask.size()) {
    if (!mask[j]) {
      ++j;
      continue;
    }
    std::size_t end = j;
    while (end < mask.size() && mask[end]) ++end;
    runs.push_back({j, end});
    j = end;
  }
  return runs;
}

std::size_t GriddedCurve::observed_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

GroupedDataset::GroupedDataset(Grid grid, std::vector<GriddedCurve> curves)
    : grid_(std::move(grid)), curves_(std::move(curves)) {
  std::unordered_map<std::string, std::size_t> index;
  labels_.reserve(curves_.size());
  for (const auto& c : curves_) {
    auto [it, inserted] = index.emplace(c.group_id, groups_.size());
    if (inserted) groups_.push_back(c.group_id);
    labels_.push_back(it->second);
  }
}

std::vector<std::size_t> GroupedDataset::group_sizes() const {
  std::vector<std::size_t> sizes(groups_.size(), 0);
  for (std::size_t g : labels_) ++sizes[g];
  return sizes;
}

GroupedDataset validate_dataset(const GroupedDataset& raw, const ValidationOptions& options) {
  const std::size_t m = raw.m();
  if (raw.k() < 2) fail(ErrorCode::EmptyGroup, "at least two nonempty groups are required");
  for (std::size_t s : raw.group_sizes()) {
    if (s == 0) fail(ErrorCode::EmptyGroup, "group without curves");
  }

  std::vector<double> coverage(m, 0.0);
  for (const auto& c : raw.curves()) {
    if (c.values.size() != m || c.mask.size() != m)
      fail(ErrorCode::InvalidMask, "curve '" + c.curve_id + "' does not match the grid length");
    std::size_t observed = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!c.mask[j]) continue;
      if (!std::isfinite(c.values[j]))
        fail(ErrorCode::NonFiniteValue,
             "curve '" + c.curve_id + "' has a non-finite observed value at t=" +
                 std::to_string(raw.grid()[j]));
      coverage[j] += 1.0;
      ++observed;
    }
    if (observed == 0) fail(ErrorCode::InvalidMask, "curve '" + c.curve_id + "' has no observed points");
    if (!options.allow_scattered_masks) {
      // An isolated observed point strictly inside the grid cannot come from
      // removing missing segments; treat it as scatter.
      for (const Run& r : observed_runs(c.mask)) {
        if (r.size() == 1 && r.begin > 0 && r.end < m)
          fail(ErrorCode::InvalidMask, "curve '" + c.curve_id +
                                           "' has scattered (non-segment) observations");
      }
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (coverage[j] == 0.0)
      fail(ErrorCode::UncoveredGridPoint,
           "no curve observes t=" + std::to_string(raw.grid()[j]));
    coverage[j] /= double(raw.n());
  }

  GroupedDataset out = raw;
  out.validated_ = true;
  out.coverage_ = std::move(coverage);
  out.warnings_.clear();
  const double min_cov = *std::min_element(out.coverage_.begin(), out.coverage_.end());
  if (min_cov < options.low_coverage_threshold) {
    out.warnings_.push_back("low coverage: minimum observed fraction " + std::to_string(min_cov) +
                            " is below " + std::to_string(options.low_coverage_threshold));
  }
  return out;
}

IntervalSet enumerate_arcs(std::size_t m) {
  if (m < 3) fail(ErrorCode::InvalidGrid, "arcs need m >= 3");
  std::vector<Arc> arcs;
  arcs.reserve(m * (m - 1) + 1);
  for (std::size_t len = 1; len < m; ++len)
    for (std::size_t s = 0; s < m; ++s) arcs.push_back({s, len});
  arcs.push_back({0, m});
  return IntervalSet(m, std::move(arcs));
}

}  // namespace fdsel
