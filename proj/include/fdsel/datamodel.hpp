#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fdsel {

using Mask = std::vector<std::uint8_t>;

/// Strictly increasing evaluation points t_1 < ... < t_m inside the domain [a, b].
class Grid {
 public:
  explicit Grid(std::vector<double> points);
  Grid(std::vector<double> points, double a, double b);

  static Grid uniform(std::size_t m, double a = 0.0, double b = 1.0);

  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t j) const { return points_[j]; }
  const std::vector<double>& points() const noexcept { return points_; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double length() const noexcept { return b_ - a_; }

  /// t_{j+1} - t_j.
  double spacing(std::size_t j) const { return points_[j + 1] - points_[j]; }
  double mean_spacing() const { return (points_.back() - points_.front()) / double(size() - 1); }

  /// Boundaries of the cell owned by point j: midpoints to the neighbours,
  /// clipped to [a, b]. Cell lengths are the trapezoidal quadrature weights
  /// when a = t_1 and b = t_m.
  double cell_lower(std::size_t j) const;
  double cell_upper(std::size_t j) const;
  const std::vector<double>& cell_weights() const noexcept { return weights_; }

  bool operator==(const Grid& other) const {
    return points_ == other.points_ && a_ == other.a_ && b_ == other.b_;
  }

 private:
  std::vector<double> points_;
  double a_;
  double b_;
  std::vector<double> weights_;
};

struct Run {
  std::size_t begin;  // first observed index
  std::size_t end;    // one past the last observed index
  std::size_t size() const { return end - begin; }
};

/// Maximal contiguous runs of true entries.
std::vector<Run> observed_runs(const Mask& mask);

struct GriddedCurve {
  std::vector<double> values;  // entries with mask == 0 are never read
  Mask mask;
  std::string curve_id;
  std::string group_id;

  std::size_t observed_count() const;
};

struct ValidationOptions {
  bool allow_scattered_masks = false;
  double low_coverage_threshold = 0.2;
};

class GroupedDataset {
 public:
  GroupedDataset(Grid grid, std::vector<GriddedCurve> curves);

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<GriddedCurve>& curves() const noexcept { return curves_; }
  std::size_t n() const noexcept { return curves_.size(); }
  std::size_t m() const noexcept { return grid_.size(); }

  /// Group ids in order of first appearance.
  const std::vector<std::string>& groups() const noexcept { return groups_; }
  std::size_t k() const noexcept { return groups_.size(); }
  /// Group index of each curve.
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }
  std::vector<std::size_t> group_sizes() const;

  // Metadata attached by validate_dataset.
  bool validated() const noexcept { return validated_; }
  const std::vector<double>& coverage() const noexcept { return coverage_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  friend GroupedDataset validate_dataset(const GroupedDataset& raw,
                                         const ValidationOptions& options);

 private:
  Grid grid_;
  std::vector<GriddedCurve> curves_;
  std::vector<std::string> groups_;
  std::vector<std::size_t> labels_;
  bool validated_ = false;
  std::vector<double> coverage_;
  std::vector<std::string> warnings_;
};

/// Checks every ingestion invariant and attaches the coverage fraction
/// b(t_j) = (1/n) sum_i delta_i(t_j). Throws EmptyGroup, UncoveredGridPoint,
/// NonFiniteValue or InvalidMask.
GroupedDataset validate_dataset(const GroupedDataset& raw,
                                const ValidationOptions& options = {});

/// A circular arc of grid indices [start, start + length) mod m. Arcs that wrap
/// past the last index are complements of ordinary windows.
struct Arc {
  std::size_t start;
  std::size_t length;

  bool contains(std::size_t j, std::size_t m) const {
    const std::size_t offset = (j + m - start) % m;
    return offset < length;
  }
  bool wraps(std::size_t m) const { return start + length > m; }
  bool operator==(const Arc&) const = default;
};

class IntervalSet {
 public:
  explicit IntervalSet(std::size_t m, std::vector<Arc> arcs)
      : m_(m), arcs_(std::move(arcs)) {}

  std::size_t m() const noexcept { return m_; }
  std::size_t size() const noexcept { return arcs_.size(); }
  const std::vector<Arc>& arcs() const noexcept { return arcs_; }
  const Arc& operator[](std::size_t i) const { return arcs_[i]; }

 private:
  std::size_t m_;
  std::vector<Arc> arcs_;
};

/// All m(m-1)+1 arcs: every (start, length) with length < m, plus the full domain
/// as the final entry.
IntervalSet enumerate_arcs(std::size_t m);

}  // namespace fdsel
