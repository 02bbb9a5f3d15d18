#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fdsel/datamodel.hpp"
#include "fdsel/presmooth.hpp"

namespace testutil {

using fdsel::Grid;
using fdsel::GriddedCurve;
using fdsel::GroupedDataset;

inline GriddedCurve curve(std::vector<double> values, std::string id, std::string group) {
  GriddedCurve c;
  c.mask.assign(values.size(), 1);
  c.values = std::move(values);
  c.curve_id = std::move(id);
  c.group_id = std::move(group);
  return c;
}

// Group g gets sizes[g] curves, curve i of group g = f(g, i, t).
inline GroupedDataset make_dataset(const Grid& grid, const std::vector<std::size_t>& sizes,
                                   const std::function<double(std::size_t, std::size_t, double)>& f) {
  std::vector<GriddedCurve> curves;
  for (std::size_t g = 0; g < sizes.size(); ++g)
    for (std::size_t i = 0; i < sizes[g]; ++i) {
      std::vector<double> v(grid.size());
      for (std::size_t j = 0; j < grid.size(); ++j) v[j] = f(g, i, grid[j]);
      curves.push_back(curve(std::move(v), "c" + std::to_string(g) + "_" + std::to_string(i),
                             "g" + std::to_string(g)));
    }
  return GroupedDataset(grid, std::move(curves));
}

// One-order sample built straight from a dataset (no smoothing).
inline fdsel::SmoothedSample raw_sample(const GroupedDataset& d) {
  fdsel::SmoothedSample s{d.grid(), d.groups(), d.labels(), {}, {}, {}, {}, {}};
  fdsel::OrderSample o;
  for (const auto& c : d.curves()) {
    s.curve_ids.push_back(c.curve_id);
    o.values.push_back(c.values);
    o.masks.push_back(c.mask);
  }
  s.orders.push_back(std::move(o));
  s.bandwidths.assign(d.n(), 0.0);
  s.degrees = {1};
  return s;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace testutil
