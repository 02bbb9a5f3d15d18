#include "fdsel/presmooth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "fdsel/error.hpp"
#include "fdsel/parallel.hpp"

namespace fdsel {

namespace {

constexpr int kMaxDegree = 5;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDegree + 1,
                                  kMaxDegree + 1>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDegree + 1, 1>;

double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

// Usable runs for a given degree: at least degree + 2 points.
std::vector<Run> usable_runs(const Mask& mask, int degree) {
  std::vector<Run> runs;
  for (const Run& r : observed_runs(mask))
    if (r.size() >= std::size_t(degree) + 2) runs.push_back(r);
  return runs;
}

}  // namespace

std::vector<double> bandwidth_candidates(const Grid& grid, std::size_t count) {
  const double lo = 2.0 * grid.mean_spacing();
  const double hi = std::max(lo, 0.25 * grid.length());
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : double(i) / double(count - 1);
    out[i] = lo * std::pow(hi / lo, frac);
  }
  return out;
}

std::optional<double> local_estimate(const Grid& grid, std::span<const double> values, Run run,
                                     std::size_t target, double bandwidth, int degree, int order,
                                     std::optional<std::size_t> skip) {
  if (degree > kMaxDegree || order > degree)
    fail(ErrorCode::InvalidConfig, "unsupported local polynomial degree");
  const auto& t = grid.points();
  const double t0 = t[target];
  const auto first = std::lower_bound(t.begin() + run.begin, t.begin() + run.end, t0 - bandwidth);
  const auto last = std::upper_bound(first, t.begin() + run.end, t0 + bandwidth);

  const int p = degree + 1;
  SmallMatrix gram = SmallMatrix::Zero(p, p);
  SmallVector rhs = SmallVector::Zero(p);
  SmallVector basis(p);
  int support = 0;
  for (auto it = first; it != last; ++it) {
    const auto j = static_cast<std::size_t>(it - t.begin());
    if (skip && *skip == j) continue;
    const double u = (t[j] - t0) / bandwidth;
    const double w = epanechnikov(u);
    if (w <= 0.0) continue;
    ++support;
    basis(0) = 1.0;
    for (int q = 1; q < p; ++q) basis(q) = basis(q - 1) * u;
    gram.noalias() += w * basis * basis.transpose();
    rhs.noalias() += (w * values[j]) * basis;
  }
  if (support < p) return std::nullopt;
  Eigen::FullPivLU<SmallMatrix> lu(gram);
  lu.setThreshold(1e-12);
  if (lu.rank() < p) return std::nullopt;
  const SmallVector coef = lu.solve(rhs);
  return factorial(order) * coef(order) / std::pow(bandwidth, order);
}

double local_estimate_widening(const Grid& grid, std::span<const double> values, Run run,
                               std::size_t target, double bandwidth, int degree, int order,
                               std::optional<std::size_t> skip) {
  double h = bandwidth;
  for (int attempt = 0; attempt <= 3; ++attempt, h *= 2.0) {
    if (auto est = local_estimate(grid, values, run, target, h, degree, order, skip)) return *est;
  }
  fail(ErrorCode::SingularLocalFit,
       "local fit at t=" + std::to_string(grid[target]) + " stays singular after widening");
}

SmoothedCurve local_poly(const Grid& grid, std::span<const double> values, const Mask& mask,
                         double bandwidth, int degree, int order) {
  if (degree < order + 1) fail(ErrorCode::InvalidConfig, "degree must be at least order + 1");
  if (!(bandwidth > 0)) fail(ErrorCode::InvalidConfig, "bandwidth must be positive");
  const std::size_t m = grid.size();
  SmoothedCurve out{std::vector<double>(m, std::numeric_limits<double>::quiet_NaN()), Mask(m, 0)};
  for (const Run& run : usable_runs(mask, degree)) {
    for (std::size_t j = run.begin; j < run.end; ++j) {
      out.values[j] = local_estimate_widening(grid, values, run, j, bandwidth, degree, order);
      out.mask[j] = 1;
    }
  }
  return out;
}

BandwidthChoice select_bandwidth(const Grid& grid, std::span<const double> values,
                                 const Mask& mask, int degree, std::vector<double> candidates) {
  BandwidthChoice choice;
  choice.candidates = candidates.empty() ? bandwidth_candidates(grid) : std::move(candidates);
  const auto runs = usable_runs(mask, degree);
  std::size_t points = 0;
  for (const Run& r : runs) points += r.size();
  if (points < std::size_t(degree) + 2)
    fail(ErrorCode::TooFewPoints, "bandwidth selection needs at least degree + 2 points in a run");

  const double inf = std::numeric_limits<double>::infinity();
  choice.cv_error.assign(choice.candidates.size(), inf);
  for (std::size_t c = 0; c < choice.candidates.size(); ++c) {
    const double h = choice.candidates[c];
    double sse = 0.0;
    bool feasible = true;
    for (const Run& run : runs) {
      for (std::size_t j = run.begin; j < run.end && feasible; ++j) {
        try {
          const double pred = local_estimate_widening(grid, values, run, j, h, degree, 0, j);
          sse += (values[j] - pred) * (values[j] - pred);
        } catch (const Error&) {
          feasible = false;
        }
      }
    }
    if (feasible) choice.cv_error[c] = sse / double(points);
  }

  std::size_t best = choice.candidates.size();
  if (points == std::size_t(degree) + 2) {
    for (std::size_t c = 0; c < choice.candidates.size(); ++c) {
      if (std::isfinite(choice.cv_error[c])) {
        best = c;
        break;
      }
    }
    choice.warning = "only " + std::to_string(points) +
                     " usable points; cross-validation skipped, smallest feasible bandwidth used";
  } else {
    for (std::size_t c = 0; c < choice.candidates.size(); ++c) {
      if (!std::isfinite(choice.cv_error[c])) continue;
      if (best == choice.candidates.size() || choice.cv_error[c] < choice.cv_error[best]) best = c;
    }
  }
  if (best == choice.candidates.size())
    fail(ErrorCode::SingularLocalFit, "no feasible bandwidth candidate");
  choice.bandwidth = choice.candidates[best];
  return choice;
}

SmoothedSample presmooth(const GroupedDataset& dataset, const PresmoothOptions& options) {
  const Grid& grid = dataset.grid();
  const std::size_t n = dataset.n();
  const std::size_t m = grid.size();
  const std::size_t orders = options.max_order + 1;
  if (options.max_order + 1 > std::size_t(kMaxDegree))
    fail(ErrorCode::InvalidConfig, "derivative order too large");

  SmoothedSample out{grid, dataset.groups(), dataset.labels(), {}, {}, {}, {}, {}};
  for (const auto& c : dataset.curves()) out.curve_ids.push_back(c.curve_id);
  for (std::size_t l = 0; l < orders; ++l) out.degrees.push_back(int(l) + 1);

  const auto candidates = bandwidth_candidates(grid, options.candidate_count);
  std::vector<std::optional<BandwidthChoice>> choices(n);
  std::vector<std::string> curve_warning(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    const auto& c = dataset.curves()[i];
    try {
      choices[i] = select_bandwidth(grid, c.values, c.mask, 1, candidates);
      if (choices[i]->warning) curve_warning[i] = c.curve_id + ": " + *choices[i]->warning;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewPoints) throw;
      curve_warning[i] = c.curve_id + ": too few observed points to smooth; curve dropped";
    }
  });

  out.bandwidths.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (options.global_bandwidth) {
    std::vector<double> total(candidates.size(), 0.0);
    for (const auto& ch : choices) {
      if (!ch) continue;
      for (std::size_t c = 0; c < candidates.size(); ++c) total[c] += ch->cv_error[c];
    }
    const auto best = std::min_element(total.begin(), total.end()) - total.begin();
    if (!std::isfinite(total[best]))
      fail(ErrorCode::SingularLocalFit, "no bandwidth is feasible for every curve");
    for (std::size_t i = 0; i < n; ++i)
      if (choices[i]) out.bandwidths[i] = candidates[best];
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (choices[i]) out.bandwidths[i] = choices[i]->bandwidth;
  }

  out.orders.assign(orders, OrderSample{std::vector<std::vector<double>>(n),
                                        std::vector<Mask>(n)});
  parallel_for(n, options.threads, [&](std::size_t i) {
    const auto& c = dataset.curves()[i];
    for (std::size_t l = 0; l < orders; ++l) {
      if (!choices[i]) {
        out.orders[l].values[i].assign(m, std::numeric_limits<double>::quiet_NaN());
        out.orders[l].masks[i].assign(m, 0);
        continue;
      }
      const double h = out.bandwidths[i] * std::pow(options.derivative_inflation, double(l));
      auto sm = local_poly(grid, c.values, c.mask, h, out.degrees[l], int(l));
      out.orders[l].values[i] = std::move(sm.values);
      out.orders[l].masks[i] = std::move(sm.mask);
    }
  });
  for (auto& w : curve_warning)
    if (!w.empty()) out.warnings.push_back(std::move(w));
  return out;
}

}  // namespace fdsel
