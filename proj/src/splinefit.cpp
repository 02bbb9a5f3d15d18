#include "fdsel/splinefit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "fdsel/error.hpp"
#include "fdsel/parallel.hpp"

namespace fdsel {

namespace {

std::atomic<std::uint64_t> g_monotonicity_violations{0};

std::size_t find_span(const std::vector<double>& U, int p, std::size_t dim, double x) {
  const std::size_t n = dim - 1;
  if (x >= U[n + 1]) return n;
  if (x <= U[p]) return std::size_t(p);
  // Last index with U[i] <= x, restricted to [p, n].
  auto it = std::upper_bound(U.begin() + p, U.begin() + n + 1, x);
  return static_cast<std::size_t>(it - U.begin()) - 1;
}

// Nonzero basis functions and derivatives at x (The NURBS Book, A2.3).
void ders_basis_funs(const std::vector<double>& U, std::size_t span, double x, int p, int nd,
                     Eigen::MatrixXd& ders) {
  Eigen::MatrixXd ndu(p + 1, p + 1);
  std::vector<double> left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }
  ders.setZero(nd + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

  Eigen::MatrixXd a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= nd && k <= p; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= nd; ++k) {
    ders.row(k) *= factor;
    factor *= (p - k);
  }
}

// Gauss-Legendre nodes / weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  switch (n) {
    case 1: x = {0.0}; w = {2.0}; return;
    case 2: x = {-0.5773502691896257, 0.5773502691896257}; w = {1.0, 1.0}; return;
    case 3:
      x = {-0.7745966692414834, 0.0, 0.7745966692414834};
      w = {0.5555555555555556, 0.8888888888888888, 0.5555555555555556};
      return;
    case 4:
      x = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
      w = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
      return;
    default:
      x = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
      w = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
           0.2369268850561891};
      return;
  }
}

// Curves of a group as dense rows over the grid. Observed cells carry weight
// 1 / (#observed cells of the curve); unobserved cells carry weight 0 and value 0.
struct Cells {
  std::size_t rows = 0;
  std::size_t m = 0;
  std::size_t observed = 0;
  std::vector<double> value;
  std::vector<double> weight;
};

Cells gather_cells(const OrderSample& sample, std::span<const std::size_t> members) {
  Cells cells;
  for (std::size_t i : members) {
    const auto& mask = sample.masks[i];
    const auto& vals = sample.values[i];
    cells.m = mask.size();
    std::size_t count = 0;
    for (auto v : mask) count += v ? 1 : 0;
    if (count == 0) continue;
    const double w = 1.0 / double(count);
    for (std::size_t j = 0; j < mask.size(); ++j) {
      cells.value.push_back(mask[j] ? vals[j] : 0.0);
      cells.weight.push_back(mask[j] ? w : 0.0);
    }
    cells.observed += count;
    ++cells.rows;
  }
  return cells;
}

}  // namespace

double huber_rho(double x, double delta) {
  const double ax = std::abs(x);
  return ax <= delta ? 0.5 * x * x : delta * ax - 0.5 * delta * delta;
}

SplineBasis::SplineBasis(const Grid& grid, std::vector<double> interior_knots, int degree)
    : interior_(std::move(interior_knots)), degree_(degree) {
  if (degree < 0) fail(ErrorCode::DegenerateKnots, "negative spline degree");
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    const double k = interior_[i];
    if (!std::isfinite(k) || !(k > grid.a()) || !(k < grid.b()) ||
        (i > 0 && !(k > interior_[i - 1])))
      fail(ErrorCode::DegenerateKnots,
           "interior knots must be strictly increasing inside (a, b)");
  }
  knots_.assign(std::size_t(degree) + 1, grid.a());
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), std::size_t(degree) + 1, grid.b());
  dim_ = interior_.size() + std::size_t(degree) + 1;

  const std::size_t m = grid.size();
  first_.resize(m);
  local_.resize(m, degree + 1);
  Eigen::MatrixXd ders;
  for (std::size_t j = 0; j < m; ++j) {
    first_[j] = evaluate_at(grid[j], 0, ders);
    local_.row(j) = ders.row(0);
  }
}

std::size_t SplineBasis::evaluate_at(double x, int derivs, Eigen::MatrixXd& out) const {
  const std::size_t span = find_span(knots_, degree_, dim_, x);
  ders_basis_funs(knots_, span, x, degree_, derivs, out);
  return span - std::size_t(degree_);
}

Eigen::MatrixXd SplineBasis::dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows(), dim_);
  for (std::size_t j = 0; j < rows(); ++j)
    for (int q = 0; q <= degree_; ++q) out(j, first_[j] + q) = local_(j, q);
  return out;
}

std::vector<double> SplineBasis::evaluate(const Eigen::VectorXd& coef) const {
  std::vector<double> out(rows());
  for (std::size_t j = 0; j < rows(); ++j) {
    double s = 0.0;
    for (int q = 0; q <= degree_; ++q) s += local_(j, q) * coef(first_[j] + q);
    out[j] = s;
  }
  return out;
}

std::vector<double> uniform_interior_knots(double a, double b, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = a + (b - a) * double(k + 1) / double(count + 1);
  return out;
}

Eigen::MatrixXd build_basis(const Grid& grid, const std::vector<double>& interior_knots,
                            int degree) {
  return SplineBasis(grid, interior_knots, degree).dense();
}

Eigen::MatrixXd penalty_matrix(std::size_t d, std::size_t order) {
  if (order >= d) fail(ErrorCode::InvalidConfig, "penalty order must be below the basis dimension");
  Eigen::MatrixXd diff = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t o = 0; o < order; ++o) {
    const Eigen::Index rows = diff.rows() - 1;
    diff = (diff.bottomRows(rows) - diff.topRows(rows)).eval();
  }
  return diff.transpose() * diff;
}

Eigen::MatrixXd derivative_gram_penalty(const SplineBasis& basis, std::size_t order) {
  const int p = basis.degree();
  if (int(order) > p) fail(ErrorCode::InvalidConfig, "derivative penalty order exceeds degree");
  const std::size_t d = basis.dim();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  std::vector<double> nodes, weights;
  gauss_legendre(std::max(1, p - int(order) + 1), nodes, weights);
  const auto& U = basis.knots();
  Eigen::MatrixXd ders;
  for (std::size_t s = 0; s + 1 < U.size(); ++s) {
    const double lo = U[s], hi = U[s + 1];
    if (!(hi > lo)) continue;
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const std::size_t first = basis.evaluate_at(mid + half * nodes[q], int(order), ders);
      const Eigen::VectorXd row = ders.row(Eigen::Index(order)).transpose();
      gram.block(first, first, p + 1, p + 1).noalias() += (half * weights[q]) * row * row.transpose();
    }
  }
  return gram;
}

std::vector<double> MEstimatorConfig::default_lambda_grid() {
  std::vector<double> grid(20);
  for (int i = 0; i < 20; ++i) grid[i] = std::pow(10.0, -6.0 + 8.0 * double(i) / 19.0);
  return grid;
}

void MEstimatorConfig::validate() const {
  if (!(delta > 0)) fail(ErrorCode::InvalidConfig, "huber delta must be positive");
  if (knot_candidates.empty()) fail(ErrorCode::InvalidConfig, "no knot candidates");
  if (lambda_grid.empty()) fail(ErrorCode::InvalidConfig, "no lambda candidates");
  for (double l : lambda_grid)
    if (!(l > 0)) fail(ErrorCode::InvalidConfig, "lambda candidates must be positive");
  if (max_iterations < 1) fail(ErrorCode::InvalidConfig, "max iterations must be at least 1");
  if (degree < 1) fail(ErrorCode::InvalidConfig, "spline degree must be at least 1");
  if (penalty == PenaltyKind::DerivativeGram && penalty_order != 2)
    fail(ErrorCode::InvalidConfig, "the derivative Gram penalty is available for order 2 only");
}

std::uint64_t irwls_monotonicity_violations() { return g_monotonicity_violations.load(); }

SplineSmoother::SplineSmoother(const Grid& grid, std::size_t knot_count,
                               const MEstimatorConfig& config)
    : grid_(&grid),
      config_(config),
      knot_count_(knot_count),
      basis_(grid, uniform_interior_knots(grid.a(), grid.b(), knot_count), config.degree) {
  penalty_ = config.penalty == PenaltyKind::Difference
                 ? penalty_matrix(basis_.dim(), config.penalty_order)
                 : derivative_gram_penalty(basis_, config.penalty_order);
  band_ = basis_.degree();
  const Eigen::Index d = penalty_.rows();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (penalty_(i, j) != 0.0) band_ = std::max(band_, int(i - j));
  penalty_band_.assign(std::size_t(d) * (band_ + 1), 0.0);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - band_); j <= i; ++j)
      penalty_band_[std::size_t(i) * (band_ + 1) + (j - i + band_)] = penalty_(i, j);
  basis_trace_ = basis_.local().squaredNorm();
  penalty_trace_ = penalty_.trace();
}

double SplineSmoother::lambda_scale(std::size_t group_size) const {
  return double(group_size) * basis_trace_ / (double(grid_->size()) * penalty_trace_);
}

namespace {

// Symmetric banded matrix, lower band stored row-major: (i, j) for
// i - w <= j <= i lives at a[i * (w + 1) + (j - i + w)].
struct Band {
  int n = 0;
  int w = 0;
  std::vector<double> a;

  Band(int n_, int w_) : n(n_), w(w_), a(std::size_t(n_) * (w_ + 1), 0.0) {}
  double& at(int i, int j) { return a[std::size_t(i) * (w + 1) + (j - i + w)]; }
  double at(int i, int j) const { return a[std::size_t(i) * (w + 1) + (j - i + w)]; }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = std::max(0, i - w); j <= i; ++j) out(i, j) = out(j, i) = at(i, j);
    return out;
  }
};

// In-place banded Cholesky. Fails when a pivot drops below `rel` times the
// largest diagonal entry.
bool band_cholesky(Band& A, double rel) {
  double scale = 0.0;
  for (int i = 0; i < A.n; ++i) scale = std::max(scale, A.at(i, i));
  if (!(scale > 0) || !std::isfinite(scale)) return false;
  for (int i = 0; i < A.n; ++i) {
    const int lo = std::max(0, i - A.w);
    for (int j = lo; j <= i; ++j) {
      double sum = A.at(i, j);
      for (int k = std::max(lo, j - A.w); k < j; ++k) sum -= A.at(i, k) * A.at(j, k);
      if (j == i) {
        if (!(sum > rel * scale)) return false;
        A.at(i, i) = std::sqrt(sum);
      } else {
        A.at(i, j) = sum / A.at(j, j);
      }
    }
  }
  return true;
}

void band_solve(const Band& L, Eigen::VectorXd& x) {
  for (int i = 0; i < L.n; ++i) {
    double sum = x(i);
    for (int k = std::max(0, i - L.w); k < i; ++k) sum -= L.at(i, k) * x(k);
    x(i) = sum / L.at(i, i);
  }
  for (int i = L.n - 1; i >= 0; --i) {
    double sum = x(i);
    for (int k = i + 1; k <= std::min(L.n - 1, i + L.w); ++k) sum -= L.at(k, i) * x(k);
    x(i) = sum / L.at(i, i);
  }
}

struct Assembly {
  Band gram;            // B' V W B
  Eigen::VectorXd rhs;  // B' V W x
};

// omega_j and r_j are the per-grid-point sums of v w and v w x over cells.
Assembly assemble(const SplineBasis& basis, int band, const std::vector<double>& omega,
                  const std::vector<double>& r) {
  const std::size_t m = basis.rows();
  const int p = basis.degree();
  Assembly out{Band(int(basis.dim()), band), Eigen::VectorXd::Zero(basis.dim())};
  const auto& local = basis.local();
  for (std::size_t j = 0; j < m; ++j) {
    if (omega[j] == 0.0) continue;
    const int f = int(basis.first(j));
    for (int u = 0; u <= p; ++u) {
      const double wu = omega[j] * local(Eigen::Index(j), u);
      for (int v = 0; v <= u; ++v) out.gram.at(f + u, f + v) += wu * local(Eigen::Index(j), v);
      out.rhs(f + u) += r[j] * local(Eigen::Index(j), u);
    }
  }
  return out;
}

}  // namespace

double SplineSmoother::objective(const OrderSample& sample, std::span<const std::size_t> members,
                                 double lambda, const Eigen::VectorXd& coef) const {
  const Cells cells = gather_cells(sample, members);
  const auto fitted = basis_.evaluate(coef);
  double data = 0.0;
  for (std::size_t c = 0; c < cells.value.size(); ++c)
    if (cells.weight[c] > 0)
      data += cells.weight[c] * huber_rho(cells.value[c] - fitted[c % cells.m], config_.delta);
  return data + lambda * lambda_scale(members.size()) * coef.dot(penalty_ * coef);
}

GroupFit SplineSmoother::fit(const OrderSample& sample, std::span<const std::size_t> members,
                             double lambda, bool diagnostics) const {
  const Cells cells = gather_cells(sample, members);
  if (cells.observed == 0) fail(ErrorCode::SingularSystem, "group has no observed cells");
  const std::size_t ncell = cells.observed;
  const std::size_t m = grid_->size();
  const double scale = lambda_scale(members.size());
  double lambda_eff = lambda * scale;
  const double delta = config_.delta;

  auto solve = [&](const Assembly& as, double lam, Eigen::VectorXd& coef) -> bool {
    Band sys = as.gram;
    for (std::size_t q = 0; q < sys.a.size(); ++q) sys.a[q] += 2.0 * lam * penalty_band_[q];
    if (!band_cholesky(sys, 1e-14)) return false;
    coef = as.rhs;
    band_solve(sys, coef);
    return coef.allFinite();
  };
  // c' P c over the band.
  auto roughness = [&](const Eigen::VectorXd& coef) {
    double s = 0.0;
    const int d = int(coef.size());
    for (int i = 0; i < d; ++i) {
      const double* row = penalty_band_.data() + std::size_t(i) * (band_ + 1);
      double off = 0.0;
      for (int j = std::max(0, i - band_); j < i; ++j) off += row[j - i + band_] * coef(j);
      s += coef(i) * (row[band_] * coef(i) + 2.0 * off);
    }
    return s;
  };

  std::vector<double> omega(m, 0.0), rsum(m, 0.0), loss(m, 0.0);
  for (std::size_t i = 0; i < cells.rows; ++i) {
    const double* v = cells.weight.data() + i * m;
    const double* x = cells.value.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      omega[j] += v[j];
      rsum[j] += v[j] * x[j];
    }
  }

  // Objective at `coef`; refreshes omega and rsum with the Huber weights of
  // the same residuals.
  auto objective_of = [&](const std::vector<double>& fitted, const Eigen::VectorXd& coef) {
    std::fill(omega.begin(), omega.end(), 0.0);
    std::fill(rsum.begin(), rsum.end(), 0.0);
    std::fill(loss.begin(), loss.end(), 0.0);
    const double* f = fitted.data();
    double* om = omega.data();
    double* rs = rsum.data();
    double* ls = loss.data();
    for (std::size_t i = 0; i < cells.rows; ++i) {
      const double* v = cells.weight.data() + i * m;
      const double* x = cells.value.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) {
        const double ar = std::fabs(x[j] - f[j]);
        const double c = ar < delta ? ar : delta;
        ls[j] += v[j] * c * (ar - 0.5 * c);
        const double ratio = delta / ar;
        const double vw = v[j] * (ratio < 1.0 ? ratio : 1.0);
        om[j] += vw;
        rs[j] += vw * x[j];
      }
    }
    double data = 0.0;
    for (double l : loss) data += l;
    return data + lambda_eff * roughness(coef);
  };

  Eigen::VectorXd coef;
  {
    const Assembly as = assemble(basis_, band_, omega, rsum);
    if (!solve(as, lambda_eff, coef)) {
      const double floor_eff = 1e-8 * scale;
      if (lambda_eff >= floor_eff || !solve(as, floor_eff, coef))
        fail(ErrorCode::SingularSystem, "penalized least-squares system is singular");
      lambda_eff = floor_eff;
    }
  }

  GroupFit out;
  out.knot_count = knot_count_;
  out.interior_knots = basis_.interior_knots();
  out.lambda = lambda;
  out.lambda_effective = lambda_eff;
  out.cells = ncell;

  std::vector<double> fitted = basis_.evaluate(coef);
  double obj = objective_of(fitted, coef);
  out.initial_objective = obj;
  Eigen::VectorXd best_coef = coef;
  double best_obj = obj;

  for (std::size_t it = 1; it <= config_.max_iterations; ++it) {
    Eigen::VectorXd next;
    if (!solve(assemble(basis_, band_, omega, rsum), lambda_eff, next))
      fail(ErrorCode::SingularSystem, "reweighted system became singular");
    const double change = (next - coef).norm();
    const double size = coef.norm();
    coef = std::move(next);
    fitted = basis_.evaluate(coef);
    const double next_obj = objective_of(fitted, coef);
    const double rise = (next_obj - obj) / std::max(std::abs(obj), 1e-300);
    if (rise > 1e-12) g_monotonicity_violations.fetch_add(1);
    out.max_objective_increase = std::max(out.max_objective_increase, rise);
    obj = next_obj;
    out.iterations = it;
    if (obj <= best_obj) {
      best_obj = obj;
      best_coef = coef;
    }
    if (change <= config_.tolerance * std::max(size, 1e-12)) {
      out.converged = true;
      break;
    }
  }
  const bool moved = best_obj != obj;
  coef = best_coef;
  fitted = basis_.evaluate(coef);
  out.objective = best_obj;
  out.edf = out.wrss = out.gcv = std::numeric_limits<double>::quiet_NaN();

  if (diagnostics) {
    // Hat-matrix trace and robust residual sum of squares at the final weights.
    if (moved) objective_of(fitted, coef);
    const Assembly final_as = assemble(basis_, band_, omega, rsum);
    const Eigen::MatrixXd gram = final_as.gram.dense();
    Eigen::LLT<Eigen::MatrixXd> llt(gram + 2.0 * lambda_eff * penalty_);
    out.edf = llt.info() == Eigen::Success ? llt.solve(gram).trace()
                                           : std::numeric_limits<double>::quiet_NaN();
    double wrss = 0.0;
    for (std::size_t c = 0; c < cells.value.size(); ++c) {
      const double r = cells.value[c] - fitted[c % m];
      wrss += cells.weight[c] * huber_weight(r, delta) * r * r;
    }
    out.wrss = wrss;
    const double n = double(ncell);
    const double denom = n - out.edf;
    out.gcv = denom > 0 ? n * wrss / (denom * denom) : std::numeric_limits<double>::infinity();
  }
  out.coefficients.assign(coef.data(), coef.data() + coef.size());
  out.fitted = std::move(fitted);
  return out;
}

GroupFit irwls_fit(const Grid& grid, const OrderSample& sample,
                   std::span<const std::size_t> members, std::size_t knot_count, double lambda,
                   const MEstimatorConfig& config) {
  return SplineSmoother(grid, knot_count, config).fit(sample, members, lambda);
}

LambdaSelection select_lambda_gcv(const Grid& grid, const OrderSample& sample,
                                  std::span<const std::size_t> members, std::size_t knot_count,
                                  const MEstimatorConfig& config) {
  LambdaSelection sel;
  const auto& cands = config.lambda_grid;
  if (cands.size() == 1) {
    sel.lambda = cands.front();
    sel.gcv = {std::numeric_limits<double>::quiet_NaN()};
    return sel;
  }
  const SplineSmoother smoother(grid, knot_count, config);
  sel.gcv.assign(cands.size(), std::numeric_limits<double>::infinity());
  parallel_for(cands.size(), config.threads, [&](std::size_t c) {
    try {
      sel.gcv[c] = smoother.fit(sample, members, cands[c]).gcv;
    } catch (const Error&) {
    }
  });
  // Ascending lambda order; ties (within 1e-10 relative) move to the larger lambda.
  std::vector<std::size_t> order(cands.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return cands[x] < cands[y]; });
  std::size_t best = cands.size();
  for (std::size_t c : order) {
    if (!std::isfinite(sel.gcv[c])) continue;
    if (best == cands.size() || sel.gcv[c] <= sel.gcv[best] * (1.0 + 1e-10)) best = c;
  }
  if (best == cands.size()) fail(ErrorCode::AllFitsFailed, "no lambda candidate could be fitted");
  sel.lambda = cands[best];
  return sel;
}

KnotSelection select_knots_cv(const Grid& grid, const OrderSample& sample,
                              std::span<const std::size_t> members,
                              const MEstimatorConfig& config) {
  KnotSelection sel;
  std::vector<std::size_t> cands = config.knot_candidates;
  std::sort(cands.begin(), cands.end());
  if (cands.size() == 1) {
    sel.knot_count = cands.front();
    sel.cv_loss = {std::numeric_limits<double>::quiet_NaN()};
    return sel;
  }
  // Only curves with defined entries take part in the folds.
  std::vector<std::size_t> usable;
  for (std::size_t i : members) {
    const auto& mk = sample.masks[i];
    if (std::any_of(mk.begin(), mk.end(), [](auto v) { return v != 0; })) usable.push_back(i);
  }
  const std::size_t folds = std::min(config.cv_folds, usable.size());
  sel.cv_loss.assign(cands.size(), std::numeric_limits<double>::infinity());
  if (folds < 2) {
    sel.knot_count = cands.front();
    return sel;
  }
  MEstimatorConfig inner = config;
  inner.threads = 1;
  parallel_for(cands.size(), config.threads, [&](std::size_t c) {
    double loss = 0.0;
    try {
      for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t pos = 0; pos < usable.size(); ++pos)
          (pos % folds == f ? test : train).push_back(usable[pos]);
        const double lambda = select_lambda_gcv(grid, sample, train, cands[c], inner).lambda;
        const GroupFit fit = irwls_fit(grid, sample, train, cands[c], lambda, inner);
        for (std::size_t i : test) {
          const auto& mk = sample.masks[i];
          const auto& vals = sample.values[i];
          double curve = 0.0;
          std::size_t count = 0;
          for (std::size_t j = 0; j < mk.size(); ++j) {
            if (!mk[j]) continue;
            curve += huber_rho(vals[j] - fit.fitted[j], config.delta);
            ++count;
          }
          loss += curve / double(count);
        }
      }
      sel.cv_loss[c] = loss;
    } catch (const Error&) {
    }
  });
  // Exact fits leave losses at rounding level; those count as ties.
  double scale = 0.0;
  for (std::size_t i : usable) {
    const auto& mk = sample.masks[i];
    double curve = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < mk.size(); ++j) {
      if (!mk[j]) continue;
      curve += huber_rho(sample.values[i][j], config.delta);
      ++count;
    }
    scale += curve / double(count);
  }
  std::size_t best = cands.size();
  for (std::size_t c = 0; c < cands.size(); ++c) {
    if (!std::isfinite(sel.cv_loss[c])) continue;
    if (best == cands.size() ||
        sel.cv_loss[c] < sel.cv_loss[best] * (1.0 - 1e-10) - 1e-12 * scale)
      best = c;
  }
  if (best == cands.size()) fail(ErrorCode::AllFitsFailed, "no knot candidate could be fitted");
  sel.knot_count = cands[best];
  return sel;
}

Tuning select_tuning(const Grid& grid, const OrderSample& sample,
                     std::span<const std::size_t> members, const MEstimatorConfig& config) {
  Tuning t;
  t.knot_count = select_knots_cv(grid, sample, members, config).knot_count;
  t.lambda = select_lambda_gcv(grid, sample, members, t.knot_count, config).lambda;
  return t;
}

std::vector<std::vector<std::size_t>> group_members(const std::vector<std::size_t>& labels,
                                                    std::size_t k) {
  std::vector<std::vector<std::size_t>> out(k);
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

namespace {

SampleFits fit_sample_impl(const SmoothedSample& sample, const MEstimatorConfig& config,
                           const std::vector<std::vector<Tuning>>* fixed, unsigned threads) {
  config.validate();
  const std::size_t orders = sample.orders.size();
  const std::size_t k = sample.groups.size();
  const auto members = group_members(sample.labels, k);
  SampleFits out;
  out.tuning.assign(orders, std::vector<Tuning>(k));
  out.fits.assign(orders, std::vector<GroupFit>(k));
  MEstimatorConfig inner = config;
  inner.threads = 1;
  parallel_for(orders * k, threads, [&](std::size_t task) {
    const std::size_t l = task / k, g = task % k;
    const Tuning t = fixed ? (*fixed)[l][g]
                           : select_tuning(sample.grid, sample.orders[l], members[g], inner);
    out.tuning[l][g] = t;
    out.fits[l][g] = irwls_fit(sample.grid, sample.orders[l], members[g], t.knot_count, t.lambda, inner);
  });
  return out;
}

}  // namespace

SampleFits fit_sample(const SmoothedSample& sample, const MEstimatorConfig& config,
                      unsigned threads) {
  return fit_sample_impl(sample, config, nullptr, threads);
}

SampleFits fit_sample(const SmoothedSample& sample, const MEstimatorConfig& config,
                      const std::vector<std::vector<Tuning>>& tuning, unsigned threads) {
  if (tuning.size() != sample.orders.size())
    fail(ErrorCode::InvalidConfig, "tuning does not cover every derivative order");
  for (const auto& row : tuning)
    if (row.size() != sample.groups.size())
      fail(ErrorCode::InvalidConfig, "tuning does not cover every group");
  return fit_sample_impl(sample, config, &tuning, threads);
}

}  // namespace fdsel
