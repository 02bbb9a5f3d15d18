#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdsel/datamodel.hpp"
#include "fdsel/presmooth.hpp"

namespace fdsel {

/// Huber loss: x^2 / 2 inside [-delta, delta], delta |x| - delta^2 / 2 outside.
double huber_rho(double x, double delta);

/// IRWLS weight psi(x) / x = min(1, delta / |x|).
inline double huber_weight(double x, double delta) {
  const double ax = x < 0 ? -x : x;
  return ax <= delta ? 1.0 : delta / ax;
}

/// Clamped B-spline basis evaluated on a grid. Each row has at most degree + 1
/// nonzero entries, stored compactly in `local` starting at column `first[j]`.
class SplineBasis {
 public:
  SplineBasis(const Grid& grid, std::vector<double> interior_knots, int degree);

  int degree() const noexcept { return degree_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return first_.size(); }
  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& interior_knots() const noexcept { return interior_; }
  std::size_t first(std::size_t j) const { return first_[j]; }
  const Eigen::MatrixXd& local() const noexcept { return local_; }

  Eigen::MatrixXd dense() const;
  std::vector<double> evaluate(const Eigen::VectorXd& coef) const;

  /// Values of the nonzero basis functions (and derivatives up to `derivs`) at
  /// an arbitrary x in [a, b]. Row r of `out` holds the r-th derivative; the
  /// return value is the first nonzero column.
  std::size_t evaluate_at(double x, int derivs, Eigen::MatrixXd& out) const;

 private:
  std::vector<double> knots_;
  std::vector<double> interior_;
  int degree_;
  std::size_t dim_;
  std::vector<std::size_t> first_;
  Eigen::MatrixXd local_;
};

/// `count` equally spaced interior knots strictly inside (a, b).
std::vector<double> uniform_interior_knots(double a, double b, std::size_t count);

/// m x d dense basis matrix. Throws DegenerateKnots unless the interior knots
/// are strictly increasing inside (a, b).
Eigen::MatrixXd build_basis(const Grid& grid, const std::vector<double>& interior_knots,
                            int degree = 3);

/// Difference penalty D^T D with D the order-th difference operator.
Eigen::MatrixXd penalty_matrix(std::size_t d, std::size_t order);

/// Exact Gram matrix of the order-th derivative, int B_i^(o) B_k^(o) dt.
Eigen::MatrixXd derivative_gram_penalty(const SplineBasis& basis, std::size_t order);

enum class PenaltyKind { Difference, DerivativeGram };

struct MEstimatorConfig {
  double delta = 1.0;
  std::vector<std::size_t> knot_candidates{10, 20, 40};
  std::vector<double> lambda_grid = default_lambda_grid();
  int degree = 3;
  std::size_t penalty_order = 2;
  PenaltyKind penalty = PenaltyKind::Difference;
  std::size_t max_iterations = 100;
  double tolerance = 1e-8;
  std::size_t cv_folds = 5;
  unsigned threads = 1;

  /// 20 log-spaced values on [1e-6, 1e2].
  static std::vector<double> default_lambda_grid();
  void validate() const;
};

struct GroupFit {
  std::size_t knot_count = 0;
  std::vector<double> interior_knots;
  double lambda = 0.0;
  double lambda_effective = 0.0;  // lambda times the design/penalty trace ratio
  std::vector<double> coefficients;
  std::vector<double> fitted;  // evaluation on the grid
  std::size_t iterations = 0;
  bool converged = false;
  double initial_objective = 0.0;
  double objective = 0.0;
  double max_objective_increase = 0.0;  // largest relative rise between iterates
  double edf = 0.0;                     // trace of the final hat matrix
  double wrss = 0.0;
  std::size_t cells = 0;
  double gcv = 0.0;
};

/// Number of IRWLS steps, across the process, where the objective rose by more
/// than the 1e-12 relative slack. Stays 0 for a correct implementation.
std::uint64_t irwls_monotonicity_violations();

/// Penalized spline M-estimator with fixed knots. Minimises
///   sum_i sum_j [delta_ij / sum_j delta_ij] rho(X_ij - h(t_j)) + lambda_eff c'Pc
/// by iteratively reweighted penalized least squares from the penalized LS start.
/// lambda_eff = lambda * n_g tr(B'B) / (m tr(P)), so the nominal lambda grid is
/// independent of group size and grid resolution.
class SplineSmoother {
 public:
  SplineSmoother(const Grid& grid, std::size_t knot_count, const MEstimatorConfig& config);

  const SplineBasis& basis() const noexcept { return basis_; }
  const Eigen::MatrixXd& penalty() const noexcept { return penalty_; }
  double lambda_scale(std::size_t group_size) const;

  /// Fits the curves listed in `members`. Curves with no defined entries are
  /// skipped. Throws SingularSystem if even the 1e-8 lambda floor is singular.
  /// Without `diagnostics` the edf, wrss and gcv fields are left NaN.
  GroupFit fit(const OrderSample& sample, std::span<const std::size_t> members,
               double lambda, bool diagnostics = true) const;

  /// Objective value for given coefficients (used by tests).
  double objective(const OrderSample& sample, std::span<const std::size_t> members,
                   double lambda, const Eigen::VectorXd& coef) const;

 private:
  const Grid* grid_;
  MEstimatorConfig config_;
  std::size_t knot_count_;
  SplineBasis basis_;
  Eigen::MatrixXd penalty_;
  int band_;                          // half-bandwidth of the normal equations
  std::vector<double> penalty_band_;  // lower band of penalty_, row-major
  double basis_trace_;
  double penalty_trace_;
};

/// One IRWLS fit (convenience wrapper around SplineSmoother).
GroupFit irwls_fit(const Grid& grid, const OrderSample& sample,
                   std::span<const std::size_t> members, std::size_t knot_count, double lambda,
                   const MEstimatorConfig& config);

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<double> gcv;  // per candidate, +inf where the fit failed
};

/// GCV = N WRSS / (N - tr H)^2 minimised over config.lambda_grid; ties go to the
/// larger lambda. Throws AllFitsFailed if no candidate could be fitted.
LambdaSelection select_lambda_gcv(const Grid& grid, const OrderSample& sample,
                                  std::span<const std::size_t> members, std::size_t knot_count,
                                  const MEstimatorConfig& config);

struct KnotSelection {
  std::size_t knot_count = 0;
  std::vector<double> cv_loss;  // per candidate
};

/// K-fold cross-validation over curves: fit on the training folds with the
/// GCV-chosen lambda, score the Huber loss on held-out curves. Ties go to
/// fewer knots.
KnotSelection select_knots_cv(const Grid& grid, const OrderSample& sample,
                              std::span<const std::size_t> members,
                              const MEstimatorConfig& config);

/// Knot count and lambda frozen for one (group, order).
struct Tuning {
  std::size_t knot_count = 0;
  double lambda = 0.0;
};

Tuning select_tuning(const Grid& grid, const OrderSample& sample,
                     std::span<const std::size_t> members, const MEstimatorConfig& config);

/// Fitted M-estimates for every group at every order of a smoothed sample.
struct SampleFits {
  std::vector<std::vector<Tuning>> tuning;  // [order][group]
  std::vector<std::vector<GroupFit>> fits;  // [order][group]
};

/// Selects tuning per (order, group) and fits. Independent (order, group) tasks
/// run in parallel on `threads` workers.
SampleFits fit_sample(const SmoothedSample& sample, const MEstimatorConfig& config,
                      unsigned threads);

/// Refits with tuning fixed (e.g. loaded from fits.json).
SampleFits fit_sample(const SmoothedSample& sample, const MEstimatorConfig& config,
                      const std::vector<std::vector<Tuning>>& tuning, unsigned threads);

/// Curve indices of each group under `labels`.
std::vector<std::vector<std::size_t>> group_members(const std::vector<std::size_t>& labels,
                                                    std::size_t k);

}  // namespace fdsel
