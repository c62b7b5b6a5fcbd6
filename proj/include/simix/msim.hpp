#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simix/density.hpp"
#include "simix/mixlin.hpp"
#include "simix/nelder_mead.hpp"
#include "simix/sir.hpp"
#include "simix/smoothing.hpp"

namespace simix {

/// Curve values evaluated at the observations' index values (n x k each).
struct CurveValues {
  Eigen::MatrixXd proportions;
  Eigen::MatrixXd means;
  Eigen::MatrixXd variances;
};

CurveValues evaluate_curves(const CurveSet& curves, const Eigen::VectorXd& index_values);

/// p_ij proportional to pi_j(z_i) phi(y_i | m_j(z_i), sigma_j^2(z_i)), in log
/// space. When `loglik` is given it receives sum_i log sum_j (numerator).
PosteriorMatrix estep_msim(const Eigen::VectorXd& y, const CurveValues& at_obs,
                           double* loglik = nullptr);

/// Kernel-weighted M-step at every grid point:
///   pi_j(u)      = sum_i p_ij K_h(z_i-u) / sum_i K_h(z_i-u)
///   m_j(u)       = sum_i p_ij y_i K_h(z_i-u) / sum_i p_ij K_h(z_i-u)
///   sigma_j^2(u) = sum_i p_ij (y_i-m_j(u))^2 K_h(z_i-u) / sum_i p_ij K_h(z_i-u)
/// Throws starved_neighborhood when a denominator drops below 1e-12.
CurveSet mstep_msim(const PosteriorMatrix& posteriors, const Eigen::VectorXd& index_values,
                    const Eigen::VectorXd& y, const Grid& grid, double bandwidth,
                    Kernel kernel = Kernel::gaussian);

struct ModifiedEmOptions {
  int max_iter = 500;
  double tol = 1e-6;  // max absolute change of any curve value
  Kernel kernel = Kernel::gaussian;
};

struct ModifiedEmResult {
  CurveSet curves;
  PosteriorMatrix posteriors;
  // Observed-data log-likelihood with interpolated curves after each E-step.
  // Grid interpolation means this is not guaranteed to be monotone.
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  int loglik_decreases = 0;
};

/// Modified EM for fixed index values: one global E-step shared by all grid
/// points, followed by kernel-weighted M-steps, until the curves settle.
ModifiedEmResult run_modified_em(const Eigen::VectorXd& index_values, const Eigen::VectorXd& y,
                                 const Grid& grid, double bandwidth, const PosteriorMatrix& init,
                                 const ModifiedEmOptions& options = {});
ModifiedEmResult run_modified_em(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const IndexVector& index, double bandwidth, const Grid& grid,
                                 const PosteriorMatrix& init, const ModifiedEmOptions& options = {});
/// Same iteration, warm-started from curves (E-step first).
ModifiedEmResult run_modified_em_from_curves(const Eigen::VectorXd& index_values,
                                             const Eigen::VectorXd& y, const Grid& grid,
                                             double bandwidth, const CurveSet& start,
                                             const ModifiedEmOptions& options = {});

/// sum_i log sum_j pi_j(a^T x_i) phi(y_i | m_j(a^T x_i), sigma_j^2(a^T x_i)),
/// curves interpolated with clamping; `alpha` is used as given.
double msim_index_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const CurveSet& curves, const Eigen::VectorXd& alpha);
/// Euclidean gradient of msim_index_objective, using the slopes of the
/// piecewise-linear curves. Valid wherever no a^T x_i sits on a grid node.
Eigen::VectorXd msim_index_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const CurveSet& curves, const Eigen::VectorXd& alpha);

struct IndexSearchOptions {
  NelderMeadOptions simplex{};
};

struct ProfileResult {
  IndexVector index;
  double start_objective = 0.0;
  double objective = 0.0;
  bool improved = false;
  // The optimum's sign had to be flipped to satisfy the sign rule; curves
  // estimated against the old orientation must be reflected.
  bool flipped = false;
  int evaluations = 0;
};

/// Maximizes an index objective over the unit sphere with a simplex search in
/// the chart that fixes the largest-magnitude coordinate of `start`. Falls
/// back to `start` unless the objective strictly improves.
ProfileResult maximize_over_sphere(const std::function<double(const Eigen::VectorXd&)>& objective,
                                   const IndexVector& start, const IndexSearchOptions& options = {});

ProfileResult profile_index_msim(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const CurveSet& curves, const IndexVector& start,
                                 const IndexSearchOptions& options = {});

enum class MsimMode { one_step, fib };

struct MsimOptions {
  MsimMode mode = MsimMode::fib;
  std::optional<IndexVector> init_index;  // SIR when absent
  int sir_slices = kDefaultSlices;
  std::size_t grid_size = kDefaultGridSize;
  std::uint64_t seed = 0;
  ModifiedEmOptions em{};
  int max_rounds = 20;
  double index_tol = 1e-6;
  IndexSearchOptions search{};
  int init_starts = 10;
  int random_restarts = 5;
};

struct MsimFit {
  IndexVector index;
  IndexVector initial_index;
  CurveSet curves;
  PosteriorMatrix posteriors;
  double loglik = 0.0;  // observed-data log-likelihood at the fit
  double bandwidth = 0.0;
  Kernel kernel = Kernel::gaussian;
  MsimMode mode = MsimMode::fib;
  int em_iterations = 0;
  int rounds = 0;
  int index_evaluations = 0;
  bool converged = false;
  std::vector<std::string> notes;
};

/// One-step (SIR index + modified EM) or fully iterative backfitting fit.
MsimFit fit_msim(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k, double bandwidth,
                 const MsimOptions& options = {});

struct Prediction {
  Eigen::VectorXd fitted;
  PosteriorMatrix posteriors;
  std::vector<int> labels;  // 0-based argmax of posteriors
};

/// With y: responsibilities against y and fitted = sum_j p_tj m_j(z_t).
/// Without y: responsibilities are the proportions and fitted is the
/// proportion-weighted mean.
Prediction predict_msim(const MsimFit& fit, const Eigen::MatrixXd& X_new,
                        const std::optional<Eigen::VectorXd>& y = std::nullopt);

}  // namespace simix
