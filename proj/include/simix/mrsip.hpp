#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simix/density.hpp"
#include "simix/mixlin.hpp"
#include "simix/msim.hpp"
#include "simix/sir.hpp"
#include "simix/smoothing.hpp"

namespace simix {

inline constexpr double kProportionFloor = 1e-6;

/// Clamps every proportion to [floor, 1 - floor] and renormalizes rows.
Eigen::MatrixXd floor_proportions(const Eigen::MatrixXd& proportions,
                                  double floor = kProportionFloor);

/// p_ij proportional to pi_j(z_i) phi(y_i | s_i^T beta_j, sigma_j^2), with the
/// proportions floored first. `loglik` receives the matching log-likelihood.
PosteriorMatrix estep_mrsip(const Eigen::MatrixXd& pi_at_obs, const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& y, const LinearMixtureParams& linear,
                            double* loglik = nullptr);

/// pi_j(u) = sum_i p_ij K_h(z_i-u) / sum_i K_h(z_i-u) on the grid (N x k).
Eigen::MatrixXd mstep_pi(const PosteriorMatrix& posteriors, const Eigen::VectorXd& index_values,
                         const Grid& grid, double bandwidth, Kernel kernel = Kernel::gaussian);

/// Weighted least-squares beta_j and weighted residual variance sigma_j^2.
LinearMixtureParams update_beta_sigma(const PosteriorMatrix& posteriors,
                                      const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                      double variance_floor = 0.0, int* clamped = nullptr);

/// sum_i log sum_j pi_j(a^T x_i) phi(y_i | s_i^T beta_j, sigma_j^2), where
/// `X_index` holds the index covariates and `design` the mean covariates.
double mrsip_index_objective(const Eigen::MatrixXd& X_index, const Eigen::MatrixXd& design,
                             const Eigen::VectorXd& y, const CurveSet& proportion_curves,
                             const LinearMixtureParams& linear, const Eigen::VectorXd& alpha);
/// Euclidean gradient of mrsip_index_objective (away from grid nodes and
/// from the proportion floor).
Eigen::VectorXd mrsip_index_gradient(const Eigen::MatrixXd& X_index, const Eigen::MatrixXd& design,
                                     const Eigen::VectorXd& y, const CurveSet& proportion_curves,
                                     const LinearMixtureParams& linear, const Eigen::VectorXd& alpha);

ProfileResult profile_index_mrsip(const Eigen::MatrixXd& X_index, const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& y, const CurveSet& proportion_curves,
                                  const LinearMixtureParams& linear, const IndexVector& start,
                                  const IndexSearchOptions& options = {});

struct MrsipOptions {
  std::optional<IndexVector> init_index;           // from the linear-mixture clustering when absent
  std::optional<LinearMixtureParams> init_linear;  // from a linear-mixture fit when absent
  bool intercept = true;
  std::size_t grid_size = kDefaultGridSize;
  std::uint64_t seed = 0;
  int init_starts = 10;
  Kernel kernel = Kernel::gaussian;
  int curve_max_iter = 500;
  double curve_tol = 1e-6;
  int inner_em_max_iter = 500;
  double inner_em_tol = 1e-10;  // relative log-likelihood change
  int max_alternations = 50;
  double index_tol = 1e-6;
  int max_rounds = 20;
  double loglik_tol = 1e-6;  // relative change between rounds
  IndexSearchOptions search{};
};

struct MrsipFit {
  IndexVector index;
  IndexVector initial_index;
  CurveSet curves;  // proportions only
  LinearMixtureParams linear;
  PosteriorMatrix posteriors;
  double loglik = 0.0;
  double bandwidth = 0.0;
  Kernel kernel = Kernel::gaussian;
  int rounds = 0;
  int alternations = 0;
  bool converged = false;
  int index_non_improvements = 0;
  int variance_clamps = 0;
  // Log-likelihood traces of the (beta, sigma^2) EM runs with the
  // proportion curves and index held fixed.
  std::vector<std::vector<double>> inner_em_traces;
  std::vector<std::string> notes;
};

/// Backfitting between the proportion curves and (alpha, beta, sigma^2).
MrsipFit fit_mrsip(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k, double bandwidth,
                   const MrsipOptions& options = {});

/// With y: fitted = sum_j p_tj x_t^T beta_j using responsibilities against y.
/// Without y: fitted = sum_j pi_j(a^T x_t) x_t^T beta_j.
Prediction predict_mrsip(const MrsipFit& fit, const Eigen::MatrixXd& X_new,
                         const std::optional<Eigen::VectorXd>& y = std::nullopt);

}  // namespace simix
