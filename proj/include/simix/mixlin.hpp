#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "simix/density.hpp"

namespace simix {

/// Component regressions y ~ N(x^T beta_j, sigma_j^2) with constant mixing
/// proportions. Coefficient rows follow the design layout: with an
/// intercept, column 0 of the design is the constant.
struct LinearMixtureParams {
  Eigen::MatrixXd coefficients;  // k x q
  Eigen::VectorXd variances;     // k
  Eigen::VectorXd proportions;   // k (unused by varying-proportion models)
  bool intercept = true;

  Eigen::Index components() const noexcept { return coefficients.rows(); }
};

/// [1, X] when intercept is on, X otherwise.
Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& X, bool intercept);

/// Weighted least squares and weighted residual variance per component:
/// beta_j = (S^T R_j S)^{-1} S^T R_j y, sigma_j^2 = sum p_ij r_ij^2 / sum p_ij.
/// Variances below `variance_floor` are clamped; the number of clamps is
/// added to *clamped when provided. Throws component_collapse when a
/// weighted Gram matrix is singular or a component's weight is below q.
LinearMixtureParams weighted_regression_update(const PosteriorMatrix& posteriors,
                                               const Eigen::MatrixXd& design,
                                               const Eigen::VectorXd& y, double variance_floor,
                                               int* clamped = nullptr);

/// log phi(y_i | s_i^T beta_j, sigma_j^2), n x k.
Eigen::MatrixXd component_log_densities(const LinearMixtureParams& params,
                                        const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

struct MixLinOptions {
  int starts = 10;
  int max_iter = 1000;
  double tol = 1e-8;  // relative log-likelihood change
  bool intercept = true;
  std::uint64_t seed = 0;
};

struct MixLinFit {
  LinearMixtureParams params;
  PosteriorMatrix posteriors;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  // of the selected start
  int variance_clamps = 0;
  int failed_starts = 0;
};

/// EM for a k-component mixture of linear regressions, best of `starts`
/// random-partition initializations.
MixLinFit fit_mixlinreg(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k,
                        const MixLinOptions& options = {});

/// sum_i log sum_j pi_j phi(y_i | x_i^T beta_j, sigma_j^2).
double loglik_mixlin(const LinearMixtureParams& params, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& y);

}  // namespace simix
