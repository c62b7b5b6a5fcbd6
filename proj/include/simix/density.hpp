#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace simix {

// Responsibilities: n x k, rows on the probability simplex.
using PosteriorMatrix = Eigen::MatrixXd;

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

inline double log_normal_density(double y, double mean, double variance) {
  const double r = y - mean;
  return -kLogSqrtTwoPi - 0.5 * std::log(variance) - 0.5 * r * r / variance;
}

// Normalizes each row of log-weights into probabilities using max
// subtraction, so rows with every weight underflowing in linear space still
// produce a valid distribution. Returns sum_i log sum_j exp(log_weights(i,j)).
double normalize_log_weights(const Eigen::MatrixXd& log_weights,
                             PosteriorMatrix& posteriors);

// True when every entry lies in [0,1] and every row sums to 1 within tol.
bool is_posterior_matrix(const Eigen::MatrixXd& p, double tol = 1e-10);

// 1e-8 times the sample variance of y (or a tiny absolute value for
// constant y); guards against the unbounded-likelihood degeneracy.
double variance_floor_for(const Eigen::VectorXd& y);

std::vector<int> hard_labels(const PosteriorMatrix& posteriors);

}  // namespace simix
