#include "simix/density.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "simix/error.hpp"

namespace simix {

double normalize_log_weights(const Eigen::MatrixXd& log_weights,
                             PosteriorMatrix& posteriors) {
  const Eigen::Index n = log_weights.rows();
  const Eigen::Index k = log_weights.cols();
  posteriors.resize(n, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = log_weights.row(i).maxCoeff();
    if (!std::isfinite(top)) {
      fail(ErrorKind::domain, "observation " + std::to_string(i) +
                                  " has no finite component density");
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double w = std::exp(log_weights(i, j) - top);
      posteriors(i, j) = w;
      sum += w;
    }
    posteriors.row(i) /= sum;
    total += top + std::log(sum);
  }
  return total;
}

bool is_posterior_matrix(const Eigen::MatrixXd& p, double tol) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double v = p(i, j);
      if (!(v >= 0.0 && v <= 1.0)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

double variance_floor_for(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 1e-300;
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size());
  return var > 0.0 ? 1e-8 * var : 1e-300;
}

std::vector<int> hard_labels(const PosteriorMatrix& posteriors) {
  std::vector<int> labels(static_cast<std::size_t>(posteriors.rows()));
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    Eigen::Index best = 0;
    posteriors.row(i).maxCoeff(&best);
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace simix
