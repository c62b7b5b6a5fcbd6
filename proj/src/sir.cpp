#include "simix/sir.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "simix/error.hpp"

namespace simix {

namespace {

using Slices = std::vector<std::vector<Eigen::Index>>;

// Whitening transform: returns Sigma^{-1/2} of the sample covariance, or
// throws when an eigenvalue falls below 1e-10 of the largest.
Eigen::MatrixXd inverse_sqrt_covariance(const Eigen::MatrixXd& centered) {
  const auto n = static_cast<double>(centered.rows());
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    fail(ErrorKind::rank_deficiency, "eigendecomposition of the predictor covariance failed");
  }
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double largest = lambda.maxCoeff();
  if (!(largest > 0.0) || lambda.minCoeff() < 1e-10 * largest) {
    fail(ErrorKind::rank_deficiency, "predictor covariance is singular");
  }
  return eig.eigenvectors() * lambda.cwiseInverse().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

SirResult sir_from_slices(const Eigen::MatrixXd& X, const Slices& slices) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (p == 0) fail(ErrorKind::shape, "SIR needs at least one predictor");
  if (n <= p) fail(ErrorKind::shape, "SIR needs more observations than predictors");

  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  const Eigen::MatrixXd whitening = inverse_sqrt_covariance(centered);
  const Eigen::MatrixXd standardized = centered * whitening;

  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(p, p);
  for (const auto& members : slices) {
    Eigen::VectorXd slice_mean = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i : members) slice_mean += standardized.row(i).transpose();
    slice_mean /= static_cast<double>(members.size());
    between += (static_cast<double>(members.size()) / static_cast<double>(n)) *
               slice_mean * slice_mean.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(between);
  if (eig.info() != Eigen::Success) {
    fail(ErrorKind::rank_deficiency, "eigendecomposition of the slice-mean covariance failed");
  }
  // Eigen sorts ascending.
  const Eigen::VectorXd leading = eig.eigenvectors().col(p - 1);
  SirResult result;
  result.eigenvalues = eig.eigenvalues().reverse();
  result.direction = normalize_index(whitening * leading);
  return result;
}

}  // namespace

Eigen::VectorXd IndexVector::project(const Eigen::MatrixXd& X) const {
  if (X.cols() != coef_.size()) {
    fail(ErrorKind::shape, "predictor matrix has " + std::to_string(X.cols()) +
                               " columns but the index has " + std::to_string(coef_.size()));
  }
  return X * coef_;
}

IndexVector normalize_index(const Eigen::VectorXd& raw) {
  const double norm = raw.norm();
  if (!(norm > 1e-12) || !std::isfinite(norm)) {
    fail(ErrorKind::degenerate_index, "index vector has (near) zero norm");
  }
  Eigen::VectorXd unit = raw / norm;
  for (Eigen::Index i = 0; i < unit.size(); ++i) {
    if (std::abs(unit[i]) > 1e-12) {
      if (unit[i] < 0.0) unit = -unit;
      break;
    }
  }
  return IndexVector(std::move(unit));
}

double angle_between(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

SirResult sir_analyze(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n_slices) {
  if (X.rows() != y.size()) fail(ErrorKind::shape, "X and y have different numbers of rows");
  if (n_slices < 2) fail(ErrorKind::slicing, "SIR needs at least two slices");
  const Eigen::Index n = y.size();
  if (n < n_slices) fail(ErrorKind::slicing, "fewer observations than slices");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });

  Slices slices(static_cast<std::size_t>(n_slices));
  for (int s = 0; s < n_slices; ++s) {
    const auto begin = static_cast<std::size_t>(static_cast<long long>(s) * n / n_slices);
    const auto end = static_cast<std::size_t>(static_cast<long long>(s + 1) * n / n_slices);
    slices[static_cast<std::size_t>(s)].assign(order.begin() + static_cast<long>(begin),
                                               order.begin() + static_cast<long>(end));
  }
  return sir_from_slices(X, slices);
}

IndexVector sir_direction(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n_slices) {
  return sir_analyze(X, y, n_slices).direction;
}

IndexVector sir_from_labels(const Eigen::MatrixXd& X, const std::vector<int>& labels, int k) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    fail(ErrorKind::shape, "one label per observation is required");
  }
  if (k < 2) fail(ErrorKind::slicing, "label slicing needs at least two groups");
  Slices slices(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) fail(ErrorKind::slicing, "label out of range");
    slices[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  }
  for (int j = 0; j < k; ++j) {
    if (slices[static_cast<std::size_t>(j)].empty()) {
      fail(ErrorKind::slicing, "label group " + std::to_string(j) + " is empty");
    }
  }
  return sir_from_slices(X, slices).direction;
}

}  // namespace simix
