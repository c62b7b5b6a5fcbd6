#pragma once

#include <vector>

#include <Eigen/Dense>

namespace simix {

/// Unit-norm direction whose first entry above 1e-12 in magnitude is
/// positive. Only normalize_index creates non-empty values; a
/// default-constructed IndexVector is an empty placeholder.
class IndexVector {
 public:
  IndexVector() = default;

  const Eigen::VectorXd& coefficients() const noexcept { return coef_; }
  Eigen::Index size() const noexcept { return coef_.size(); }
  bool empty() const noexcept { return coef_.size() == 0; }
  double operator[](Eigen::Index i) const { return coef_[i]; }

  /// Index values X * alpha.
  Eigen::VectorXd project(const Eigen::MatrixXd& X) const;

  friend IndexVector normalize_index(const Eigen::VectorXd& raw);

 private:
  explicit IndexVector(Eigen::VectorXd coef) : coef_(std::move(coef)) {}
  Eigen::VectorXd coef_;
};

IndexVector normalize_index(const Eigen::VectorXd& raw);

/// Angle in radians between two directions.
double angle_between(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

inline constexpr int kDefaultSlices = 10;

struct SirResult {
  IndexVector direction;
  // Eigenvalues of the weighted slice-mean covariance in standardized
  // coordinates, descending. The leading one measures signal strength.
  Eigen::VectorXd eigenvalues;
};

/// Sliced inverse regression with slices formed from y-order quantiles.
SirResult sir_analyze(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      int n_slices = kDefaultSlices);
IndexVector sir_direction(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          int n_slices = kDefaultSlices);

/// SIR with one slice per label group. Labels are 0-based in [0, k).
IndexVector sir_from_labels(const Eigen::MatrixXd& X, const std::vector<int>& labels, int k);

}  // namespace simix
