#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace simix {

enum class Kernel { gaussian, epanechnikov };

inline constexpr std::size_t kDefaultGridSize = 100;

/// K(u/h)/h. Throws invalid_bandwidth for h <= 0 or non-finite h.
double kernel_weight(double offset, double bandwidth, Kernel kernel = Kernel::gaussian);

/// Strictly increasing evaluation points u_1 < ... < u_N with N >= 2.
/// A default-constructed grid is empty and only serves as a placeholder.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<double> points);

  const std::vector<double>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t t) const { return points_[t]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }

  // Mirror image u -> -u, reordered so points stay ascending.
  Grid reflected() const;

 private:
  std::vector<double> points_;
};

/// N equally spaced points spanning [min, max] of the index values.
Grid build_grid(const Eigen::VectorXd& index_values, std::size_t count = kDefaultGridSize);

/// Piecewise-linear interpolation, clamped to the endpoint values outside
/// the grid.
double interpolate(const Grid& grid, const Eigen::VectorXd& values, double query);

// Precomputed segment positions for a fixed set of queries. Evaluating many
// curves at the same index values reuses one binary search per query.
class InterpolationPlan {
 public:
  InterpolationPlan(const Grid& grid, const Eigen::VectorXd& queries);

  Eigen::Index queries() const noexcept { return static_cast<Eigen::Index>(lower_.size()); }

  // values: N x k (one curve per column); returns queries x k.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& values) const;
  // Slope of the active segment at each query (zero in the clamped region).
  Eigen::MatrixXd slopes(const Eigen::MatrixXd& values) const;

 private:
  std::vector<Eigen::Index> lower_;
  std::vector<double> fraction_;
  std::vector<double> inverse_width_;
  std::vector<bool> clamped_;
};

double weighted_local_average(const Eigen::VectorXd& centers, const Eigen::VectorXd& values,
                              const Eigen::VectorXd& weights, double z, double bandwidth,
                              Kernel kernel = Kernel::gaussian);

/// W(t, i) = K_h(centers_i - u_t); N x n.
Eigen::MatrixXd kernel_matrix(const Grid& grid, const Eigen::VectorXd& centers, double bandwidth,
                              Kernel kernel = Kernel::gaussian);

/// Per-component curves pi_j(u_t), m_j(u_t), sigma_j^2(u_t) on a grid.
/// Mixtures with linear component means only populate `proportions`; the
/// other two matrices are then empty.
struct CurveSet {
  Grid grid;
  Eigen::MatrixXd proportions;  // N x k
  Eigen::MatrixXd means;        // N x k or empty
  Eigen::MatrixXd variances;    // N x k or empty

  Eigen::Index components() const noexcept { return proportions.cols(); }
  bool has_means() const noexcept { return means.size() > 0; }

  // Curves carried to another grid by interpolation.
  CurveSet resampled(const Grid& target) const;
  // Curves expressed in the reflected index -u.
  CurveSet reflected() const;
  // Largest absolute difference over every populated slot; grids must match.
  double max_abs_difference(const CurveSet& other) const;
};

/// Checks the CurveSet invariants: rows on the simplex, variances positive.
bool is_valid_curve_set(const CurveSet& curves, double tol = 1e-10);

}  // namespace simix
