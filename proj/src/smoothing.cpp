#include "simix/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "simix/error.hpp"

namespace simix {

namespace {

void check_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    fail(ErrorKind::invalid_bandwidth, "bandwidth must be positive and finite, got " +
                                           std::to_string(h));
  }
}

inline double kernel_density(double u, Kernel kernel) {
  switch (kernel) {
    case Kernel::gaussian:
      return std::exp(-0.5 * u * u) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
    case Kernel::epanechnikov:
      return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  return 0.0;
}

Eigen::MatrixXd reverse_rows(const Eigen::MatrixXd& m) {
  return m.colwise().reverse();
}

}  // namespace

double kernel_weight(double offset, double bandwidth, Kernel kernel) {
  check_bandwidth(bandwidth);
  if (!std::isfinite(offset)) fail(ErrorKind::invalid_argument, "kernel offset must be finite");
  return kernel_density(offset / bandwidth, kernel) / bandwidth;
}

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 2) fail(ErrorKind::shape, "a grid needs at least two points");
  for (std::size_t t = 0; t < points_.size(); ++t) {
    if (!std::isfinite(points_[t])) fail(ErrorKind::invalid_argument, "grid points must be finite");
    if (t > 0 && !(points_[t] > points_[t - 1])) {
      fail(ErrorKind::invalid_argument, "grid points must be strictly increasing");
    }
  }
}

Grid Grid::reflected() const {
  std::vector<double> mirrored(points_.rbegin(), points_.rend());
  for (double& u : mirrored) u = -u;
  return Grid(std::move(mirrored));
}

Grid build_grid(const Eigen::VectorXd& index_values, std::size_t count) {
  if (index_values.size() == 0) fail(ErrorKind::empty_data, "cannot build a grid from no index values");
  if (count < 2) fail(ErrorKind::shape, "grid size must be at least 2");
  if (!index_values.allFinite()) fail(ErrorKind::invalid_argument, "index values must be finite");
  const double lo = index_values.minCoeff();
  const double hi = index_values.maxCoeff();
  if (!(hi > lo)) {
    fail(ErrorKind::degenerate_span, "all index values are equal; the index carries no information");
  }
  std::vector<double> points(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t t = 0; t < count; ++t) points[t] = lo + step * static_cast<double>(t);
  points.back() = hi;
  return Grid(std::move(points));
}

double interpolate(const Grid& grid, const Eigen::VectorXd& values, double query) {
  const auto& u = grid.points();
  if (static_cast<std::size_t>(values.size()) != u.size()) {
    fail(ErrorKind::shape, "interpolation values do not match the grid size");
  }
  if (query <= u.front()) return values[0];
  if (query >= u.back()) return values[values.size() - 1];
  const auto upper = std::upper_bound(u.begin(), u.end(), query);
  const auto lo = static_cast<Eigen::Index>(upper - u.begin()) - 1;
  const double t = (query - u[lo]) / (u[lo + 1] - u[lo]);
  return values[lo] + t * (values[lo + 1] - values[lo]);
}

InterpolationPlan::InterpolationPlan(const Grid& grid, const Eigen::VectorXd& queries) {
  const auto& u = grid.points();
  if (u.size() < 2) fail(ErrorKind::shape, "interpolation needs a grid with at least two points");
  const auto n = static_cast<std::size_t>(queries.size());
  lower_.resize(n);
  fraction_.resize(n);
  inverse_width_.resize(n);
  clamped_.resize(n);
  const auto last = static_cast<Eigen::Index>(u.size()) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = queries[static_cast<Eigen::Index>(i)];
    if (q <= u.front()) {
      lower_[i] = 0;
      fraction_[i] = 0.0;
      clamped_[i] = true;
    } else if (q >= u.back()) {
      lower_[i] = last - 1;
      fraction_[i] = 1.0;
      clamped_[i] = true;
    } else {
      const auto upper = std::upper_bound(u.begin(), u.end(), q);
      const auto lo = static_cast<Eigen::Index>(upper - u.begin()) - 1;
      lower_[i] = lo;
      fraction_[i] = (q - u[lo]) / (u[lo + 1] - u[lo]);
      clamped_[i] = false;
    }
    const Eigen::Index lo = lower_[i];
    inverse_width_[i] = 1.0 / (u[lo + 1] - u[lo]);
  }
}

Eigen::MatrixXd InterpolationPlan::apply(const Eigen::MatrixXd& values) const {
  const Eigen::Index n = queries();
  Eigen::MatrixXd out(n, values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const Eigen::Index lo = lower_[s];
      const double t = fraction_[s];
      out(i, j) = t == 0.0 ? values(lo, j)
                  : t == 1.0 ? values(lo + 1, j)
                             : values(lo, j) + t * (values(lo + 1, j) - values(lo, j));
    }
  }
  return out;
}

Eigen::MatrixXd InterpolationPlan::slopes(const Eigen::MatrixXd& values) const {
  const Eigen::Index n = queries();
  Eigen::MatrixXd out(n, values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const Eigen::Index lo = lower_[s];
      out(i, j) = clamped_[s] ? 0.0 : (values(lo + 1, j) - values(lo, j)) * inverse_width_[s];
    }
  }
  return out;
}

double weighted_local_average(const Eigen::VectorXd& centers, const Eigen::VectorXd& values,
                              const Eigen::VectorXd& weights, double z, double bandwidth,
                              Kernel kernel) {
  check_bandwidth(bandwidth);
  if (centers.size() != values.size() || centers.size() != weights.size()) {
    fail(ErrorKind::shape, "centers, values and weights must have equal lengths");
  }
  if (centers.size() == 0) fail(ErrorKind::empty_data, "no observations to average");
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < centers.size(); ++i) {
    const double w = weights[i] * kernel_density((centers[i] - z) / bandwidth, kernel) / bandwidth;
    num += w * values[i];
    den += w;
  }
  if (!(den > 1e-12)) {
    fail(ErrorKind::starved_neighborhood,
         "no kernel mass near z = " + std::to_string(z));
  }
  return num / den;
}

Eigen::MatrixXd kernel_matrix(const Grid& grid, const Eigen::VectorXd& centers, double bandwidth,
                              Kernel kernel) {
  check_bandwidth(bandwidth);
  const auto N = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd w(N, centers.size());
  const double inv_h = 1.0 / bandwidth;
  for (Eigen::Index i = 0; i < centers.size(); ++i) {
    for (Eigen::Index t = 0; t < N; ++t) {
      w(t, i) = kernel_density((centers[i] - grid[static_cast<std::size_t>(t)]) * inv_h, kernel) * inv_h;
    }
  }
  return w;
}

CurveSet CurveSet::resampled(const Grid& target) const {
  Eigen::VectorXd targets(static_cast<Eigen::Index>(target.size()));
  for (std::size_t t = 0; t < target.size(); ++t) targets[static_cast<Eigen::Index>(t)] = target[t];
  const InterpolationPlan plan(grid, targets);
  CurveSet out;
  out.grid = target;
  out.proportions = plan.apply(proportions);
  // Interpolating rows that sum to one keeps them on the simplex up to
  // rounding; renormalize to restore the invariant exactly.
  for (Eigen::Index t = 0; t < out.proportions.rows(); ++t) {
    out.proportions.row(t) /= out.proportions.row(t).sum();
  }
  if (has_means()) {
    out.means = plan.apply(means);
    out.variances = plan.apply(variances);
  }
  return out;
}

CurveSet CurveSet::reflected() const {
  CurveSet out;
  out.grid = grid.reflected();
  out.proportions = reverse_rows(proportions);
  if (has_means()) {
    out.means = reverse_rows(means);
    out.variances = reverse_rows(variances);
  }
  return out;
}

double CurveSet::max_abs_difference(const CurveSet& other) const {
  if (other.grid.size() != grid.size() || other.proportions.cols() != proportions.cols()) {
    fail(ErrorKind::shape, "curve sets differ in shape");
  }
  double d = (proportions - other.proportions).cwiseAbs().maxCoeff();
  if (has_means() && other.has_means()) {
    d = std::max(d, (means - other.means).cwiseAbs().maxCoeff());
    d = std::max(d, (variances - other.variances).cwiseAbs().maxCoeff());
  }
  return d;
}

bool is_valid_curve_set(const CurveSet& curves, double tol) {
  const auto N = static_cast<Eigen::Index>(curves.grid.size());
  if (N < 2 || curves.proportions.rows() != N) return false;
  for (Eigen::Index t = 0; t < N; ++t) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < curves.proportions.cols(); ++j) {
      const double p = curves.proportions(t, j);
      if (!(p >= 0.0 && p <= 1.0)) return false;
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  if (curves.has_means()) {
    if (curves.means.rows() != N || curves.variances.rows() != N) return false;
    if (!curves.means.allFinite()) return false;
    if (!(curves.variances.array() > 0.0).all()) return false;
  }
  return true;
}

}  // namespace simix
