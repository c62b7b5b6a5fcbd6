#pragma once

#include <functional>

#include <Eigen/Dense>

namespace simix {

struct NelderMeadOptions {
  double initial_step = 0.1;
  int max_evaluations = 2000;
  double f_tol = 1e-10;   // relative spread of simplex values
  double x_tol = 1e-8;    // simplex diameter, infinity norm
  int restarts = 1;       // fresh simplex around the best point after convergence
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f by the Nelder-Mead simplex method. The starting point is a
/// simplex vertex and the best vertex is never discarded, so the returned
/// value never exceeds f(start).
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& options = {});

}  // namespace simix
