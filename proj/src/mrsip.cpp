#include "simix/mrsip.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "simix/error.hpp"
#include "simix/rng.hpp"

namespace simix {

namespace {

Eigen::MatrixXd mstep_pi_with_kernel(const PosteriorMatrix& posteriors, const Grid& grid,
                                     const Eigen::MatrixXd& weights) {
  const Eigen::VectorXd total = weights.rowwise().sum();
  for (Eigen::Index t = 0; t < total.size(); ++t) {
    if (!(total[t] >= 1e-12)) {
      fail(ErrorKind::starved_neighborhood,
           "no kernel mass at grid point " + std::to_string(t) + " (u = " +
               std::to_string(grid[static_cast<std::size_t>(t)]) + ")");
    }
  }
  return (weights * posteriors).array().colwise() / total.array();
}

Eigen::MatrixXd proportions_at(const CurveSet& curves, const Eigen::VectorXd& z) {
  return floor_proportions(InterpolationPlan(curves.grid, z).apply(curves.proportions));
}

CurveSet constant_curves(const Grid& grid, const Eigen::VectorXd& proportions) {
  CurveSet curves;
  curves.grid = grid;
  curves.proportions = proportions.transpose().replicate(static_cast<Eigen::Index>(grid.size()), 1);
  return curves;
}

}  // namespace

Eigen::MatrixXd floor_proportions(const Eigen::MatrixXd& proportions, double floor) {
  Eigen::MatrixXd out = proportions.cwiseMax(floor).cwiseMin(1.0 - floor);
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
  return out;
}

PosteriorMatrix estep_mrsip(const Eigen::MatrixXd& pi_at_obs, const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& y, const LinearMixtureParams& linear,
                            double* loglik) {
  if (pi_at_obs.rows() != y.size() || pi_at_obs.cols() != linear.components()) {
    fail(ErrorKind::shape, "proportions do not match observations and components");
  }
  Eigen::MatrixXd logw = component_log_densities(linear, design, y);
  logw.array() += floor_proportions(pi_at_obs).array().log();
  PosteriorMatrix posteriors;
  const double ll = normalize_log_weights(logw, posteriors);
  if (loglik) *loglik = ll;
  return posteriors;
}

Eigen::MatrixXd mstep_pi(const PosteriorMatrix& posteriors, const Eigen::VectorXd& index_values,
                         const Grid& grid, double bandwidth, Kernel kernel) {
  if (posteriors.rows() != index_values.size()) {
    fail(ErrorKind::shape, "posteriors and index values differ in length");
  }
  return mstep_pi_with_kernel(posteriors, grid, kernel_matrix(grid, index_values, bandwidth, kernel));
}

LinearMixtureParams update_beta_sigma(const PosteriorMatrix& posteriors,
                                      const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                      double variance_floor, int* clamped) {
  return weighted_regression_update(posteriors, design, y, variance_floor, clamped);
}

double mrsip_index_objective(const Eigen::MatrixXd& X_index, const Eigen::MatrixXd& design,
                             const Eigen::VectorXd& y, const CurveSet& proportion_curves,
                             const LinearMixtureParams& linear, const Eigen::VectorXd& alpha) {
  if (X_index.cols() != alpha.size()) fail(ErrorKind::shape, "index length does not match predictors");
  double ll = 0.0;
  estep_mrsip(proportions_at(proportion_curves, X_index * alpha), design, y, linear, &ll);
  return ll;
}

Eigen::VectorXd mrsip_index_gradient(const Eigen::MatrixXd& X_index, const Eigen::MatrixXd& design,
                                     const Eigen::VectorXd& y, const CurveSet& proportion_curves,
                                     const LinearMixtureParams& linear, const Eigen::VectorXd& alpha) {
  if (X_index.cols() != alpha.size()) fail(ErrorKind::shape, "index length does not match predictors");
  const Eigen::VectorXd z = X_index * alpha;
  const InterpolationPlan plan(proportion_curves.grid, z);
  const Eigen::MatrixXd pi = floor_proportions(plan.apply(proportion_curves.proportions));
  const Eigen::MatrixXd dpi = plan.slopes(proportion_curves.proportions);
  const PosteriorMatrix w = estep_mrsip(pi, design, y, linear);
  Eigen::VectorXd dz(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    dz[i] = (w.row(i).array() * dpi.row(i).array() / pi.row(i).array()).sum();
  }
  return X_index.transpose() * dz;
}

ProfileResult profile_index_mrsip(const Eigen::MatrixXd& X_index, const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& y, const CurveSet& proportion_curves,
                                  const LinearMixtureParams& linear, const IndexVector& start,
                                  const IndexSearchOptions& options) {
  return maximize_over_sphere(
      [&](const Eigen::VectorXd& alpha) {
        return mrsip_index_objective(X_index, design, y, proportion_curves, linear, alpha);
      },
      start, options);
}

MrsipFit fit_mrsip(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k, double bandwidth,
                   const MrsipOptions& options) {
  if (X.rows() != y.size()) fail(ErrorKind::shape, "X and y have different numbers of rows");
  if (k < 1) fail(ErrorKind::invalid_argument, "number of components must be at least 1");
  if (X.cols() < 1) fail(ErrorKind::shape, "the index needs at least one predictor");
  if (X.rows() <= X.cols() + 1) fail(ErrorKind::shape, "need more than p+1 observations");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    fail(ErrorKind::invalid_bandwidth, "bandwidth must be positive and finite");
  }

  const Eigen::MatrixXd design = design_matrix(X, options.intercept);
  const double floor = variance_floor_for(y);
  MrsipFit fit;
  fit.bandwidth = bandwidth;
  fit.kernel = options.kernel;

  // Step 1: (beta, sigma^2) from a linear mixture, alpha from SIR on its
  // hard clustering.
  std::optional<PosteriorMatrix> init_posteriors;
  if (options.init_linear) {
    fit.linear = *options.init_linear;
    if (fit.linear.components() != k || fit.linear.coefficients.cols() != design.cols()) {
      fail(ErrorKind::shape, "initial linear parameters do not match k and the design");
    }
    if (fit.linear.proportions.size() != k) fit.linear.proportions = Eigen::VectorXd::Constant(k, 1.0 / k);
    fit.linear.intercept = options.intercept;
  } else {
    MixLinOptions lin;
    lin.starts = options.init_starts;
    lin.intercept = options.intercept;
    lin.seed = substream_seed(options.seed, "mrsip-init");
    MixLinFit init = fit_mixlinreg(X, y, k, lin);
    fit.linear = init.params;
    init_posteriors = std::move(init.posteriors);
  }
  if (options.init_index) {
    if (options.init_index->size() != X.cols()) {
      fail(ErrorKind::shape, "initial index length does not match the predictors");
    }
    fit.initial_index = *options.init_index;
  } else if (k == 1 || X.cols() == 1) {
    fit.initial_index = normalize_index(Eigen::VectorXd::Ones(X.cols()));
  } else {
    if (!init_posteriors) {
      PosteriorMatrix p;
      Eigen::MatrixXd logw = component_log_densities(fit.linear, design, y);
      for (Eigen::Index j = 0; j < k; ++j) logw.col(j).array() += std::log(fit.linear.proportions[j]);
      normalize_log_weights(logw, p);
      init_posteriors = std::move(p);
    }
    try {
      fit.initial_index = sir_from_labels(X, hard_labels(*init_posteriors), k);
    } catch (const Error& e) {
      fail(e.kind(), std::string("SIR on the linear-mixture clustering failed (") + e.what() +
                         "); supply an explicit initial index");
    }
  }

  IndexVector index = fit.initial_index;
  Eigen::VectorXd z = index.project(X);
  Grid grid = build_grid(z, options.grid_size);
  CurveSet curves = constant_curves(grid, fit.linear.proportions);

  double previous = -std::numeric_limits<double>::infinity();
  double ll = previous;
  for (int round = 1; round <= options.max_rounds; ++round) {
    fit.rounds = round;

    // Step 2: proportion curves given (alpha, beta, sigma^2).
    if (round > 1) {
      grid = build_grid(z, options.grid_size);
      curves = curves.resampled(grid);
    }
    {
      const Eigen::MatrixXd weights = kernel_matrix(grid, z, bandwidth, options.kernel);
      const InterpolationPlan plan(grid, z);
      for (int it = 0; it < options.curve_max_iter; ++it) {
        const PosteriorMatrix p =
            estep_mrsip(floor_proportions(plan.apply(curves.proportions)), design, y, fit.linear);
        Eigen::MatrixXd next = mstep_pi_with_kernel(p, grid, weights);
        const double delta = (next - curves.proportions).cwiseAbs().maxCoeff();
        curves.proportions = std::move(next);
        if (delta < options.curve_tol) break;
      }
    }

    // Step 3: alternate the (beta, sigma^2) EM and the index search.
    for (int alt = 1; alt <= options.max_alternations; ++alt) {
      ++fit.alternations;
      const Eigen::MatrixXd pi_obs = proportions_at(curves, z);
      std::vector<double> trace;
      for (int it = 0; it < options.inner_em_max_iter; ++it) {
        double inner = 0.0;
        const PosteriorMatrix p = estep_mrsip(pi_obs, design, y, fit.linear, &inner);
        if (!trace.empty() &&
            std::abs(inner - trace.back()) < options.inner_em_tol * std::abs(trace.back())) {
          trace.push_back(inner);
          break;
        }
        trace.push_back(inner);
        const Eigen::VectorXd proportions = fit.linear.proportions;
        fit.linear = update_beta_sigma(p, design, y, floor, &fit.variance_clamps);
        fit.linear.proportions = proportions;
        fit.linear.intercept = options.intercept;
      }
      fit.inner_em_traces.push_back(std::move(trace));

      const ProfileResult step =
          profile_index_mrsip(X, design, y, curves, fit.linear, index, options.search);
      if (!step.improved) ++fit.index_non_improvements;
      if (step.flipped) curves = curves.reflected();
      const double change = (step.index.coefficients() - index.coefficients()).norm();
      index = step.index;
      z = index.project(X);
      if (change < options.index_tol) break;
    }

    ll = mrsip_index_objective(X, design, y, curves, fit.linear, index.coefficients());
    if (round > 1 && std::abs(ll - previous) < options.loglik_tol * std::abs(previous)) {
      fit.converged = true;
      break;
    }
    previous = ll;
  }
  if (fit.index_non_improvements > 0) {
    fit.notes.push_back("index search kept the previous index " +
                        std::to_string(fit.index_non_improvements) + " time(s)");
  }

  fit.index = index;
  fit.curves = std::move(curves);
  fit.loglik = ll;
  fit.posteriors = estep_mrsip(proportions_at(fit.curves, z), design, y, fit.linear);
  return fit;
}

Prediction predict_mrsip(const MrsipFit& fit, const Eigen::MatrixXd& X_new,
                         const std::optional<Eigen::VectorXd>& y) {
  const Eigen::VectorXd z = fit.index.project(X_new);
  const Eigen::MatrixXd pi = proportions_at(fit.curves, z);
  const Eigen::MatrixXd design = design_matrix(X_new, fit.linear.intercept);
  if (design.cols() != fit.linear.coefficients.cols()) {
    fail(ErrorKind::shape, "new data do not match the fitted design");
  }
  const Eigen::MatrixXd means = design * fit.linear.coefficients.transpose();
  Prediction out;
  if (y) {
    if (y->size() != X_new.rows()) fail(ErrorKind::shape, "response length does not match X_new");
    out.posteriors = estep_mrsip(pi, design, *y, fit.linear);
  } else {
    out.posteriors = pi;
  }
  out.fitted = out.posteriors.cwiseProduct(means).rowwise().sum();
  out.labels = hard_labels(out.posteriors);
  return out;
}

}  // namespace simix
