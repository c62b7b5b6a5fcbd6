#include "simix/msim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "simix/error.hpp"
#include "simix/rng.hpp"

namespace simix {

namespace {

CurveValues evaluate_with(const InterpolationPlan& plan, const CurveSet& curves) {
  CurveValues out;
  out.proportions = plan.apply(curves.proportions);
  out.means = plan.apply(curves.means);
  out.variances = plan.apply(curves.variances);
  return out;
}

void check_posteriors(const PosteriorMatrix& posteriors, Eigen::Index n) {
  if (posteriors.rows() != n) {
    fail(ErrorKind::shape, "posterior matrix has " + std::to_string(posteriors.rows()) +
                               " rows for " + std::to_string(n) + " observations");
  }
  if (posteriors.cols() < 1) fail(ErrorKind::shape, "posterior matrix has no components");
}

CurveSet mstep_with_kernel(const PosteriorMatrix& posteriors, const Eigen::VectorXd& y,
                           const Grid& grid, const Eigen::MatrixXd& weights, double floor) {
  const Eigen::Index N = weights.rows();
  const Eigen::Index n = weights.cols();
  const Eigen::Index k = posteriors.cols();

  const Eigen::VectorXd total = weights.rowwise().sum();
  const Eigen::MatrixXd mass = weights * posteriors;
  const Eigen::MatrixXd weighted_y = weights * (posteriors.array().colwise() * y.array()).matrix();

  for (Eigen::Index t = 0; t < N; ++t) {
    const auto where = " at grid point " + std::to_string(t) + " (u = " +
                       std::to_string(grid[static_cast<std::size_t>(t)]) + ")";
    if (!(total[t] >= 1e-12)) fail(ErrorKind::starved_neighborhood, "no kernel mass" + where);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!(mass(t, j) >= 1e-12)) {
        fail(ErrorKind::starved_neighborhood,
             "component " + std::to_string(j) + " has no kernel-weighted mass" + where);
      }
    }
  }

  CurveSet curves;
  curves.grid = grid;
  curves.proportions = mass.array().colwise() / total.array();
  curves.means = weighted_y.array() / mass.array();
  curves.variances = Eigen::MatrixXd::Zero(N, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pij = posteriors(i, j);
      if (pij == 0.0) continue;
      const double yi = y[i];
      for (Eigen::Index t = 0; t < N; ++t) {
        const double r = yi - curves.means(t, j);
        curves.variances(t, j) += weights(t, i) * pij * r * r;
      }
    }
  }
  curves.variances.array() /= mass.array();
  curves.variances = curves.variances.cwiseMax(floor);
  return curves;
}

struct EmContext {
  const Eigen::VectorXd& y;
  const Grid& grid;
  Eigen::MatrixXd weights;
  InterpolationPlan plan;
  double floor;
};

ModifiedEmResult iterate(const EmContext& ctx, CurveSet curves, const ModifiedEmOptions& options) {
  ModifiedEmResult result;
  double ll = 0.0;
  for (int it = 1; it <= options.max_iter; ++it) {
    result.posteriors = estep_msim(ctx.y, evaluate_with(ctx.plan, curves), &ll);
    if (!result.loglik_trace.empty() &&
        ll < result.loglik_trace.back() - 1e-9 * std::abs(result.loglik_trace.back())) {
      ++result.loglik_decreases;
    }
    result.loglik_trace.push_back(ll);
    CurveSet next = mstep_with_kernel(result.posteriors, ctx.y, ctx.grid, ctx.weights, ctx.floor);
    const double delta = curves.max_abs_difference(next);
    curves = std::move(next);
    result.iterations = it;
    if (delta < options.tol) {
      result.converged = true;
      break;
    }
  }
  // Final E-step so the returned posteriors belong to the returned curves.
  result.posteriors = estep_msim(ctx.y, evaluate_with(ctx.plan, curves), &ll);
  result.loglik_trace.push_back(ll);
  result.curves = std::move(curves);
  return result;
}

EmContext make_context(const Eigen::VectorXd& z, const Eigen::VectorXd& y, const Grid& grid,
                       double bandwidth, Kernel kernel) {
  if (z.size() != y.size()) fail(ErrorKind::shape, "index values and response differ in length");
  return EmContext{y, grid, kernel_matrix(grid, z, bandwidth, kernel), InterpolationPlan(grid, z),
                   variance_floor_for(y)};
}

PosteriorMatrix random_posteriors(Eigen::Index n, Eigen::Index k, Rng& rng) {
  std::exponential_distribution<double> draw(1.0);
  PosteriorMatrix p(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) p(i, j) = draw(rng);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

// Hard responsibilities from the rank of y_i among its nearest neighbours in
// z: the lowest 1/k of a neighbourhood goes to component 0 and so on.
PosteriorMatrix local_rank_posteriors(const Eigen::VectorXd& z, const Eigen::VectorXd& y, int k) {
  const Eigen::Index n = y.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return z[a] < z[b]; });
  const Eigen::Index width = std::min<Eigen::Index>(n, std::max<Eigen::Index>(5 * k, n / 10));
  PosteriorMatrix out = PosteriorMatrix::Zero(n, k);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    const Eigen::Index lo = std::clamp<Eigen::Index>(pos - width / 2, 0, n - width);
    const Eigen::Index i = order[static_cast<std::size_t>(pos)];
    Eigen::Index below = 0;
    for (Eigen::Index q = lo; q < lo + width; ++q) {
      if (y[order[static_cast<std::size_t>(q)]] < y[i]) ++below;
    }
    const auto label = std::min<Eigen::Index>(k - 1, below * k / width);
    out(i, label) = 1.0;
  }
  return out;
}

// Modified EM from two starting clusterings, a linear mixture fitted on
// (z, y) and local y-ranks, keeping the higher final log-likelihood; random
// responsibilities when both fail.
ModifiedEmResult initial_curve_fit(const Eigen::VectorXd& z, const Eigen::VectorXd& y, int k,
                                   const Grid& grid, double bandwidth, const MsimOptions& options,
                                   std::vector<std::string>& notes) {
  const Eigen::Index n = y.size();
  if (k == 1) {
    return run_modified_em(z, y, grid, bandwidth, PosteriorMatrix::Ones(n, 1), options.em);
  }
  std::optional<ModifiedEmResult> best;
  auto consider = [&](ModifiedEmResult em) {
    if (!best || em.loglik_trace.back() > best->loglik_trace.back()) best = std::move(em);
  };
  try {
    MixLinOptions lin;
    lin.starts = options.init_starts;
    lin.seed = substream_seed(options.seed, "msim-init");
    const MixLinFit init = fit_mixlinreg(z, y, k, lin);
    consider(run_modified_em(z, y, grid, bandwidth, init.posteriors, options.em));
  } catch (const Error& e) {
    notes.push_back(std::string("linear-mixture start failed (") + e.what() + ")");
  }
  try {
    consider(run_modified_em(z, y, grid, bandwidth, local_rank_posteriors(z, y, k), options.em));
  } catch (const Error& e) {
    notes.push_back(std::string("local-rank start failed (") + e.what() + ")");
  }
  if (best) return std::move(*best);
  notes.push_back("using random responsibilities");
  std::optional<Error> last;
  for (int r = 0; r < std::max(1, options.random_restarts); ++r) {
    Rng rng = make_stream(options.seed, "msim-random-init", {static_cast<std::uint64_t>(r)});
    try {
      consider(run_modified_em(z, y, grid, bandwidth, random_posteriors(n, k, rng), options.em));
    } catch (const Error& e) {
      last = e;
    }
  }
  if (!best) throw *last;
  return std::move(*best);
}

}  // namespace

CurveValues evaluate_curves(const CurveSet& curves, const Eigen::VectorXd& index_values) {
  if (!curves.has_means()) fail(ErrorKind::shape, "curve set has no mean/variance curves");
  return evaluate_with(InterpolationPlan(curves.grid, index_values), curves);
}

PosteriorMatrix estep_msim(const Eigen::VectorXd& y, const CurveValues& at_obs, double* loglik) {
  const Eigen::Index n = y.size();
  const Eigen::Index k = at_obs.proportions.cols();
  if (at_obs.proportions.rows() != n || at_obs.means.rows() != n || at_obs.variances.rows() != n ||
      at_obs.means.cols() != k || at_obs.variances.cols() != k) {
    fail(ErrorKind::shape, "curve values do not match the observations");
  }
  Eigen::MatrixXd logw(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      logw(i, j) = std::log(at_obs.proportions(i, j)) +
                   log_normal_density(y[i], at_obs.means(i, j), at_obs.variances(i, j));
    }
  }
  PosteriorMatrix posteriors;
  const double ll = normalize_log_weights(logw, posteriors);
  if (loglik) *loglik = ll;
  return posteriors;
}

CurveSet mstep_msim(const PosteriorMatrix& posteriors, const Eigen::VectorXd& index_values,
                    const Eigen::VectorXd& y, const Grid& grid, double bandwidth, Kernel kernel) {
  check_posteriors(posteriors, y.size());
  if (index_values.size() != y.size()) {
    fail(ErrorKind::shape, "index values and response differ in length");
  }
  return mstep_with_kernel(posteriors, y, grid, kernel_matrix(grid, index_values, bandwidth, kernel),
                           variance_floor_for(y));
}

ModifiedEmResult run_modified_em(const Eigen::VectorXd& index_values, const Eigen::VectorXd& y,
                                 const Grid& grid, double bandwidth, const PosteriorMatrix& init,
                                 const ModifiedEmOptions& options) {
  check_posteriors(init, y.size());
  const EmContext ctx = make_context(index_values, y, grid, bandwidth, options.kernel);
  return iterate(ctx, mstep_with_kernel(init, y, grid, ctx.weights, ctx.floor), options);
}

ModifiedEmResult run_modified_em(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const IndexVector& index, double bandwidth, const Grid& grid,
                                 const PosteriorMatrix& init, const ModifiedEmOptions& options) {
  return run_modified_em(index.project(X), y, grid, bandwidth, init, options);
}

ModifiedEmResult run_modified_em_from_curves(const Eigen::VectorXd& index_values,
                                             const Eigen::VectorXd& y, const Grid& grid,
                                             double bandwidth, const CurveSet& start,
                                             const ModifiedEmOptions& options) {
  if (start.grid.size() != grid.size()) fail(ErrorKind::shape, "starting curves live on another grid");
  const EmContext ctx = make_context(index_values, y, grid, bandwidth, options.kernel);
  return iterate(ctx, start, options);
}

double msim_index_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const CurveSet& curves, const Eigen::VectorXd& alpha) {
  if (X.cols() != alpha.size()) fail(ErrorKind::shape, "index length does not match predictors");
  double ll = 0.0;
  estep_msim(y, evaluate_curves(curves, X * alpha), &ll);
  return ll;
}

Eigen::VectorXd msim_index_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const CurveSet& curves, const Eigen::VectorXd& alpha) {
  if (X.cols() != alpha.size()) fail(ErrorKind::shape, "index length does not match predictors");
  const Eigen::VectorXd z = X * alpha;
  const InterpolationPlan plan(curves.grid, z);
  const CurveValues v = evaluate_with(plan, curves);
  const Eigen::MatrixXd dpi = plan.slopes(curves.proportions);
  const Eigen::MatrixXd dm = plan.slopes(curves.means);
  const Eigen::MatrixXd ds = plan.slopes(curves.variances);
  const PosteriorMatrix w = estep_msim(y, v);

  Eigen::VectorXd dz = Eigen::VectorXd::Zero(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      const double s = v.variances(i, j);
      const double r = y[i] - v.means(i, j);
      const double dlog = dpi(i, j) / v.proportions(i, j) + r / s * dm(i, j) +
                          (0.5 * r * r / (s * s) - 0.5 / s) * ds(i, j);
      dz[i] += w(i, j) * dlog;
    }
  }
  return X.transpose() * dz;
}

ProfileResult maximize_over_sphere(const std::function<double(const Eigen::VectorXd&)>& objective,
                                   const IndexVector& start, const IndexSearchOptions& options) {
  ProfileResult result;
  result.index = start;
  result.start_objective = objective(start.coefficients());
  result.objective = result.start_objective;
  result.evaluations = 1;
  const Eigen::Index p = start.size();
  if (p < 2) return result;

  Eigen::Index pivot = 0;
  start.coefficients().cwiseAbs().maxCoeff(&pivot);
  const double scale = std::abs(start[pivot]);
  const double sign = start[pivot] > 0.0 ? 1.0 : -1.0;

  auto to_direction = [&](const Eigen::VectorXd& chart) {
    Eigen::VectorXd v(p);
    for (Eigen::Index i = 0, c = 0; i < p; ++i) v[i] = i == pivot ? sign : chart[c++];
    return Eigen::VectorXd(v / v.norm());
  };
  Eigen::VectorXd chart(p - 1);
  for (Eigen::Index i = 0, c = 0; i < p; ++i) {
    if (i != pivot) chart[c++] = start[i] / scale;
  }

  const NelderMeadResult nm = nelder_mead(
      [&](const Eigen::VectorXd& c) { return -objective(to_direction(c)); }, chart, options.simplex);
  result.evaluations += nm.evaluations;
  if (-nm.value > result.start_objective) {
    const Eigen::VectorXd raw = to_direction(nm.x);
    result.index = normalize_index(raw);
    result.flipped = result.index.coefficients().dot(raw) < 0.0;
    result.objective = -nm.value;
    result.improved = true;
  }
  return result;
}

ProfileResult profile_index_msim(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const CurveSet& curves, const IndexVector& start,
                                 const IndexSearchOptions& options) {
  if (X.rows() != y.size()) fail(ErrorKind::shape, "X and y have different numbers of rows");
  return maximize_over_sphere(
      [&](const Eigen::VectorXd& alpha) { return msim_index_objective(X, y, curves, alpha); }, start,
      options);
}

MsimFit fit_msim(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k, double bandwidth,
                 const MsimOptions& options) {
  if (X.rows() != y.size()) fail(ErrorKind::shape, "X and y have different numbers of rows");
  if (k < 1) fail(ErrorKind::invalid_argument, "number of components must be at least 1");
  if (X.rows() <= X.cols()) fail(ErrorKind::shape, "need more observations than predictors");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    fail(ErrorKind::invalid_bandwidth, "bandwidth must be positive and finite");
  }

  MsimFit fit;
  fit.bandwidth = bandwidth;
  fit.kernel = options.em.kernel;
  fit.mode = options.mode;
  if (options.init_index) {
    if (options.init_index->size() != X.cols()) {
      fail(ErrorKind::shape, "initial index length does not match the predictors");
    }
    fit.initial_index = *options.init_index;
  } else if (X.cols() == 1) {
    fit.initial_index = normalize_index(Eigen::VectorXd::Ones(1));
  } else {
    try {
      fit.initial_index = sir_direction(X, y, options.sir_slices);
    } catch (const Error& e) {
      fail(e.kind(), std::string("SIR initialization failed (") + e.what() +
                         "); supply an explicit initial index");
    }
  }

  IndexVector index = fit.initial_index;
  Eigen::VectorXd z = index.project(X);
  Grid grid = build_grid(z, options.grid_size);
  ModifiedEmResult em = initial_curve_fit(z, y, k, grid, bandwidth, options, fit.notes);
  fit.em_iterations = em.iterations;
  int decreases = em.loglik_decreases;
  bool converged = em.converged;

  if (options.mode == MsimMode::fib) {
    converged = false;
    for (int round = 1; round <= options.max_rounds; ++round) {
      fit.rounds = round;
      const ProfileResult step = profile_index_msim(X, y, em.curves, index, options.search);
      fit.index_evaluations += step.evaluations;
      if (step.flipped) em.curves = em.curves.reflected();
      const double change = (step.index.coefficients() - index.coefficients()).norm();
      index = step.index;
      if (change < options.index_tol) {
        converged = true;
        break;
      }
      z = index.project(X);
      grid = build_grid(z, options.grid_size);
      em = run_modified_em_from_curves(z, y, grid, bandwidth, em.curves.resampled(grid), options.em);
      fit.em_iterations += em.iterations;
      decreases += em.loglik_decreases;
    }
  }
  if (decreases > 0) {
    fit.notes.push_back("modified EM log-likelihood decreased on " + std::to_string(decreases) +
                        " iteration(s)");
  }

  fit.index = index;
  fit.curves = std::move(em.curves);
  fit.loglik = msim_index_objective(X, y, fit.curves, fit.index.coefficients());
  fit.posteriors = estep_msim(y, evaluate_curves(fit.curves, fit.index.project(X)));
  fit.converged = converged;
  return fit;
}

Prediction predict_msim(const MsimFit& fit, const Eigen::MatrixXd& X_new,
                        const std::optional<Eigen::VectorXd>& y) {
  const Eigen::VectorXd z = fit.index.project(X_new);
  const CurveValues v = evaluate_curves(fit.curves, z);
  Prediction out;
  if (y) {
    if (y->size() != X_new.rows()) fail(ErrorKind::shape, "response length does not match X_new");
    out.posteriors = estep_msim(*y, v);
  } else {
    out.posteriors = v.proportions;
    for (Eigen::Index i = 0; i < out.posteriors.rows(); ++i) {
      out.posteriors.row(i) /= out.posteriors.row(i).sum();
    }
  }
  out.fitted = out.posteriors.cwiseProduct(v.means).rowwise().sum();
  out.labels = hard_labels(out.posteriors);
  return out;
}

}  // namespace simix
