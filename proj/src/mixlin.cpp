#include "simix/mixlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "simix/error.hpp"
#include "simix/rng.hpp"

namespace simix {

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& X, bool intercept) {
  if (!intercept) return X;
  Eigen::MatrixXd design(X.rows(), X.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(X.cols()) = X;
  return design;
}

LinearMixtureParams weighted_regression_update(const PosteriorMatrix& posteriors,
                                               const Eigen::MatrixXd& design,
                                               const Eigen::VectorXd& y, double variance_floor,
                                               int* clamped) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  const Eigen::Index k = posteriors.cols();
  if (posteriors.rows() != n || y.size() != n) {
    fail(ErrorKind::shape, "posteriors, design and response disagree on the number of rows");
  }
  LinearMixtureParams out;
  out.coefficients.resize(k, q);
  out.variances.resize(k);
  out.proportions.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::VectorXd w = posteriors.col(j);
    const double mass = w.sum();
    if (mass < static_cast<double>(q)) {
      fail(ErrorKind::component_collapse,
           "component " + std::to_string(j) + " has effective weight " + std::to_string(mass) +
               " below the " + std::to_string(q) + " coefficients it must estimate");
    }
    const Eigen::MatrixXd weighted = design.array().colwise() * w.array();
    const Eigen::MatrixXd gram = design.transpose() * weighted;
    const Eigen::VectorXd rhs = weighted.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13)) {
      fail(ErrorKind::component_collapse,
           "weighted Gram matrix of component " + std::to_string(j) + " is singular");
    }
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    const Eigen::VectorXd resid = y - design * beta;
    double var = (w.array() * resid.array().square()).sum() / mass;
    if (!(var >= variance_floor)) {
      var = variance_floor;
      if (clamped) ++*clamped;
    }
    out.coefficients.row(j) = beta.transpose();
    out.variances[j] = var;
    out.proportions[j] = mass / static_cast<double>(n);
  }
  return out;
}

Eigen::MatrixXd component_log_densities(const LinearMixtureParams& params,
                                        const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (design.cols() != params.coefficients.cols()) {
    fail(ErrorKind::shape, "design has " + std::to_string(design.cols()) +
                               " columns, coefficients expect " +
                               std::to_string(params.coefficients.cols()));
  }
  const Eigen::Index k = params.components();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(params.variances[j] > 0.0)) fail(ErrorKind::domain, "component variance must be positive");
  }
  const Eigen::MatrixXd means = design * params.coefficients.transpose();
  Eigen::MatrixXd out(design.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      out(i, j) = log_normal_density(y[i], means(i, j), params.variances[j]);
    }
  }
  return out;
}

namespace {

double estep(const LinearMixtureParams& params, const Eigen::MatrixXd& design,
             const Eigen::VectorXd& y, PosteriorMatrix& posteriors) {
  Eigen::MatrixXd logw = component_log_densities(params, design, y);
  for (Eigen::Index j = 0; j < params.components(); ++j) {
    logw.col(j).array() += std::log(params.proportions[j]);
  }
  return normalize_log_weights(logw, posteriors);
}

MixLinFit run_em(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                 LinearMixtureParams params, const MixLinOptions& options, double floor) {
  MixLinFit fit;
  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iter; ++it) {
    const double ll = estep(params, design, y, fit.posteriors);
    fit.loglik_trace.push_back(ll);
    fit.iterations = it;
    if (it > 1 && std::abs(ll - previous) < options.tol * std::abs(previous)) {
      fit.converged = true;
      break;
    }
    previous = ll;
    const bool intercept = params.intercept;
    params = weighted_regression_update(fit.posteriors, design, y, floor, &fit.variance_clamps);
    params.intercept = intercept;
  }
  if (!fit.converged) fit.loglik_trace.push_back(estep(params, design, y, fit.posteriors));
  fit.loglik = fit.loglik_trace.back();
  fit.params = std::move(params);
  return fit;
}

}  // namespace

MixLinFit fit_mixlinreg(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k,
                        const MixLinOptions& options) {
  if (k < 1) fail(ErrorKind::invalid_argument, "number of components must be at least 1");
  if (X.rows() != y.size()) fail(ErrorKind::shape, "X and y have different numbers of rows");
  const Eigen::MatrixXd design = design_matrix(X, options.intercept);
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  if (q == 0) fail(ErrorKind::shape, "the regression has no columns");
  if (n <= static_cast<Eigen::Index>(k) * q) {
    fail(ErrorKind::shape, "need more than k*q observations to fit a mixture of regressions");
  }
  const double floor = variance_floor_for(y);

  MixLinFit best;
  bool have_best = false;
  int failed = 0;
  const int starts = k == 1 ? 1 : std::max(1, options.starts);
  Error last_error(ErrorKind::component_collapse, "no EM start succeeded");
  for (int s = 0; s < starts; ++s) {
    Rng rng = make_stream(options.seed, "mixlin-start", {static_cast<std::uint64_t>(s)});
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    PosteriorMatrix partition = PosteriorMatrix::Zero(n, k);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      partition(order[pos], static_cast<Eigen::Index>(pos % static_cast<std::size_t>(k))) = 1.0;
    }
    try {
      LinearMixtureParams init = weighted_regression_update(partition, design, y, floor);
      init.proportions.setConstant(1.0 / k);
      init.intercept = options.intercept;
      MixLinFit fit = run_em(design, y, std::move(init), options, floor);
      if (!have_best || fit.loglik > best.loglik) {
        best = std::move(fit);
        have_best = true;
      }
    } catch (const Error& e) {
      ++failed;
      last_error = e;
    }
  }
  if (!have_best) throw last_error;
  best.failed_starts = failed;
  return best;
}

double loglik_mixlin(const LinearMixtureParams& params, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) fail(ErrorKind::shape, "X and y have different numbers of rows");
  const Eigen::MatrixXd design = design_matrix(X, params.intercept);
  PosteriorMatrix unused;
  return estep(params, design, y, unused);
}

}  // namespace simix
