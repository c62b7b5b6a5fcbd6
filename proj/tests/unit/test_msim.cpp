#include <doctest.h>

#include <cmath>
#include <random>

#include "simix/msim.hpp"
#include "simix/simlab.hpp"
#include "support/expect.hpp"
#include "support/oracles.hpp"

using namespace simix;
using testing::kind_of;

namespace {

CurveValues constant_values(Eigen::Index n, const Eigen::RowVectorXd& pi, const Eigen::RowVectorXd& m,
                            const Eigen::RowVectorXd& v) {
  return CurveValues{pi.replicate(n, 1), m.replicate(n, 1), v.replicate(n, 1)};
}

// True Example 1 curves sampled on a grid.
CurveSet example1_curves(const Grid& grid) {
  CurveSet c;
  c.grid = grid;
  const auto N = static_cast<Eigen::Index>(grid.size());
  c.proportions.resize(N, 2);
  c.means.resize(N, 2);
  c.variances.resize(N, 2);
  for (Eigen::Index t = 0; t < N; ++t) {
    const double u = grid[static_cast<std::size_t>(t)];
    c.proportions.row(t) = example1_proportions(u);
    c.means.row(t) = example1_means(u);
    c.variances.row(t) = example1_variances(u);
  }
  return c;
}

Eigen::VectorXd tangent(const Eigen::VectorXd& g, const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd a = alpha / alpha.norm();
  return g - a * a.dot(g);
}

}  // namespace

TEST_CASE("E-step reductions") {
  Eigen::VectorXd y(3);
  y << -1.0, 0.5, 4.0;
  const PosteriorMatrix same = estep_msim(y, constant_values(3, Eigen::RowVector2d(0.5, 0.5),
                                                              Eigen::RowVector2d(1, 1), Eigen::RowVector2d(2, 2)));
  CHECK((same.array() == 0.5).all());
  const PosteriorMatrix one = estep_msim(y, constant_values(3, Eigen::RowVectorXd::Ones(1),
                                                             Eigen::RowVectorXd::Zero(1), Eigen::RowVectorXd::Ones(1)));
  CHECK((one.array() == 1.0).all());
}

TEST_CASE("E-step far tail in log space") {
  double ll = 0.0;
  const PosteriorMatrix p = estep_msim(Eigen::VectorXd::Zero(1),
                                       constant_values(1, Eigen::RowVector2d(0.3, 0.7), Eigen::RowVector2d(0, 10),
                                                       Eigen::RowVector2d(1, 1)),
                                       &ll);
  // p2 = 0.7 phi(10) / (0.3 phi(0) + 0.7 phi(10)) = (7/3) e^-50 / (1 + (7/3) e^-50).
  const double ratio = 7.0 / 3.0 * std::exp(-50.0);
  CHECK(std::abs(p(0, 1) - ratio / (1.0 + ratio)) <= 1e-12 * ratio);
  CHECK(std::abs(p(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(ll - std::log(0.3 * oracle::normal_pdf(0, 0, 1) + 0.7 * oracle::normal_pdf(0, 10, 1))) < 1e-12);

  // Every density underflows in linear space; the row still normalizes.
  const PosteriorMatrix q = estep_msim(Eigen::VectorXd::Constant(1, 1e4),
                                       constant_values(1, Eigen::RowVector2d(0.5, 0.5), Eigen::RowVector2d(0, 1),
                                                       Eigen::RowVector2d(1, 1)));
  CHECK(q.allFinite());
  CHECK(std::abs(q.sum() - 1.0) < 1e-12);
  CHECK(q(0, 1) > 0.99);
}

TEST_CASE("M-step closed forms on a tiny instance") {
  Eigen::VectorXd z(4), y(4);
  z << 0.1, 0.3, 0.55, 0.9;
  y << 1.0, -0.5, 2.0, 0.25;
  Eigen::MatrixXd P(4, 2);
  P << 0.9, 0.1, 0.4, 0.6, 0.25, 0.75, 0.5, 0.5;
  const Grid grid({0.2, 0.7});
  const double h = 0.3;
  const CurveSet c = mstep_msim(P, z, y, grid, h);
  for (std::size_t t = 0; t < 2; ++t) {
    double total = 0;
    for (Eigen::Index i = 0; i < 4; ++i) total += oracle::gaussian_kernel(z[i] - grid[t], h);
    for (Eigen::Index j = 0; j < 2; ++j) {
      double mass = 0, my = 0;
      for (Eigen::Index i = 0; i < 4; ++i) {
        const double w = oracle::gaussian_kernel(z[i] - grid[t], h);
        mass += P(i, j) * w;
        my += P(i, j) * w * y[i];
      }
      const double mean = my / mass;
      double ss = 0;
      for (Eigen::Index i = 0; i < 4; ++i) {
        ss += P(i, j) * oracle::gaussian_kernel(z[i] - grid[t], h) * (y[i] - mean) * (y[i] - mean);
      }
      const auto r = static_cast<Eigen::Index>(t);
      CHECK(std::abs(c.proportions(r, j) - mass / total) < 1e-12);
      CHECK(std::abs(c.means(r, j) - mean) < 1e-12);
      CHECK(std::abs(c.variances(r, j) - ss / mass) < 1e-12);
    }
  }
}

TEST_CASE("M-step with one component is Nadaraya-Watson") {
  std::mt19937_64 rng(31);
  const Eigen::VectorXd z = testing::uniform_matrix(rng, 60, 1);
  const Eigen::VectorXd y = testing::normal_vector(rng, 60);
  const Grid grid = build_grid(z, 20);
  const CurveSet c = mstep_msim(PosteriorMatrix::Ones(60, 1), z, y, grid, 0.15);
  const Eigen::VectorXd w1 = Eigen::VectorXd::Ones(60);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    const double nw = weighted_local_average(z, y, w1, grid[t], 0.15);
    const Eigen::VectorXd sq = (y.array() - nw).square();
    CHECK(c.proportions(r, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(c.means(r, 0) - nw) < 1e-12);
    CHECK(std::abs(c.variances(r, 0) - weighted_local_average(z, sq, w1, grid[t], 0.15)) < 1e-12);
  }

  // A flat kernel makes the curves the weighted global moments.
  const PosteriorMatrix P = testing::random_posteriors(rng, 60, 2);
  const CurveSet flat = mstep_msim(P, z, y, grid, 1e6);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double mean = P.col(j).dot(y) / P.col(j).sum();
    CHECK((flat.means.col(j).array() - mean).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("M-step reports starved neighborhoods") {
  Eigen::VectorXd z(3), y(3);
  z << 0.0, 0.1, 0.2;
  y << 1, 2, 3;
  CHECK(kind_of([&] { mstep_msim(PosteriorMatrix::Ones(3, 1), z, y, Grid({0.0, 50.0}), 0.01); }) ==
        ErrorKind::starved_neighborhood);
  PosteriorMatrix hard = PosteriorMatrix::Zero(3, 2);
  hard.col(0).setOnes();
  CHECK(kind_of([&] { mstep_msim(hard, z, y, Grid({0.0, 0.2}), 0.1); }) == ErrorKind::starved_neighborhood);
}

TEST_CASE("modified EM with a constant truth") {
  // k = 1 and m = 2: average the fitted curve over replications and compare
  // each grid point with the replication standard error.
  const int reps = 40;
  const Eigen::Index n = 500;
  const Grid grid({0.05, 0.25, 0.5, 0.75, 0.95});
  Eigen::MatrixXd curves(reps, 5);
  for (int r = 0; r < reps; ++r) {
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(r));
    const Eigen::VectorXd z = testing::uniform_matrix(rng, n, 1);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(n, 2.0) + testing::normal_vector(rng, n, 0.5);
    const ModifiedEmResult em = run_modified_em(z, y, grid, 0.1, PosteriorMatrix::Ones(n, 1));
    CHECK(em.converged);
    curves.row(r) = em.curves.means.col(0).transpose();
  }
  for (Eigen::Index t = 0; t < 5; ++t) {
    const double mean = curves.col(t).mean();
    const double sd = std::sqrt((curves.col(t).array() - mean).square().sum() / (reps - 1));
    CHECK(std::abs(mean - 2.0) <= 2.0 * sd / std::sqrt(static_cast<double>(reps)));
  }
}

TEST_CASE("modified EM returns posteriors consistent with its curves") {
  const Simulated s = gen_example1(300, 4);
  const Eigen::VectorXd z = s.truth.index.project(s.data.X);
  const Grid grid = build_grid(z, 50);
  const PosteriorMatrix init = PosteriorMatrix::Constant(300, 2, 0.5);
  PosteriorMatrix start = init;
  for (Eigen::Index i = 0; i < 300; ++i) start.row(i) << (s.truth.labels[i] == 0 ? 0.8 : 0.2), (s.truth.labels[i] == 0 ? 0.2 : 0.8);
  const ModifiedEmResult em = run_modified_em(z, s.data.y, grid, 0.12, start);
  const PosteriorMatrix again = estep_msim(s.data.y, evaluate_curves(em.curves, z));
  CHECK((again - em.posteriors).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(is_posterior_matrix(em.posteriors));
  CHECK(is_valid_curve_set(em.curves));

  // Restarting from the converged curves stays put.
  const ModifiedEmResult re = run_modified_em_from_curves(z, s.data.y, grid, 0.12, em.curves);
  CHECK(re.curves.max_abs_difference(em.curves) < 1e-5);
}

TEST_CASE("index objective matches direct summation") {
  const Simulated s = gen_example1(80, 9);
  const Grid grid = build_grid(s.truth.index.project(s.data.X), 30);
  const CurveSet c = example1_curves(grid);
  std::mt19937_64 rng(2);
  for (int r = 0; r < 10; ++r) {
    const Eigen::VectorXd alpha = s.truth.index.coefficients() + 0.1 * testing::normal_vector(rng, 3);
    const Eigen::VectorXd z = s.data.X * alpha;
    const double direct = oracle::msim_loglik(z, s.data.y, grid.points(), c.proportions, c.means, c.variances);
    CHECK(std::abs(msim_index_objective(s.data.X, s.data.y, c, alpha) - direct) < 1e-12);
  }
}

TEST_CASE("index gradient matches finite differences") {
  const Simulated s = gen_example1(200, 12);
  const Grid grid = build_grid(s.truth.index.project(s.data.X), 100);
  const CurveSet c = example1_curves(grid);
  std::mt19937_64 rng(3);
  int checked = 0;
  while (checked < 20) {
    const Eigen::VectorXd alpha =
        normalize_index(s.truth.index.coefficients() + 0.15 * testing::normal_vector(rng, 3)).coefficients();
    const Eigen::VectorXd z = s.data.X * alpha;
    bool near_node = false;
    for (Eigen::Index i = 0; i < z.size() && !near_node; ++i) {
      for (double u : grid.points()) near_node = near_node || std::abs(z[i] - u) < 1e-5;
    }
    if (near_node) continue;
    auto f = [&](const Eigen::VectorXd& a) { return msim_index_objective(s.data.X, s.data.y, c, a); };
    const Eigen::VectorXd fd = tangent(oracle::central_gradient(f, alpha, 1e-6), alpha);
    const Eigen::VectorXd an = tangent(msim_index_gradient(s.data.X, s.data.y, c, alpha), alpha);
    CHECK((an - fd).norm() <= 1e-4 * fd.norm());
    ++checked;
  }
}

TEST_CASE("profiling from the true index does not drift") {
  // One smooth component observed with little noise.
  std::mt19937_64 rng(41);
  const Eigen::Index n = 1000;
  const Eigen::MatrixXd X = testing::uniform_matrix(rng, n, 3);
  const IndexVector alpha = example_index();
  const Eigen::VectorXd z = alpha.project(X);
  Eigen::VectorXd y(n);
  const Eigen::VectorXd e = testing::normal_vector(rng, n, 0.01);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = example1_means(z[i])[0] + e[i];
  CurveSet c;
  c.grid = build_grid(z, 100);
  c.proportions = Eigen::MatrixXd::Ones(100, 1);
  c.means.resize(100, 1);
  for (Eigen::Index t = 0; t < 100; ++t) c.means(t, 0) = example1_means(c.grid[static_cast<std::size_t>(t)])[0];
  c.variances = Eigen::MatrixXd::Constant(100, 1, 1e-4);
  const ProfileResult r = profile_index_msim(X, y, c, alpha);
  CHECK(angle_between(r.index.coefficients(), alpha.coefficients()) < 1e-3);
  CHECK(r.objective >= r.start_objective);
}

TEST_CASE("scalar covariate fit is the modified EM on x") {
  std::mt19937_64 rng(50);
  const Eigen::MatrixXd x = testing::uniform_matrix(rng, 200, 1);
  Eigen::VectorXd y(200);
  const Eigen::VectorXd e = testing::normal_vector(rng, 200, 0.3);
  for (Eigen::Index i = 0; i < 200; ++i) y[i] = std::sin(3.0 * x(i, 0)) + e[i];
  const MsimFit fit = fit_msim(x, y, 1, 0.1);
  CHECK(fit.index[0] == 1.0);
  const ModifiedEmResult em = run_modified_em(x.col(0), y, build_grid(x.col(0), 100), 0.1, PosteriorMatrix::Ones(200, 1));
  CHECK(fit.curves.max_abs_difference(em.curves) < 1e-12);
  CHECK(fit.converged);
}

TEST_CASE("fitted models satisfy the invariants") {
  const Simulated s = gen_example1(400, 21);
  for (MsimMode mode : {MsimMode::one_step, MsimMode::fib}) {
    MsimOptions o;
    o.mode = mode;
    o.seed = 5;
    const MsimFit fit = fit_msim(s.data.X, s.data.y, 2, 0.1, o);
    CHECK(is_posterior_matrix(fit.posteriors, 1e-10));
    CHECK(is_valid_curve_set(fit.curves, 1e-10));
    CHECK((fit.curves.proportions.array() >= 0.0).all());
    CHECK((fit.curves.proportions.array() <= 1.0).all());
    CHECK(std::abs(fit.index.coefficients().norm() - 1.0) < 1e-12);
    CHECK(fit.index[0] > 0.0);
    CHECK(angle_between(fit.index.coefficients(), s.truth.index.coefficients()) < 10.0 * testing::kDegree);
    if (mode == MsimMode::one_step) CHECK(fit.index.coefficients() == fit.initial_index.coefficients());
  }
}

TEST_CASE("prediction reductions") {
  MsimFit fit;
  fit.index = normalize_index(Eigen::Vector2d(1, 1));
  fit.curves.grid = Grid({0.0, 1.0, 2.0});
  fit.curves.proportions = Eigen::MatrixXd::Ones(3, 1);
  fit.curves.means.resize(3, 1);
  fit.curves.means << 1.0, -2.0, 5.0;
  fit.curves.variances = Eigen::MatrixXd::Ones(3, 1);
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd Xn = testing::uniform_matrix(rng, 25, 2);
  const Prediction p = predict_msim(fit, Xn);
  const Eigen::VectorXd z = fit.index.project(Xn);
  for (Eigen::Index i = 0; i < 25; ++i) CHECK(p.fitted[i] == interpolate(fit.curves.grid, fit.curves.means.col(0), z[i]));

  fit.curves.proportions = Eigen::MatrixXd::Constant(3, 2, 0.5);
  fit.curves.means.resize(3, 2);
  fit.curves.means.col(0).setConstant(1.5);
  fit.curves.means.col(1).setConstant(-4.0);
  fit.curves.variances = Eigen::MatrixXd::Ones(3, 2);
  const Prediction q = predict_msim(fit, Xn);
  CHECK((q.fitted.array() - (1.5 - 4.0) / 2.0).abs().maxCoeff() < 1e-15);
  CHECK(kind_of([&] { predict_msim(fit, Eigen::MatrixXd::Ones(3, 3)); }) == ErrorKind::shape);
}

TEST_CASE("classification with the response on Example 1") {
  const Simulated s = gen_example1(800, 8);
  MsimOptions o;
  o.seed = 2;
  const MsimFit fit = fit_msim(s.data.X, s.data.y, 2, 0.091, o);
  const Prediction p = predict_msim(fit, s.data.X, s.data.y);
  const std::vector<int> perm = match_components(fit.curves, s.truth);
  int agree = 0;
  for (std::size_t i = 0; i < p.labels.size(); ++i) agree += p.labels[i] == perm[static_cast<std::size_t>(s.truth.labels[i])];
  CHECK(static_cast<double>(agree) / static_cast<double>(p.labels.size()) > 0.95);
}

TEST_CASE("fit argument errors") {
  const Simulated s = gen_example1(50, 1);
  CHECK(kind_of([&] { fit_msim(s.data.X, s.data.y, 2, 0.0); }) == ErrorKind::invalid_bandwidth);
  CHECK(kind_of([&] { fit_msim(s.data.X, s.data.y, 0, 0.1); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { fit_msim(s.data.X, s.data.y.head(10), 2, 0.1); }) == ErrorKind::shape);
}
