#include <doctest.h>

#include <cmath>
#include <random>

#include "simix/density.hpp"
#include "simix/mixlin.hpp"
#include "support/expect.hpp"
#include "support/oracles.hpp"

using namespace simix;
using testing::kind_of;

namespace {

struct TwoLines {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

TwoLines two_lines(std::uint64_t seed, Eigen::Index n, double noise) {
  std::mt19937_64 rng(seed);
  TwoLines d{testing::uniform_matrix(rng, n, 1, 0.0, 10.0), Eigen::VectorXd(n)};
  const Eigen::VectorXd e = testing::normal_vector(rng, n, noise);
  for (Eigen::Index i = 0; i < n; ++i) d.y[i] = (i % 2 == 0 ? d.X(i, 0) : 10.0 - d.X(i, 0)) + e[i];
  return d;
}

}  // namespace

TEST_CASE("one component is ordinary least squares") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = testing::uniform_matrix(rng, 120, 3, -1.0, 2.0);
  const Eigen::VectorXd y = X * Eigen::Vector3d(0.5, -1.0, 2.0) + testing::normal_vector(rng, 120, 0.3);
  const MixLinFit fit = fit_mixlinreg(X, y, 1);
  const Eigen::MatrixXd S = design_matrix(X, true);
  const auto ols = oracle::weighted_least_squares(Eigen::MatrixXd::Ones(120, 1), S, y);
  CHECK((fit.params.coefficients - ols.beta).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(fit.params.variances[0] - ols.variances[0]) < 1e-8);
  CHECK(fit.params.proportions[0] == 1.0);
  CHECK((fit.posteriors.array() == 1.0).all());
}

TEST_CASE("well separated lines are recovered") {
  const TwoLines d = two_lines(4, 200, 0.01);
  const MixLinFit fit = fit_mixlinreg(d.X, d.y, 2, {.seed = 3});
  const double s0 = fit.params.coefficients(0, 1), s1 = fit.params.coefficients(1, 1);
  const double lo = std::min(s0, s1), hi = std::max(s0, s1);
  CHECK(std::abs(lo + 1.0) < 0.05);
  CHECK(std::abs(hi - 1.0) < 0.05);
  CHECK(fit.converged);
}

TEST_CASE("EM log-likelihood never decreases") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TwoLines d = two_lines(seed, 150, 1.5);
    for (int k : {2, 3}) {
      const MixLinFit fit = fit_mixlinreg(d.X, d.y, k, {.seed = seed});
      for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t) {
        CHECK(fit.loglik_trace[t] >= fit.loglik_trace[t - 1] - 1e-9);
      }
      CHECK(is_posterior_matrix(fit.posteriors, 1e-10));
      CHECK(std::abs(fit.params.proportions.sum() - 1.0) < 1e-10);
      CHECK((fit.params.proportions.array() > 0.0).all());
      CHECK((fit.params.proportions.array() < 1.0).all());
      CHECK((fit.params.variances.array() > 0.0).all());
      CHECK(std::abs(fit.loglik - loglik_mixlin(fit.params, d.X, d.y)) < 1e-9);
    }
  }
}

TEST_CASE("fits are deterministic for a seed") {
  const TwoLines d = two_lines(7, 100, 1.0);
  const MixLinFit a = fit_mixlinreg(d.X, d.y, 2, {.seed = 42});
  const MixLinFit b = fit_mixlinreg(d.X, d.y, 2, {.seed = 42});
  CHECK(a.params.coefficients == b.params.coefficients);
  CHECK(a.posteriors == b.posteriors);
  CHECK(a.loglik == b.loglik);
}

TEST_CASE("log-likelihood of a standard normal at zero") {
  LinearMixtureParams p;
  p.coefficients = Eigen::MatrixXd::Zero(1, 2);
  p.variances = Eigen::VectorXd::Ones(1);
  p.proportions = Eigen::VectorXd::Ones(1);
  const double ll = loglik_mixlin(p, Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1));
  CHECK(std::abs(ll + 0.918938533204672742) < 1e-15);
  CHECK(std::abs(ll + 0.918939) < 1e-6);
}

TEST_CASE("log-likelihood matches direct summation and is additive") {
  std::mt19937_64 rng(17);
  for (int r = 0; r < 20; ++r) {
    const Eigen::Index n = 30, k = 3;
    const Eigen::MatrixXd X = testing::uniform_matrix(rng, n, 2, -2.0, 2.0);
    const Eigen::VectorXd y = testing::normal_vector(rng, n, 2.0);
    LinearMixtureParams p;
    p.coefficients = testing::uniform_matrix(rng, k, 3, -1.0, 1.0);
    p.variances = testing::uniform_matrix(rng, k, 1, 0.3, 2.0);
    p.proportions = testing::random_posteriors(rng, 1, k).transpose();
    const double ll = loglik_mixlin(p, X, y);
    const double expect = oracle::mixlin_loglik(design_matrix(X, true), y, p.coefficients, p.variances, p.proportions);
    CHECK(std::abs(ll - expect) < 1e-12);

    Eigen::MatrixXd X2(2 * n, 2);
    X2 << X, X;
    Eigen::VectorXd y2(2 * n);
    y2 << y, y;
    CHECK(std::abs(loglik_mixlin(p, X2, y2) - 2.0 * ll) <= 1e-13 * std::abs(ll));
  }
}

TEST_CASE("nonpositive variances are a domain error") {
  LinearMixtureParams p;
  p.coefficients = Eigen::MatrixXd::Zero(2, 2);
  p.variances = Eigen::Vector2d(1.0, 0.0);
  p.proportions = Eigen::Vector2d(0.5, 0.5);
  CHECK(kind_of([&] { loglik_mixlin(p, Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(3)); }) ==
        ErrorKind::domain);
}

TEST_CASE("weighted regression update") {
  std::mt19937_64 rng(23);
  const Eigen::MatrixXd S = design_matrix(testing::uniform_matrix(rng, 40, 2), true);
  const Eigen::VectorXd y = testing::normal_vector(rng, 40);
  const Eigen::MatrixXd P = testing::random_posteriors(rng, 40, 2);
  const LinearMixtureParams u = weighted_regression_update(P, S, y, 0.0);
  const auto o = oracle::weighted_least_squares(P, S, y);
  CHECK((u.coefficients - o.beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((u.variances - o.variances).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(u.proportions.sum() - 1.0) < 1e-12);

  int clamped = 0;
  const LinearMixtureParams f = weighted_regression_update(P, S, y, 100.0, &clamped);
  CHECK(clamped == 2);
  CHECK((f.variances.array() == 100.0).all());

  Eigen::MatrixXd starved = P;
  starved.col(0).setConstant(0.01);
  starved.col(1).setConstant(0.99);
  CHECK(kind_of([&] { weighted_regression_update(starved, S, y, 0.0); }) == ErrorKind::component_collapse);
}

TEST_CASE("mixture fit argument errors") {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 2);
  CHECK(kind_of([&] { fit_mixlinreg(X, Eigen::VectorXd::Zero(5), 0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([&] { fit_mixlinreg(X, Eigen::VectorXd::Zero(4), 1); }) == ErrorKind::shape);
  CHECK(kind_of([&] { fit_mixlinreg(X, Eigen::VectorXd::Zero(5), 2); }) == ErrorKind::shape);
}
