#include <doctest.h>

#include <cmath>
#include <random>

#include "simix/mixlin.hpp"
#include "simix/mrsip.hpp"
#include "simix/msim.hpp"
#include "support/expect.hpp"
#include "support/oracles.hpp"

// Closed-form M-steps against direct numerical maximization of the
// kernel-weighted objectives they solve. Proportions are parametrized by
// logits against the last component, variances by their logarithm.

using namespace simix;

namespace {

constexpr int kInstances = 50;
constexpr double kTol = 1e-6;

Eigen::VectorXd softmax_tail(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p(logits.size() + 1);
  p.head(logits.size()) = logits.array().exp();
  p[logits.size()] = 1.0;
  return p / p.sum();
}

struct Instance {
  Eigen::VectorXd z;
  Eigen::VectorXd y;
  PosteriorMatrix posteriors;
  Grid grid{std::vector<double>{0.2, 0.7}};
  double h = 0.0;
};

Instance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
  std::uniform_real_distribution<double> bw(0.2, 0.6);
  Instance in;
  in.z = testing::uniform_matrix(rng, n, 1);
  in.y = testing::normal_vector(rng, n, 1.5);
  in.posteriors = testing::random_posteriors(rng, n, k);
  in.h = bw(rng);
  return in;
}

}  // namespace

TEST_CASE("single-index mixture M-step maximizes the local log-likelihood") {
  std::mt19937_64 rng(101);
  for (int r = 0; r < kInstances; ++r) {
    const Eigen::Index k = r % 2 == 0 ? 2 : 3, n = 9;
    const Instance in = random_instance(rng, n, k);
    const CurveSet closed = mstep_msim(in.posteriors, in.z, in.y, in.grid, in.h);
    for (std::size_t t = 0; t < in.grid.size(); ++t) {
      Eigen::VectorXd w(n);
      for (Eigen::Index i = 0; i < n; ++i) w[i] = oracle::gaussian_kernel(in.z[i] - in.grid[t], in.h);
      // theta = (k-1 logits, k means, k log-variances).
      auto local = [&](const Eigen::VectorXd& th) {
        const Eigen::VectorXd pi = softmax_tail(th.head(k - 1));
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < k; ++j) {
            const double m = th[k - 1 + j], v = std::exp(th[2 * k - 1 + j]);
            total += w[i] * in.posteriors(i, j) * (std::log(pi[j]) + std::log(oracle::normal_pdf(in.y[i], m, v)));
          }
        }
        return total;
      };
      Eigen::VectorXd start = Eigen::VectorXd::Zero(3 * k - 1);
      for (Eigen::Index j = 0; j < k; ++j) start[k - 1 + j] = 0.3 * static_cast<double>(j);
      const Eigen::VectorXd best = oracle::newton_maximize(local, start);
      const Eigen::VectorXd pi = softmax_tail(best.head(k - 1));
      const auto row = static_cast<Eigen::Index>(t);
      for (Eigen::Index j = 0; j < k; ++j) {
        CHECK(std::abs(closed.proportions(row, j) - pi[j]) < kTol);
        CHECK(std::abs(closed.means(row, j) - best[k - 1 + j]) < kTol);
        CHECK(std::abs(closed.variances(row, j) - std::exp(best[2 * k - 1 + j])) < kTol);
      }
    }
  }
}

TEST_CASE("varying-proportion M-step maximizes the local proportion objective") {
  std::mt19937_64 rng(202);
  for (int r = 0; r < kInstances; ++r) {
    const Eigen::Index k = r % 2 == 0 ? 2 : 3, n = 9;
    const Instance in = random_instance(rng, n, k);
    const Eigen::MatrixXd closed = mstep_pi(in.posteriors, in.z, in.grid, in.h);
    for (std::size_t t = 0; t < in.grid.size(); ++t) {
      auto local = [&](const Eigen::VectorXd& logits) {
        const Eigen::VectorXd pi = softmax_tail(logits);
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double w = oracle::gaussian_kernel(in.z[i] - in.grid[t], in.h);
          for (Eigen::Index j = 0; j < k; ++j) total += w * in.posteriors(i, j) * std::log(pi[j]);
        }
        return total;
      };
      const Eigen::VectorXd pi = softmax_tail(oracle::newton_maximize(local, Eigen::VectorXd::Zero(k - 1)));
      for (Eigen::Index j = 0; j < k; ++j) {
        CHECK(std::abs(closed(static_cast<Eigen::Index>(t), j) - pi[j]) < kTol);
      }
    }
  }
}

TEST_CASE("regression M-step maximizes the weighted normal log-likelihood") {
  std::mt19937_64 rng(303);
  for (int r = 0; r < kInstances; ++r) {
    const Eigen::Index k = 2, n = 12;
    const Eigen::MatrixXd S = design_matrix(testing::uniform_matrix(rng, n, 1, -1.0, 1.0), true);
    const Eigen::VectorXd y = testing::normal_vector(rng, n, 1.5);
    PosteriorMatrix P(n, k);
    P.col(0) = testing::uniform_matrix(rng, n, 1, 0.2, 0.8);
    P.col(1) = 1.0 - P.col(0).array();
    const LinearMixtureParams closed = update_beta_sigma(P, S, y);
    const Eigen::Index q = S.cols();
    for (Eigen::Index j = 0; j < k; ++j) {
      // theta = (beta_j, log sigma_j^2).
      auto objective = [&](const Eigen::VectorXd& th) {
        const double v = std::exp(th[q]);
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          total += P(i, j) * std::log(oracle::normal_pdf(y[i], S.row(i).dot(th.head(q)), v));
        }
        return total;
      };
      const Eigen::VectorXd best = oracle::newton_maximize(objective, Eigen::VectorXd::Zero(q + 1));
      CHECK((closed.coefficients.row(j).transpose() - best.head(q)).cwiseAbs().maxCoeff() < kTol);
      CHECK(std::abs(closed.variances[j] - std::exp(best[q])) < kTol);
    }
  }
}
