#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "simix/error.hpp"
#include "simix/smoothing.hpp"
#include "support/expect.hpp"
#include "support/oracles.hpp"

using namespace simix;

using testing::kind_of;

TEST_CASE("kernel weight at zero is the standard normal peak") {
  CHECK(std::abs(kernel_weight(0.0, 1.0) - 1.0 / std::sqrt(2.0 * M_PI)) < 1e-15);
  CHECK(std::abs(kernel_weight(0.0, 1.0) - 0.398942) < 1e-6);
}

TEST_CASE("kernel weight matches the scaled density formula") {
  // K_h(2) with h = 0.5 is phi(4) / 0.5.
  const double phi4 = std::exp(-8.0) / std::sqrt(2.0 * M_PI);
  CHECK(std::abs(kernel_weight(2.0, 0.5) - 2.0 * phi4) < 1e-18);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> off(-3.0, 3.0), bw(0.01, 2.0);
  for (int r = 0; r < 200; ++r) {
    const double u = off(rng), h = bw(rng);
    CHECK(std::abs(kernel_weight(u, h) - oracle::gaussian_kernel(u, h)) <= 1e-14 * oracle::gaussian_kernel(0, h));
  }
}

TEST_CASE("kernels are symmetric and nonnegative") {
  for (Kernel k : {Kernel::gaussian, Kernel::epanechnikov}) {
    for (double u : {0.0, 0.1, 0.7, 1.0, 2.5, 40.0}) {
      CHECK(kernel_weight(u, 0.8, k) == kernel_weight(-u, 0.8, k));
      CHECK(kernel_weight(u, 0.8, k) >= 0.0);
    }
  }
  CHECK(kernel_weight(1.5, 1.0, Kernel::epanechnikov) == 0.0);
}

TEST_CASE("bad bandwidths are rejected") {
  for (double h : {0.0, -1.0, std::numeric_limits<double>::infinity(), std::nan("")}) {
    CHECK(kind_of([&] { kernel_weight(0.0, h); }) == ErrorKind::invalid_bandwidth);
  }
}

TEST_CASE("grids span the index range with equal spacing") {
  Eigen::VectorXd a(2);
  a << 0.0, 1.0;
  const Grid g = build_grid(a, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.5);
  CHECK(g[2] == 1.0);

  Eigen::VectorXd b(3);
  b << 0.1, 0.9, 0.4;
  const Grid h = build_grid(b, 5);
  const double expect[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  for (std::size_t t = 0; t < 5; ++t) CHECK(std::abs(h[t] - expect[t]) < 1e-15);
  CHECK(h.back() == 0.9);
}

TEST_CASE("grid construction errors") {
  CHECK(kind_of([] { build_grid(Eigen::VectorXd(), 5); }) == ErrorKind::empty_data);
  CHECK(kind_of([] { build_grid(Eigen::VectorXd::Constant(3, 5.0), 2); }) == ErrorKind::degenerate_span);
  CHECK(kind_of([] { Grid({0.0, 0.0, 1.0}); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { Grid({1.0}); }) == ErrorKind::shape);
}

TEST_CASE("reflected grids stay ascending") {
  const Grid g({-1.0, 0.5, 2.0});
  const Grid r = g.reflected();
  CHECK(r[0] == -2.0);
  CHECK(r[1] == -0.5);
  CHECK(r[2] == 1.0);
}

TEST_CASE("interpolation is linear inside and clamped outside") {
  const Grid g({0.0, 1.0});
  Eigen::VectorXd v(2);
  v << 2.0, 4.0;
  CHECK(interpolate(g, v, 0.5) == 3.0);
  CHECK(interpolate(g, v, 1.7) == 4.0);
  CHECK(interpolate(g, v, -3.0) == 2.0);
  CHECK(kind_of([&] { interpolate(g, Eigen::VectorXd::Ones(3), 0.2); }) == ErrorKind::shape);

  const Grid wide({0.0, 0.3, 0.35, 1.2, 2.0});
  Eigen::VectorXd w(5);
  w << 1.0, -2.0, 5.5, 0.25, 3.0;
  for (std::size_t t = 0; t < wide.size(); ++t) CHECK(interpolate(wide, w, wide[t]) == w[static_cast<Eigen::Index>(t)]);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> q(-0.5, 2.5);
  for (int r = 0; r < 500; ++r) {
    const double x = q(rng);
    CHECK(std::abs(interpolate(wide, w, x) - oracle::interpolate(wide.points(), w, x)) < 1e-14);
  }
}

TEST_CASE("interpolation plans agree with pointwise interpolation") {
  const Grid g({0.0, 0.25, 0.5, 1.0});
  Eigen::MatrixXd values(4, 2);
  values << 1, 0, 2, 1, 4, 3, 0, 5;
  Eigen::VectorXd queries(6);
  queries << -1.0, 0.0, 0.1, 0.5, 0.8, 3.0;
  const InterpolationPlan plan(g, queries);
  const Eigen::MatrixXd at = plan.apply(values);
  const Eigen::MatrixXd slopes = plan.slopes(values);
  for (Eigen::Index i = 0; i < queries.size(); ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      CHECK(std::abs(at(i, j) - interpolate(g, values.col(j), queries[i])) < 1e-15);
    }
  }
  CHECK(slopes(0, 0) == 0.0);
  CHECK(slopes(5, 1) == 0.0);
  CHECK(std::abs(slopes(2, 0) - 4.0) < 1e-12);
  CHECK(std::abs(slopes(4, 1) - 4.0) < 1e-12);
}

TEST_CASE("weighted local average") {
  Eigen::VectorXd c(5), v = Eigen::VectorXd::Constant(5, 7.0), w = Eigen::VectorXd::Ones(5);
  c << 0.0, 0.2, 0.5, 0.9, 1.0;
  for (double z : {-1.0, 0.3, 2.0}) {
    for (double h : {0.4, 10.0}) CHECK(std::abs(weighted_local_average(c, v, w, z, h) - 7.0) < 1e-12);
  }
  CHECK(std::abs(weighted_local_average(c, v, w, 0.3, 0.05) - 7.0) < 1e-12);

  Eigen::VectorXd vals(5), wts(5);
  vals << 1.0, -2.0, 3.0, 0.5, 4.0;
  wts << 0.5, 1.0, 2.0, 0.25, 1.0;
  const double flat = vals.dot(wts) / wts.sum();
  CHECK(std::abs(weighted_local_average(c, vals, wts, 0.4, 1e6) - flat) < 1e-9);

  Eigen::VectorXd c2(2), v2(2), w2 = Eigen::VectorXd::Ones(2);
  c2 << 0.0, 1.0;
  v2 << 0.0, 10.0;
  const double k0 = oracle::gaussian_kernel(0.0, 0.25), k1 = oracle::gaussian_kernel(1.0, 0.25);
  CHECK(std::abs(weighted_local_average(c2, v2, w2, 0.0, 0.25) - 10.0 * k1 / (k0 + k1)) < 1e-13);

  CHECK(kind_of([&] { weighted_local_average(c2, v2, w2, 100.0, 0.01); }) == ErrorKind::starved_neighborhood);
  CHECK(kind_of([&] { weighted_local_average(c2, v2, Eigen::VectorXd::Ones(3), 0.0, 1.0); }) == ErrorKind::shape);
}

TEST_CASE("kernel matrix entries") {
  const Grid g({0.0, 0.5, 1.0});
  Eigen::VectorXd z(4);
  z << 0.1, 0.4, 0.8, 1.3;
  const Eigen::MatrixXd W = kernel_matrix(g, z, 0.3);
  REQUIRE(W.rows() == 3);
  REQUIRE(W.cols() == 4);
  for (Eigen::Index t = 0; t < 3; ++t) {
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(std::abs(W(t, i) - oracle::gaussian_kernel(z[i] - g[static_cast<std::size_t>(t)], 0.3)) < 1e-14);
    }
  }
}

TEST_CASE("curve sets resample, reflect and validate") {
  CurveSet c;
  c.grid = Grid({0.0, 0.5, 1.0});
  c.proportions.resize(3, 2);
  c.proportions << 0.2, 0.8, 0.5, 0.5, 0.9, 0.1;
  c.means.resize(3, 2);
  c.means << 1, 2, 3, 4, 5, 6;
  c.variances = Eigen::MatrixXd::Constant(3, 2, 0.5);
  CHECK(is_valid_curve_set(c));

  const CurveSet r = c.reflected();
  CHECK(r.grid[0] == -1.0);
  CHECK(r.means(0, 0) == 5.0);
  CHECK(r.proportions(2, 0) == 0.2);
  CHECK(r.reflected().max_abs_difference(c) == 0.0);

  const CurveSet s = c.resampled(Grid({0.25, 0.75}));
  CHECK(std::abs(s.means(0, 1) - 3.0) < 1e-15);
  CHECK(std::abs(s.proportions(1, 0) - 0.7) < 1e-15);

  CurveSet bad = c;
  bad.proportions(1, 0) = 0.6;
  CHECK_FALSE(is_valid_curve_set(bad));
  bad = c;
  bad.variances(2, 1) = 0.0;
  CHECK_FALSE(is_valid_curve_set(bad));
}
