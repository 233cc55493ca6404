#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "test_support.hpp"
#include "vreml/errors.hpp"
#include "vreml/model.hpp"
#include "vreml/simulate.hpp"
#include "vreml/vreml.hpp"

using namespace vreml;
namespace vt = vreml::testing;

TEST_CASE("intercept-only projection is centering") {
  Eigen::VectorXd y(3);
  y << 5.0, 6.0, 7.0;
  const ModelData m = load_model(y, Eigen::MatrixXd::Ones(3, 1));
  Eigen::Vector3d v(1.0, 2.0, 3.0);
  const Eigen::VectorXd projected = m.project(v);
  CHECK((projected - (v.array() - v.mean()).matrix()).norm() <= 1e-12);
  CHECK(projected_quadratic(m, v) == doctest::Approx(2.0));
}

TEST_CASE("duplicated design column is rejected") {
  Eigen::MatrixXd x(4, 2);
  x.col(0).setOnes();
  x.col(1).setOnes();
  CHECK_THROWS_WITH_AS(load_model(Eigen::VectorXd::Zero(4), x),
                       doctest::Contains("RankDeficientDesign"), Error);
}

TEST_CASE("load_model validation errors") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
  CHECK_THROWS_WITH_AS(load_model(Eigen::VectorXd::Zero(3), x),
                       doctest::Contains("DimensionMismatch"), Error);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(load_model(bad, x), doctest::Contains("NonFiniteInput"), Error);
  CHECK_THROWS_WITH_AS(load_model(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                       doctest::Contains("DesignTooWide"), Error);
}

TEST_CASE("projection annihilates the design and is idempotent") {
  std::mt19937 rng(5);
  const int n = 50, p = 3;
  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  x.col(1) = vt::random_vector(n, rng);
  x.col(2) = vt::random_vector(n, rng);
  const ModelData m = load_model(vt::random_vector(n, rng), x);

  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd c = vt::random_vector(p, rng);
    CHECK(m.project(x * c).norm() <= 1e-10 * (x * c).norm());
    const Eigen::VectorXd v = vt::random_vector(n, rng);
    CHECK((m.project(m.project(v)) - m.project(v)).norm() <= 1e-10 * v.norm());
  }

  const Eigen::MatrixXd dense = vt::dense_projection(x);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd v = vt::random_vector(n, rng);
    const double reference = v.dot(dense * v);
    CHECK(std::abs(projected_quadratic(m, v) - reference) <=
          1e-10 * std::max(1.0, std::abs(reference)));
    CHECK(projected_quadratic(m, v) >= 0.0);
  }
  CHECK(projected_quadratic(m, x.col(1)) <= 1e-8);
}

TEST_CASE("beta recovery closed cases") {
  std::mt19937 rng(6);
  const int n = 10;
  Eigen::VectorXd y = vt::random_vector(n, rng);
  const ModelData intercept_only = load_model(y, Eigen::MatrixXd::Ones(n, 1));
  CHECK(recover_beta(intercept_only, y).norm() <= 1e-12);
  CHECK(recover_beta(intercept_only, Eigen::VectorXd::Zero(n))[0] ==
        doctest::Approx(y.mean()));

  // fitted decomposition reconstructs y
  const Eigen::VectorXd mu = vt::random_zero_sum(n, rng);
  const Eigen::VectorXd fitted = fitted_values(intercept_only, mu);
  const Eigen::VectorXd residual = y - fitted;
  CHECK((fitted + residual - y).norm() <= 1e-14 * (1.0 + y.norm()));
}

TEST_CASE("reduced projection matches the operator reduction") {
  std::mt19937 rng(8);
  const int n = 18;
  Eigen::MatrixXd x(n, 2);
  x.col(0).setOnes();
  x.col(1) = vt::random_vector(n, rng);
  const ModelData m = load_model(vt::random_vector(n, rng), x);
  const SumToZeroBasis basis = make_basis(n);
  CHECK((reduced_projection(m, basis) - projection_operator(m).reduce(basis)).norm() <= 1e-10);
}

TEST_CASE("recovered coefficients are near the simulation truth") {
  // Lattice study draw at the default settings; the check is statistical with
  // a fixed seed, against 3 standard errors from the exact GLS covariance of
  // the ordinary least-squares coefficients.
  SimConfig config;
  config.n0 = 15;
  config.seed = 5;
  const SimDraw draw = generate(config, 0);
  const FitReport report = fit(draw.model, draw.icar);

  const int n = draw.model.n();
  const Eigen::MatrixXd& x = draw.model.x();
  const SumToZeroBasis basis = make_basis(n);
  Eigen::MatrixXd k = reduced_laplacian(draw.icar, basis);
  Eigen::MatrixXd spatial_cov =
      basis.matrix() * k.ldlt().solve(basis.matrix().transpose());
  Eigen::MatrixXd v = config.sigma_eps_sq * Eigen::MatrixXd::Identity(n, n) +
                      config.sigma_u_sq * spatial_cov;
  Eigen::MatrixXd beta_cov =
      draw.model.gram_inverse() * x.transpose() * v * x * draw.model.gram_inverse();

  for (int j = 0; j < 3; ++j) {
    const double se = std::sqrt(beta_cov(j, j));
    CHECK(std::abs(report.beta_hat[j] - config.beta[j]) <= 3.0 * se);
  }
}
