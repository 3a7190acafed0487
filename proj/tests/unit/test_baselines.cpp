#include "helpers.hpp"
#include "scotoma/baselines.hpp"

#include <doctest.h>

#include <cmath>

using namespace scotoma;

namespace {

double loglik(const Vector& x, const Vector& y, double a, double b, double ridge) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double eta = a + b * x[i];
    ll += y[i] * eta - std::log1p(std::exp(eta));
  }
  return ll - 0.5 * ridge * b * b;
}

// Grid search for the maximum, refined three times around the incumbent.
std::pair<double, double> grid_argmax(const Vector& x, const Vector& y, double ridge) {
  double ca = 0.0, cb = 0.0, half = 4.0;
  for (int level = 0; level < 4; ++level) {
    const double step = half / 100.0;
    double best = -INFINITY, ba = ca, bb = cb;
    for (int i = -100; i <= 100; ++i) {
      for (int j = -100; j <= 100; ++j) {
        const double a = ca + i * step, b = cb + j * step;
        const double v = loglik(x, y, a, b, ridge);
        if (v > best) {
          best = v;
          ba = a;
          bb = b;
        }
      }
    }
    ca = ba;
    cb = bb;
    half = 2.0 * step;
  }
  return {ca, cb};
}

SemiDataset two_groups(const Matrix& controls, const Matrix& treatments) {
  SemiDataset d;
  d.covariate_names = test::names(static_cast<std::size_t>(controls.cols()));
  for (Eigen::Index i = 0; i < controls.rows(); ++i) {
    d.unpaired_control.push_back(
        test::obs("c" + std::to_string(i), Group::control, controls.row(i).transpose()));
  }
  for (Eigen::Index i = 0; i < treatments.rows(); ++i) {
    d.object_treatment.push_back(
        test::obs("t" + std::to_string(i), Group::treatment, treatments.row(i).transpose()));
  }
  return d;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("euclidean") {
  const auto s = euclidean_scorer();
  Vector a(3), b(3);
  a << 1.0, 2.0, 3.0;
  b << 1.0, 3.0, 3.0;
  CHECK(s(a, a) == 0.0);
  CHECK(s(a, b) == 1.0);
  b << 0.0, 0.0, 0.0;
  CHECK(s(a, b) == 14.0);
  // single-coordinate differences: p * (1'd / sqrt(p))^2 = d'd
  Vector d = Vector::Zero(3);
  d[1] = 2.5;
  CHECK(3.0 * score(Vector(Vector::Ones(3) / std::sqrt(3.0)), d, Vector::Zero(3)) ==
        doctest::Approx(s(d, Vector::Zero(3))).epsilon(1e-14));
}

TEST_CASE("mahalanobis on isotropic data is close to euclidean") {
  auto rng = make_stream(53, 0);
  const Matrix sample = test::random_matrix(rng, 20000, 3);
  const auto m = mahalanobis_scorer(sample);
  CHECK(m.ridge == 0.0);
  const auto e = euclidean_scorer();
  for (int i = 0; i < 20; ++i) {
    const Vector a = test::random_vector(rng, 3), b = test::random_vector(rng, 3);
    CHECK(m(a, b) == doctest::Approx(e(a, b)).epsilon(0.08));
    CHECK(m(a, a) == 0.0);
  }
}

TEST_CASE("mahalanobis is invariant to rescaling a coordinate") {
  auto rng = make_stream(53, 1);
  Matrix sample = test::random_matrix(rng, 50, 4);
  const auto m = mahalanobis_scorer(sample);
  sample.col(1) *= 10.0;
  const auto m10 = mahalanobis_scorer(sample);
  for (int i = 0; i < 10; ++i) {
    Vector a = test::random_vector(rng, 4), b = test::random_vector(rng, 4);
    const double before = m(a, b);
    a[1] *= 10.0;
    b[1] *= 10.0;
    CHECK(m10(a, b) == doctest::Approx(before).epsilon(1e-9));
  }
}

TEST_CASE("mahalanobis ridge on singular samples") {
  Matrix sample(4, 2);
  sample << 1, 2, 2, 4, 3, 6, 4, 8;
  const auto m = mahalanobis_scorer(sample);
  CHECK(m.ridge > 0.0);
  CHECK(std::isfinite(m(Vector::Zero(2), Vector::Ones(2))));
  CHECK_THROWS_AS(mahalanobis_scorer(Matrix(Matrix::Zero(1, 2))), DataError);
}

TEST_CASE("logistic fit agrees with a likelihood grid") {
  auto rng = make_stream(59, 0);
  const int n = 60;
  Vector x(n), y(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    x[i] = test::random_vector(rng, 1)[0];
    y[i] = u(rng) < 1.0 / (1.0 + std::exp(-(0.3 + 1.2 * x[i]))) ? 1.0 : 0.0;
  }
  const double ridge = 1e-4;
  const auto model = fit_logistic(Matrix(x), y, ridge);
  CHECK(model.converged);
  CHECK_FALSE(model.separated);
  const auto [a, b] = grid_argmax(x, y, ridge);
  CHECK(std::abs(model.intercept - a) < 1e-3);
  CHECK(std::abs(model.coef[0] - b) < 1e-3);
  CHECK(logistic_penalized_loglik(Matrix(x), y, model.intercept, model.coef, ridge) ==
        doctest::Approx(loglik(x, y, model.intercept, model.coef[0], ridge)).epsilon(1e-12));
  CHECK(loglik(x, y, model.intercept, model.coef[0], ridge) >= loglik(x, y, a, b, ridge) - 1e-12);
}

TEST_CASE("mirrored groups give a zero intercept") {
  auto rng = make_stream(59, 1);
  const Matrix c = test::random_matrix(rng, 25, 3) + Matrix::Constant(25, 3, 0.4);
  const auto model = propensity_scorer(two_groups(c, -c)).model;
  CHECK(std::abs(model.intercept) < 1e-8);
  CHECK(model.coef.norm() > 0.1);
}

TEST_CASE("label-independent covariates give the marginal share") {
  auto rng = make_stream(59, 2);
  const Matrix x = test::random_matrix(rng, 10, 2);
  Matrix t(30, 2);
  t << x, x, x;
  const auto ps = propensity_scorer(two_groups(x, t));
  CHECK(ps.model.coef.norm() < 1e-8);
  for (int i = 0; i < 10; ++i) {
    CHECK(ps.model.probability(x.row(i).transpose()) == doctest::Approx(0.75).epsilon(1e-8));
  }
  CHECK(ps(x.row(0).transpose(), x.row(1).transpose()) < 1e-7);
}

TEST_CASE("perfect separation is flagged and stays finite") {
  Matrix c(3, 1), t(3, 1);
  c << -3, -2, -1;
  t << 1, 2, 3;
  const auto ps = propensity_scorer(two_groups(c, t));
  CHECK(ps.model.separated);
  CHECK(std::isfinite(ps.model.coef[0]));
  CHECK(ps.model.coef[0] > 0.0);
  CHECK_THROWS_AS(propensity_scorer(two_groups(c, Matrix(0, 1))), DataError);
}

TEST_CASE("rca whitens the paired differences") {
  // isotropic chunklets: C = (s^2 / p) I, so scores are Euclidean times p / s^2
  Matrix c = Matrix::Zero(3, 3), t = 2.0 * Matrix::Identity(3, 3);
  const auto iso = rca_scorer(test::paired_dataset(c, t).paired);
  const auto e = euclidean_scorer();
  auto rng = make_stream(61, 0);
  for (int i = 0; i < 5; ++i) {
    const Vector a = test::random_vector(rng, 3), b = test::random_vector(rng, 3);
    CHECK(iso(a, b) == doctest::Approx(0.75 * e(a, b)).epsilon(1e-12));
  }
  // differences concentrated on the first coordinate down-weight it
  Matrix c2 = Matrix::Zero(4, 2), t2(4, 2);
  t2 << 3, 0, -3, 0, 0, 1, 0, -1;
  const auto aniso = rca_scorer(test::paired_dataset(c2, t2).paired);
  const Vector zero = Vector::Zero(2);
  CHECK(aniso(Vector::Unit(2, 0), zero) == doctest::Approx(1.0 / 4.5));
  CHECK(aniso(Vector::Unit(2, 1), zero) == doctest::Approx(1.0 / 0.5));
  CHECK_THROWS_AS(rca_scorer({}), DataError);
}

}  // TEST_SUITE
