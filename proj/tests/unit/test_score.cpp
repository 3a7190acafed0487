#include "helpers.hpp"
#include "scotoma/score.hpp"

#include <doctest.h>

#include <sstream>

using namespace scotoma;

namespace {

// Direct unordered-edge sums of the scatter terms.
double within_double_sum(const Vector& beta, const Matrix& c, const Matrix& t) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const double z = beta.dot(c.row(i).transpose() - t.row(i).transpose());
    s += z * z;
  }
  return s / static_cast<double>(c.rows());
}

double between_double_sum(const Vector& beta, const Matrix& c, const Matrix& t) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.rows(); ++j) {
      if (i == j) continue;
      const double z = beta.dot(c.row(i).transpose() - t.row(j).transpose());
      s += z * z;
    }
  }
  return s;
}

}  // namespace

TEST_SUITE("score") {

TEST_CASE("score examples") {
  Vector x(3), y(3);
  x << 2.0, 7.0, -3.0;
  y.setZero();
  const WeightVector e1(Vector::Unit(3, 0));
  CHECK(score(e1, x, y) == 4.0);
  CHECK(score(e1, x, x) == 0.0);
  CHECK(score(Vector(2.0 * Vector::Unit(3, 0)), x, y) == 16.0);
  CHECK(score(WeightVector(Vector(-5.0 * Vector::Unit(3, 0))), x, y) == doctest::Approx(4.0));
}

TEST_CASE("weight vector normalization and sign") {
  Vector v(3);
  v << 0.5, -2.0, 1.0;
  const WeightVector w(v);
  CHECK(w.values().norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[1] > 0.0);
  CHECK(w[0] < 0.0);
  Vector tie(2);
  tie << -1.0, 1.0;
  CHECK(WeightVector(tie)[0] > 0.0);
  CHECK_THROWS_AS(WeightVector(Vector::Zero(3)), NumericalError);
  Vector bad = v;
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(WeightVector{bad}, NumericalError);
  CHECK_THROWS_AS(WeightVector::from_unit(v), DataError);
  CHECK(WeightVector::from_unit(w.values()).values() == w.values());
}

TEST_CASE("beta csv round trip is exact") {
  auto rng = make_stream(5, 0);
  const WeightVector w(test::random_vector(rng, 7));
  std::ostringstream out;
  write_beta_csv(w, test::names(7), out);
  std::istringstream in(out.str());
  const auto [names, back] = read_beta_csv(in);
  CHECK(names == test::names(7));
  CHECK(back.values() == w.values());
  std::istringstream bad("coord,weight\nx1,1\n");
  CHECK_THROWS_AS(read_beta_csv(bad), DataError);
}

TEST_CASE("score matrix agrees with pairwise scores") {
  auto rng = make_stream(5, 1);
  const WeightVector w(test::random_vector(rng, 4));
  const Matrix c = test::random_matrix(rng, 5, 4), t = test::random_matrix(rng, 3, 4);
  const Matrix s = score_matrix(w, c, t);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(s(i, j) == doctest::Approx(score(w, c.row(i).transpose(), t.row(j).transpose()))
                           .epsilon(1e-12));
    }
  }
}

TEST_CASE("adjacency structure") {
  const auto a1 = build_adjacency(1);
  Matrix w1(2, 2);
  w1 << 0, 1, 1, 0;
  CHECK(a1.within == w1);
  CHECK(a1.between.isZero(0.0));
  for (std::size_t n : {2u, 3u, 6u}) {
    const auto a = build_adjacency(n);
    CHECK(a.within.rows() == static_cast<Eigen::Index>(2 * n));
    CHECK((a.within.rowwise().sum().array() == 1.0).all());
    CHECK((a.between.rowwise().sum().array() == static_cast<double>(n - 1)).all());
    CHECK(a.within == a.within.transpose());
    CHECK(a.between == a.between.transpose());
    CHECK(a.within.cwiseProduct(a.between).isZero(0.0));
    // controls never adjacent to controls
    const auto m = static_cast<Eigen::Index>(n);
    CHECK(a.between.topLeftCorner(m, m).isZero(0.0));
    CHECK(a.within.bottomRightCorner(m, m).isZero(0.0));
  }
}

TEST_CASE("single pair scatter") {
  Matrix c(1, 2), t(1, 2);
  c << 1.0, 0.0;
  t << 0.0, 0.0;
  const auto sp = build_scatter(c, t, 0.5);
  Matrix expect = Matrix::Zero(2, 2);
  expect.diagonal() << 1.5, 0.5;
  CHECK((sp.sigma_w - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sp.sigma_b.isZero(0.0));
  CHECK(objective_g(Vector::Unit(2, 0), sp) == 0.0);
  CHECK(objective_g(Vector::Unit(2, 1), sp) == 0.0);
}

TEST_CASE("scatter matches direct double sums and the Laplacian form") {
  for (int inst = 0; inst < 25; ++inst) {
    auto rng = make_stream(17, static_cast<std::uint64_t>(inst));
    const Eigen::Index p = 2 + inst % 7, n = 3 + inst;
    const Matrix c = test::random_matrix(rng, n, p) + Matrix::Constant(n, p, 3.0);
    const Matrix t = test::random_matrix(rng, n, p, 2.0);
    const double lambda = inst % 2 ? 0.1 : 1e-3;
    const auto sp = build_scatter(c, t, lambda);
    CHECK(sp.ell_dot == static_cast<std::size_t>(n));

    // Laplacian of the stacked rows: X' (D - W) X with unordered edges once.
    Matrix x(2 * n, p);
    x << c, t;
    const auto a = build_adjacency(static_cast<std::size_t>(n));
    auto laplacian_form = [&](const Matrix& w) {
      const Matrix l = Matrix(w.rowwise().sum().asDiagonal()) - w;
      return Matrix(x.transpose() * l * x);
    };
    const Matrix lw = laplacian_form(a.within) / static_cast<double>(n);
    const Matrix lb = laplacian_form(a.between);
    const double scale_w = lw.cwiseAbs().maxCoeff(), scale_b = lb.cwiseAbs().maxCoeff();
    CHECK((sp.sigma_w - lambda * Matrix::Identity(p, p) - lw).cwiseAbs().maxCoeff() <
          1e-10 * scale_w);
    CHECK((sp.sigma_b - lb).cwiseAbs().maxCoeff() < 1e-10 * scale_b);

    const Vector beta = test::random_unit(rng, p);
    const double ww = beta.dot((sp.sigma_w - lambda * Matrix::Identity(p, p)) * beta);
    const double bb = beta.dot(sp.sigma_b * beta);
    CHECK(ww == doctest::Approx(within_double_sum(beta, c, t)).epsilon(1e-10));
    CHECK(bb == doctest::Approx(between_double_sum(beta, c, t)).epsilon(1e-10));
  }
}

TEST_CASE("objective is scale invariant") {
  auto rng = make_stream(23, 0);
  const auto sp = build_scatter(test::random_matrix(rng, 8, 3), test::random_matrix(rng, 8, 3), 0.1);
  const Vector b = test::random_vector(rng, 3);
  CHECK(objective_g(b, sp) == doctest::Approx(objective_g(Vector(-7.5 * b), sp)).epsilon(1e-12));
  CHECK(objective_g(b, sp) > 0.0);
}

TEST_CASE("default lambda tracks the data scale") {
  auto rng = make_stream(29, 0);
  const Matrix c = test::random_matrix(rng, 10, 4), t = test::random_matrix(rng, 10, 4);
  const double l1 = default_lambda(c, t);
  CHECK(l1 > 0.0);
  CHECK(default_lambda(10.0 * c, 10.0 * t) == doctest::Approx(100.0 * l1).epsilon(1e-12));
}

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  CHECK_NOTHROW(hp.validate());
  CHECK(hp.resolved_tau1(24) == 4);
  CHECK(hp.resolved_tau1(3) == 1);
  hp.tau1 = 0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp.tau1 = 2;
  hp.lambda = -1.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp.lambda = 0.1;
  hp.delta0 = -1.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
  hp.delta0 = 0.0;
  hp.epsilon = -1.0;
  CHECK_THROWS_AS(hp.validate(), ConfigError);
}

}  // TEST_SUITE
