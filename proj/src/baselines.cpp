#include "scotoma/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace scotoma {

namespace {

std::shared_ptr<const Matrix> stabilized_inverse(const Matrix& cov, double& ridge) {
  const Eigen::Index p = cov.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  const double bottom = es.eigenvalues().minCoeff();
  ridge = 0.0;
  Matrix a = cov;
  if (!(top > 0.0) || bottom <= 1e-12 * top) {
    ridge = 1e-8 * cov.trace() / static_cast<double>(p);
    if (!(ridge > 0.0)) throw NumericalError("covariance is identically zero");
    a += ridge * Matrix::Identity(p, p);
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(p, p));
  inv = 0.5 * (inv + inv.transpose()).eval();
  return std::make_shared<const Matrix>(std::move(inv));
}

std::vector<Observation> all_observations(const SemiDataset& d) {
  std::vector<Observation> all;
  for (const auto& pr : d.paired) {
    all.push_back(pr.control);
    all.push_back(pr.treatment);
  }
  for (const auto* block :
       {&d.unpaired_control, &d.unpaired_treatment, &d.object_control, &d.object_treatment}) {
    all.insert(all.end(), block->begin(), block->end());
  }
  return all;
}

double sigmoid(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

}  // namespace

PairScorer euclidean_scorer() {
  return [](const Vector& xi, const Vector& xj) {
    if (xi.size() != xj.size()) throw DataError("euclidean: dimension mismatch");
    return (xi - xj).squaredNorm();
  };
}

double MetricScorer::operator()(const Vector& xi, const Vector& xj) const {
  if (xi.size() != precision->rows() || xj.size() != precision->rows()) {
    throw DataError("metric scorer: dimension mismatch");
  }
  const Vector d = xi - xj;
  return std::max(0.0, d.dot(*precision * d));
}

PairScorer MetricScorer::scorer() const {
  return [self = *this](const Vector& xi, const Vector& xj) { return self(xi, xj); };
}

MetricScorer mahalanobis_scorer(const Matrix& sample) {
  if (sample.rows() < 2) throw DataError("mahalanobis: need at least two observations");
  const Matrix centered = sample.rowwise() - sample.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(sample.rows() - 1);
  MetricScorer m;
  m.precision = stabilized_inverse(cov, m.ridge);
  return m;
}

MetricScorer mahalanobis_scorer(const SemiDataset& d) {
  return mahalanobis_scorer(stack_rows(all_observations(d), d.p()));
}

MetricScorer rca_scorer(const std::vector<ObservationPair>& paired) {
  if (paired.empty()) throw DataError("rca: need at least one expert pair");
  const auto p = paired.front().control.x.size();
  Matrix chunk = Matrix::Zero(p, p);
  for (const auto& pr : paired) {
    const Vector d = pr.control.x - pr.treatment.x;
    chunk.noalias() += d * d.transpose();
  }
  chunk /= static_cast<double>(paired.size());
  MetricScorer m;
  m.precision = stabilized_inverse(chunk, m.ridge);
  return m;
}

double LogisticModel::logit(const Vector& x) const {
  if (x.size() != coef.size()) throw DataError("propensity: dimension mismatch");
  return intercept + coef.dot(x);
}

double LogisticModel::probability(const Vector& x) const { return sigmoid(logit(x)); }

double logistic_penalized_loglik(const Matrix& x, const Vector& y, double intercept,
                                 const Vector& coef, double ridge) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = intercept + x.row(i).dot(coef);
    // log(1 + e^eta) without overflow
    const double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    ll += y[i] * eta - softplus;
  }
  return ll - 0.5 * ridge * coef.squaredNorm();
}

LogisticModel fit_logistic(const Matrix& x, const Vector& y, double ridge, std::size_t max_iters,
                           double tol) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n == 0 || y.size() != n) throw DataError("logistic: design and response sizes differ");
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] == 0.0) has0 = true;
    else if (y[i] == 1.0) has1 = true;
    else throw DataError("logistic: response must be 0/1");
  }
  if (!has0 || !has1) throw DataError("propensity model needs both groups");

  Matrix design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = x;
  Matrix penalty = ridge * Matrix::Identity(p + 1, p + 1);
  penalty(0, 0) = 0.0;

  Vector theta = Vector::Zero(p + 1);
  LogisticModel m;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const Vector eta = design * theta;
    Vector prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(eta[i]);
      w[i] = prob[i] * (1.0 - prob[i]);
    }
    const Vector grad = design.transpose() * (y - prob) - penalty * theta;
    const Matrix hess = design.transpose() * w.asDiagonal() * design + penalty;
    const Vector step = hess.ldlt().solve(grad);
    if (!step.allFinite()) throw NumericalError("logistic: Newton step is not finite");
    theta += step;
    m.iterations = it + 1;
    if (step.cwiseAbs().maxCoeff() < tol) {
      m.converged = true;
      break;
    }
  }
  m.intercept = theta[0];
  m.coef = theta.tail(p);

  double lo1 = INFINITY, hi0 = -INFINITY;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = m.logit(x.row(i).transpose());
    if (y[i] == 1.0) lo1 = std::min(lo1, e);
    else hi0 = std::max(hi0, e);
  }
  m.separated = lo1 > hi0;
  return m;
}

double PropensityModel::operator()(const Vector& xi, const Vector& xj) const {
  return std::abs(model.logit(xi) - model.logit(xj));
}

PairScorer PropensityModel::scorer() const {
  return [self = *this](const Vector& xi, const Vector& xj) { return self(xi, xj); };
}

PropensityModel propensity_scorer(const SemiDataset& d) {
  const std::vector<Observation> all = all_observations(d);
  const Matrix x = stack_rows(all, d.p());
  Vector y(static_cast<Eigen::Index>(all.size()));
  for (std::size_t i = 0; i < all.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = all[i].group == Group::treatment ? 1.0 : 0.0;
  }
  return PropensityModel{fit_logistic(x, y)};
}

}  // namespace scotoma
