#pragma once

#include "scotoma/dataset.hpp"
#include "scotoma/matcher.hpp"

#include <cstddef>
#include <memory>

namespace scotoma {

/// Squared Euclidean distance.
PairScorer euclidean_scorer();

/// Quadratic form d' P d with a fixed positive definite P.
struct MetricScorer {
  std::shared_ptr<const Matrix> precision;
  // Ridge added to the covariance before inversion (0 when it was not needed).
  double ridge = 0.0;

  double operator()(const Vector& xi, const Vector& xj) const;
  PairScorer scorer() const;
};

/// Inverse sample covariance of the rows of `sample`. A singular covariance
/// gets a ridge of 1e-8 * trace / p, reported in `ridge`.
MetricScorer mahalanobis_scorer(const Matrix& sample);
MetricScorer mahalanobis_scorer(const SemiDataset& d);

/// Chunklet whitening from the expert pairs: C = (1/n) sum d d' over paired
/// differences, ridge-stabilized as above, score d' C^{-1} d.
MetricScorer rca_scorer(const std::vector<ObservationPair>& paired);

struct LogisticModel {
  double intercept = 0.0;
  Vector coef;
  std::size_t iterations = 0;
  bool converged = false;
  // Fitted linear predictor separates the two classes perfectly.
  bool separated = false;

  double logit(const Vector& x) const;
  double probability(const Vector& x) const;
};

/// Ridge-penalized logistic regression by Newton-Raphson. The intercept is
/// not penalized. Stops when the largest coefficient change falls below
/// `tol` or after `max_iters` passes.
LogisticModel fit_logistic(const Matrix& x, const Vector& y, double ridge = 1e-4,
                           std::size_t max_iters = 100, double tol = 1e-8);

/// Penalized log-likelihood the solver maximizes.
double logistic_penalized_loglik(const Matrix& x, const Vector& y, double intercept,
                                 const Vector& coef, double ridge);

struct PropensityModel {
  LogisticModel model;

  double logit(const Vector& x) const { return model.logit(x); }
  // |logit(p_i) - logit(p_j)|
  double operator()(const Vector& xi, const Vector& xj) const;
  PairScorer scorer() const;
};

/// Logistic model of group membership (treatment = 1) on every observation
/// in the dataset.
PropensityModel propensity_scorer(const SemiDataset& d);

}  // namespace scotoma
