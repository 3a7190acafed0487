#pragma once

#include "scotoma/score.hpp"

namespace scotoma {

struct EigenSolution {
  WeightVector beta;
  double eigenvalue = 0.0;
  // Second-largest eigenvalue of the reduced problem.
  double next_eigenvalue = 0.0;
  // Top eigenvalue within 1e-10 (relative) of the next one.
  bool degenerate = false;
  // ||sigma_w^{-1} sigma_b beta - eigenvalue * beta||_2
  double residual = 0.0;
};

/// Top eigenvector of sigma_w^{-1} sigma_b.
///
/// Solved through the symmetric reduction: sigma_w = L L' (Cholesky),
/// eta = top eigenvector of L^{-1} sigma_b L^{-T}, beta = L^{-T} eta.
/// Throws NumericalError when sigma_w is not positive definite or its
/// condition number exceeds 1e12.
EigenSolution top_generalized_eigvec(const ScatterPair& sp);

/// sin of the angle between two unit vectors, i.e. ||b1 b1' - b2 b2'||_2.
/// Throws DataError when the norms are off by more than 1e-6.
double subspace_dist(const Vector& b1, const Vector& b2);
double subspace_dist(const WeightVector& b1, const WeightVector& b2);

}  // namespace scotoma
