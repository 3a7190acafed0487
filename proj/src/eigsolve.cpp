#include "scotoma/eigsolve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace scotoma {

namespace {
constexpr double kMaxCondition = 1e12;
}

EigenSolution top_generalized_eigvec(const ScatterPair& sp) {
  const Eigen::Index p = sp.sigma_w.rows();
  if (p == 0 || sp.sigma_w.cols() != p || sp.sigma_b.rows() != p || sp.sigma_b.cols() != p) {
    throw DataError("top_generalized_eigvec: scatter matrices must be square and equal-sized");
  }
  if (!sp.sigma_w.allFinite() || !sp.sigma_b.allFinite()) {
    throw NumericalError("top_generalized_eigvec: non-finite scatter matrix");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> wsolve(sp.sigma_w, Eigen::EigenvaluesOnly);
  const double wmin = wsolve.eigenvalues()(0);
  const double wmax = wsolve.eigenvalues()(p - 1);
  if (!(wmin > 0.0) || wmax / wmin > kMaxCondition) {
    std::ostringstream msg;
    msg << "within-pair scatter is numerically singular (condition number "
        << (wmin > 0.0 ? wmax / wmin : INFINITY) << " > 1e12); increase lambda";
    throw NumericalError(msg.str());
  }

  Eigen::LLT<Matrix> llt(sp.sigma_w);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("within-pair scatter is not positive definite; increase lambda");
  }
  const auto L = llt.matrixL();
  // M = L^{-1} sigma_b L^{-T}
  Matrix tmp = L.solve(sp.sigma_b);
  Matrix m = L.solve(tmp.transpose());
  m = 0.5 * (m + m.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> msolve(m);
  if (msolve.info() != Eigen::Success) {
    throw NumericalError("eigen-decomposition of the reduced problem failed");
  }
  const Vector eta = msolve.eigenvectors().col(p - 1);
  Vector beta = llt.matrixU().solve(eta);

  EigenSolution sol;
  sol.eigenvalue = msolve.eigenvalues()(p - 1);
  sol.next_eigenvalue = p > 1 ? msolve.eigenvalues()(p - 2) : -INFINITY;
  sol.degenerate = p > 1 && (sol.eigenvalue - sol.next_eigenvalue <=
                             1e-10 * std::max(std::abs(sol.eigenvalue), 0.0));
  sol.beta = WeightVector(beta);

  const Vector& b = sol.beta.values();
  const Vector r = llt.solve(sp.sigma_b * b) - sol.eigenvalue * b;
  sol.residual = r.norm();
  return sol;
}

double subspace_dist(const Vector& b1, const Vector& b2) {
  if (b1.size() != b2.size()) throw DataError("subspace_dist: dimension mismatch");
  if (std::abs(b1.norm() - 1.0) > 1e-6 || std::abs(b2.norm() - 1.0) > 1e-6) {
    throw DataError("subspace_dist: inputs must be unit vectors");
  }
  // Component of b2 orthogonal to b1; accurate for small angles unlike 1 - cos^2.
  const Vector u1 = b1 / b1.norm();
  const Vector u2 = b2 / b2.norm();
  return std::clamp((u2 - u1.dot(u2) * u1).norm(), 0.0, 1.0);
}

double subspace_dist(const WeightVector& b1, const WeightVector& b2) {
  return subspace_dist(b1.values(), b2.values());
}

}  // namespace scotoma
