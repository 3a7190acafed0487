#pragma once

#include "scotoma/dataset.hpp"
#include "scotoma/types.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scotoma {

/// Unit-norm variable-importance vector.
///
/// The sign is fixed so that the largest-magnitude entry is nonnegative, with
/// ties going to the lowest index. Construction from a zero or non-finite
/// vector throws NumericalError.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(const Vector& raw);

  /// Accepts a vector that is already unit norm (within 1e-9) without
  /// rescaling it, so a stored weight vector reloads bit for bit. Throws
  /// DataError otherwise.
  static WeightVector from_unit(const Vector& v);

  const Vector& values() const { return beta_; }
  Eigen::Index size() const { return beta_.size(); }
  double operator[](Eigen::Index i) const { return beta_[i]; }

 private:
  Vector beta_;
};

// coordinate,weight
void write_beta_csv(const WeightVector& beta, const std::vector<std::string>& names,
                    std::ostream& out);
// Returns the coordinate names and the weights in file order.
std::pair<std::vector<std::string>, WeightVector> read_beta_csv(std::istream& in);

/// Apply the sign convention to a vector in place (no normalization).
void apply_sign_convention(Vector& v);

/// Quadratic score (beta'(xi - xj))^2. The raw overload does not normalize beta.
double score(const WeightVector& beta, const Vector& xi, const Vector& xj);
double score(const Vector& beta, const Vector& xi, const Vector& xj);

/// All control x treatment scores under beta, computed through the projections.
Matrix score_matrix(const WeightVector& beta, const Matrix& controls, const Matrix& treatments);

/// Adjacency over the stacked rows (controls 1..n, treatments 1..n).
struct Adjacency {
  Matrix within;   // control i <-> treatment i
  Matrix between;  // control i <-> treatment j, i != j
};
Adjacency build_adjacency(std::size_t ell_dot);

/// Within-pair and between-pair scatter.
///
///   sigma_w = lambda I + (1/n) sum_i (c_i - t_i)(c_i - t_i)'
///   sigma_b = sum_{i != j} (c_i - t_j)(c_i - t_j)'
///
/// Each unordered edge is counted once.
struct ScatterPair {
  Matrix sigma_w;
  Matrix sigma_b;
  std::size_t ell_dot = 0;
  double lambda = 0.0;
};

/// Rows of `controls` and `treatments` are aligned expert pairs.
ScatterPair build_scatter(const Matrix& controls, const Matrix& treatments, double lambda);
ScatterPair build_scatter(const std::vector<ObservationPair>& paired, double lambda);

/// Scale-aware ridge: 1e-3 * trace(within scatter) / p.
double default_lambda(const Matrix& controls, const Matrix& treatments);

/// Penalized reward/loss ratio (beta' sigma_b beta) / (beta' sigma_w beta).
double objective_g(const Vector& beta, const ScatterPair& sp);

struct HyperParams {
  std::optional<double> lambda;       // nullopt: default_lambda on the initial pairs
  std::optional<std::size_t> tau1;    // nullopt: max(1, ell_dot / 5)
  std::size_t tau2 = 0;
  double delta0 = 1e-4;
  std::optional<double> epsilon;      // nullopt: "auto"
  std::size_t max_iters = 100;
  bool exclusion_enabled = false;
  std::uint64_t seed = 0;

  static constexpr std::size_t unlimited = std::numeric_limits<std::size_t>::max();

  /// Throws ConfigError when a bound is violated.
  void validate() const;
  std::size_t resolved_tau1(std::size_t ell_dot) const;
};

}  // namespace scotoma
