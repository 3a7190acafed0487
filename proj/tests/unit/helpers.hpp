#pragma once

#include "scotoma/dataset.hpp"
#include "scotoma/rng.hpp"

#include <random>
#include <string>

namespace scotoma::test {

inline Vector random_vector(Rng& rng, Eigen::Index p, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Vector v(p);
  for (Eigen::Index k = 0; k < p; ++k) v[k] = n(rng);
  return v;
}

inline Vector random_unit(Rng& rng, Eigen::Index p) {
  Vector v = random_vector(rng, p);
  return v / v.norm();
}

inline Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  }
  return m;
}

inline Observation obs(const std::string& id, Group g, Vector x) {
  return Observation{id, g, std::move(x)};
}

inline std::vector<std::string> names(std::size_t p) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < p; ++k) out.push_back("x" + std::to_string(k + 1));
  return out;
}

// Paired training set with the given pair rows; pools and object set empty.
inline SemiDataset paired_dataset(const Matrix& c, const Matrix& t) {
  SemiDataset d;
  d.covariate_names = names(static_cast<std::size_t>(c.cols()));
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const auto k = std::to_string(i);
    d.paired.push_back({obs("c" + k, Group::control, c.row(i).transpose()),
                        obs("t" + k, Group::treatment, t.row(i).transpose()), "p" + k});
  }
  return d;
}

}  // namespace scotoma::test
