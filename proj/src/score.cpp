#include "scotoma/score.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace scotoma {

void apply_sign_convention(Vector& v) {
  if (v.size() == 0) return;
  Eigen::Index arg = 0;
  double best = std::abs(v[0]);
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > best) {
      best = std::abs(v[i]);
      arg = i;
    }
  }
  if (v[arg] < 0.0) v = -v;
}

WeightVector::WeightVector(const Vector& raw) : beta_(raw) {
  const double n = beta_.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw NumericalError("weight vector must be finite and nonzero");
  }
  beta_ /= n;
  apply_sign_convention(beta_);
}

WeightVector WeightVector::from_unit(const Vector& v) {
  if (v.size() == 0 || !v.allFinite() || std::abs(v.norm() - 1.0) > 1e-9) {
    throw DataError("weight vector must be finite with unit norm");
  }
  WeightVector w;
  w.beta_ = v;
  apply_sign_convention(w.beta_);
  return w;
}

void write_beta_csv(const WeightVector& beta, const std::vector<std::string>& names,
                    std::ostream& out) {
  if (names.size() != static_cast<std::size_t>(beta.size())) {
    throw DataError("write_beta_csv: name count does not match dimension");
  }
  out << "coordinate,weight\n";
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    out << csv::quote(names[static_cast<std::size_t>(k)]) << ',' << csv::format_double(beta[k])
        << '\n';
  }
}

std::pair<std::vector<std::string>, WeightVector> read_beta_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("beta file is empty");
  const auto header = csv::split(line);
  if (header.size() != 2 || header[0] != "coordinate" || header[1] != "weight") {
    throw DataError("beta file must have header coordinate,weight");
  }
  std::vector<std::string> names;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (csv::is_blank(line)) continue;
    const auto f = csv::split(line);
    if (f.size() != 2) throw DataError("ragged row in beta file");
    char* end = nullptr;
    const double v = std::strtod(f[1].c_str(), &end);
    if (f[1].empty() || *end != '\0') {
      throw DataError("non-numeric weight '" + f[1] + "' for " + f[0]);
    }
    names.push_back(f[0]);
    values.push_back(v);
  }
  if (values.empty()) throw DataError("beta file has no coordinates");
  const Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  return {names, WeightVector::from_unit(v)};
}

double score(const Vector& beta, const Vector& xi, const Vector& xj) {
  if (beta.size() != xi.size() || xi.size() != xj.size()) {
    throw DataError("score: dimension mismatch (beta " + std::to_string(beta.size()) + ", xi " +
                    std::to_string(xi.size()) + ", xj " + std::to_string(xj.size()) + ")");
  }
  const double proj = beta.dot(xi - xj);
  return proj * proj;
}

double score(const WeightVector& beta, const Vector& xi, const Vector& xj) {
  return score(beta.values(), xi, xj);
}

Matrix score_matrix(const WeightVector& beta, const Matrix& controls, const Matrix& treatments) {
  if (controls.cols() != beta.size() || treatments.cols() != beta.size()) {
    throw DataError("score_matrix: dimension mismatch");
  }
  const Vector zc = controls * beta.values();
  const Vector zt = treatments * beta.values();
  Matrix s(zc.size(), zt.size());
  for (Eigen::Index j = 0; j < zt.size(); ++j) {
    for (Eigen::Index i = 0; i < zc.size(); ++i) {
      const double d = zc[i] - zt[j];
      s(i, j) = d * d;
    }
  }
  return s;
}

Adjacency build_adjacency(std::size_t ell_dot) {
  const auto n = static_cast<Eigen::Index>(ell_dot);
  Adjacency a{Matrix::Zero(2 * n, 2 * n), Matrix::Zero(2 * n, 2 * n)};
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    for (Eigen::Index j = 0; j < 2 * n; ++j) {
      const bool cross = (i < n) != (j < n);
      if (!cross) continue;
      if (std::abs(i - j) == n) {
        a.within(i, j) = 1.0;
      } else {
        a.between(i, j) = 1.0;
      }
    }
  }
  return a;
}

ScatterPair build_scatter(const Matrix& controls, const Matrix& treatments, double lambda) {
  if (controls.rows() != treatments.rows() || controls.cols() != treatments.cols()) {
    throw DataError("build_scatter: control and treatment blocks must have equal shape");
  }
  if (controls.rows() == 0) throw DataError("build_scatter: need at least one expert pair");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("lambda must be a finite nonnegative number");
  }
  const Eigen::Index n = controls.rows();
  const Eigen::Index p = controls.cols();
  const double nd = static_cast<double>(n);

  // Both scatters are translation invariant; centering keeps the expanded
  // cross sum accurate when covariates carry a large common offset.
  const Eigen::RowVectorXd center =
      (controls.colwise().sum() + treatments.colwise().sum()) / (2.0 * nd);
  const Matrix c = controls.rowwise() - center;
  const Matrix t = treatments.rowwise() - center;
  const Matrix diff = c - t;
  const Matrix within = diff.transpose() * diff;

  // sum_{i,j} (c_i - t_j)(c_i - t_j)' expanded, minus the n paired terms.
  const Vector sc = c.colwise().sum().transpose();
  const Vector st = t.colwise().sum().transpose();
  Matrix cross = nd * (c.transpose() * c) + nd * (t.transpose() * t) - sc * st.transpose() -
                 st * sc.transpose();
  cross -= within;

  ScatterPair sp;
  sp.ell_dot = static_cast<std::size_t>(n);
  sp.lambda = lambda;
  sp.sigma_w = within / nd + lambda * Matrix::Identity(p, p);
  sp.sigma_w = 0.5 * (sp.sigma_w + sp.sigma_w.transpose()).eval();
  sp.sigma_b = 0.5 * (cross + cross.transpose());
  return sp;
}

ScatterPair build_scatter(const std::vector<ObservationPair>& paired, double lambda) {
  if (paired.empty()) throw DataError("build_scatter: need at least one expert pair");
  const auto p = static_cast<Eigen::Index>(paired.front().control.x.size());
  Matrix c(static_cast<Eigen::Index>(paired.size()), p);
  Matrix t(static_cast<Eigen::Index>(paired.size()), p);
  for (std::size_t i = 0; i < paired.size(); ++i) {
    if (paired[i].control.x.size() != p || paired[i].treatment.x.size() != p) {
      throw DataError("build_scatter: ragged covariates in pair " + std::to_string(i));
    }
    c.row(static_cast<Eigen::Index>(i)) = paired[i].control.x;
    t.row(static_cast<Eigen::Index>(i)) = paired[i].treatment.x;
  }
  return build_scatter(c, t, lambda);
}

double default_lambda(const Matrix& controls, const Matrix& treatments) {
  if (controls.rows() == 0 || controls.cols() == 0) {
    throw DataError("default_lambda: need at least one expert pair");
  }
  const Matrix diff = controls - treatments;
  const double trace = diff.squaredNorm() / static_cast<double>(controls.rows());
  const double lam = 1e-3 * trace / static_cast<double>(controls.cols());
  // Identical pairs give a zero trace; fall back to a tiny absolute ridge.
  return lam > 0.0 ? lam : 1e-12;
}

double objective_g(const Vector& beta, const ScatterPair& sp) {
  if (beta.size() != sp.sigma_w.rows()) throw DataError("objective_g: dimension mismatch");
  if (beta.isZero(0.0)) throw NumericalError("objective_g: beta must be nonzero");
  const double den = beta.dot(sp.sigma_w * beta);
  const double num = beta.dot(sp.sigma_b * beta);
  if (!(den > 0.0)) throw NumericalError("objective_g: within-pair scatter is not positive");
  return num / den;
}

void HyperParams::validate() const {
  if (lambda && (!(*lambda >= 0.0) || !std::isfinite(*lambda))) {
    throw ConfigError("lambda must be finite and >= 0");
  }
  if (tau1 && *tau1 < 1) throw ConfigError("tau1 must be >= 1");
  if (!(delta0 >= 0.0)) throw ConfigError("delta0 must be >= 0");
  if (epsilon && !(*epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
}

std::size_t HyperParams::resolved_tau1(std::size_t ell_dot) const {
  if (tau1) return *tau1;
  return std::max<std::size_t>(1, ell_dot / 5);
}

}  // namespace scotoma
