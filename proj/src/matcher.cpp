#include "scotoma/matcher.hpp"

#include "csv.hpp"
#include "scotoma/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_set>

namespace scotoma {

namespace {

void check_scores(const Matrix& scores) {
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      if (std::isnan(scores(i, j))) throw NumericalError("greedy_match: NaN score");
    }
  }
}

IndexMatching finish(std::vector<IndexPair> pairs, const std::vector<char>& used_c,
                     const std::vector<char>& used_t) {
  IndexMatching m;
  m.pairs = std::move(pairs);
  for (std::size_t i = 0; i < used_c.size(); ++i) {
    if (!used_c[i]) m.unmatched_control.push_back(i);
  }
  for (std::size_t j = 0; j < used_t.size(); ++j) {
    if (!used_t[j]) m.unmatched_treatment.push_back(j);
  }
  return m;
}

IndexMatching match_rescan(const Matrix& s, std::optional<double> eps, std::size_t limit) {
  const auto nc = static_cast<std::size_t>(s.rows());
  const auto nt = static_cast<std::size_t>(s.cols());
  std::vector<char> used_c(nc, 0), used_t(nt, 0);
  std::vector<IndexPair> pairs;
  while (pairs.size() < limit) {
    double best = INFINITY;
    std::size_t bi = 0, bj = 0;
    bool found = false;
    for (std::size_t i = 0; i < nc; ++i) {
      if (used_c[i]) continue;
      for (std::size_t j = 0; j < nt; ++j) {
        if (used_t[j]) continue;
        const double v = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    if (!found) break;  // pools exhausted or only infeasible pairs remain
    if (eps && best > *eps) break;
    used_c[bi] = used_t[bj] = 1;
    pairs.push_back({bi, bj, best});
  }
  return finish(std::move(pairs), used_c, used_t);
}

IndexMatching match_sorted(const Matrix& s, std::optional<double> eps, std::size_t limit) {
  const auto nc = static_cast<std::size_t>(s.rows());
  const auto nt = static_cast<std::size_t>(s.cols());
  std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
  edges.reserve(nc * nt);
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      const double v = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (std::isfinite(v)) edges.emplace_back(v, i, j);
    }
  }
  std::sort(edges.begin(), edges.end());
  std::vector<char> used_c(nc, 0), used_t(nt, 0);
  std::vector<IndexPair> pairs;
  for (const auto& [v, i, j] : edges) {
    if (pairs.size() >= limit) break;
    if (used_c[i] || used_t[j]) continue;
    if (eps && v > *eps) break;
    used_c[i] = used_t[j] = 1;
    pairs.push_back({i, j, v});
  }
  return finish(std::move(pairs), used_c, used_t);
}

}  // namespace

IndexMatching greedy_match_scores(const Matrix& scores, std::optional<double> epsilon,
                                  std::optional<std::size_t> max_pairs, MatchStrategy strategy) {
  if (epsilon && !(*epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  check_scores(scores);
  const std::size_t limit = max_pairs.value_or(static_cast<std::size_t>(-1));
  return strategy == MatchStrategy::rescan ? match_rescan(scores, epsilon, limit)
                                           : match_sorted(scores, epsilon, limit);
}

Matrix score_matrix(const PairScorer& scorer, const Matrix& controls, const Matrix& treatments) {
  if (controls.cols() != treatments.cols()) throw DataError("score_matrix: dimension mismatch");
  Matrix s(controls.rows(), treatments.rows());
  Vector xi, xj;
  for (Eigen::Index i = 0; i < controls.rows(); ++i) {
    xi = controls.row(i).transpose();
    for (Eigen::Index j = 0; j < treatments.rows(); ++j) {
      xj = treatments.row(j).transpose();
      s(i, j) = scorer(xi, xj);
    }
  }
  return s;
}

Matching to_matching(const IndexMatching& m, const std::vector<Observation>& controls,
                     const std::vector<Observation>& treatments) {
  Matching out;
  out.pairs.reserve(m.pairs.size());
  for (const auto& pr : m.pairs) {
    out.pairs.push_back({controls.at(pr.control).id, treatments.at(pr.treatment).id, pr.score});
  }
  for (auto i : m.unmatched_control) out.unmatched_control.push_back(controls.at(i).id);
  for (auto j : m.unmatched_treatment) out.unmatched_treatment.push_back(treatments.at(j).id);
  return out;
}

Matching greedy_match(const WeightVector& beta, const std::vector<Observation>& controls,
                      const std::vector<Observation>& treatments, std::optional<double> epsilon,
                      std::optional<std::size_t> max_pairs, MatchStrategy strategy) {
  const auto p = static_cast<std::size_t>(beta.size());
  const Matrix s = score_matrix(beta, stack_rows(controls, p), stack_rows(treatments, p));
  return to_matching(greedy_match_scores(s, epsilon, max_pairs, strategy), controls, treatments);
}

Matching greedy_match(const PairScorer& scorer, const std::vector<Observation>& controls,
                      const std::vector<Observation>& treatments, std::optional<double> epsilon,
                      std::optional<std::size_t> max_pairs, MatchStrategy strategy) {
  std::size_t p = 0;
  if (!controls.empty()) p = static_cast<std::size_t>(controls.front().x.size());
  else if (!treatments.empty()) p = static_cast<std::size_t>(treatments.front().x.size());
  const Matrix s = score_matrix(scorer, stack_rows(controls, p), stack_rows(treatments, p));
  return to_matching(greedy_match_scores(s, epsilon, max_pairs, strategy), controls, treatments);
}

double matching_accuracy(const Matching& predicted, const Truth& truth) {
  if (truth.empty()) throw DataError("matching_accuracy: truth pairing is empty");
  std::set<std::pair<std::string, std::string>> truth_set(truth.begin(), truth.end());
  std::unordered_set<std::string> controls, treatments;
  for (const auto& [c, t] : truth) {
    controls.insert(c);
    treatments.insert(t);
  }
  std::size_t hits = 0;
  for (const auto& pr : predicted.pairs) {
    if (!controls.count(pr.control_id)) {
      throw DataError("matching_accuracy: control '" + pr.control_id + "' not in truth pairing");
    }
    if (!treatments.count(pr.treatment_id)) {
      throw DataError("matching_accuracy: treatment '" + pr.treatment_id +
                      "' not in truth pairing");
    }
    hits += truth_set.count({pr.control_id, pr.treatment_id});
  }
  return static_cast<double>(hits) / static_cast<double>(truth_set.size());
}

RandomMatchingStats random_matching_stats(std::size_t n_pairs, std::size_t replicates,
                                          std::uint64_t seed) {
  if (n_pairs < 1) throw ConfigError("random_matching_stats: n_pairs must be >= 1");
  if (replicates < 1) throw ConfigError("random_matching_stats: replicates must be >= 1");
  Rng rng = make_stream(seed, n_pairs);
  std::uniform_int_distribution<std::size_t> pick(0, n_pairs - 1);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t none = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n_pairs; ++i) correct += pick(rng) == i;
    const double acc = static_cast<double>(correct) / static_cast<double>(n_pairs);
    sum += acc;
    sum_sq += acc * acc;
    none += correct == 0;
  }
  const double reps = static_cast<double>(replicates);
  RandomMatchingStats st;
  st.n_pairs = n_pairs;
  st.replicates = replicates;
  st.mean_accuracy = sum / reps;
  st.prob_no_correct = static_cast<double>(none) / reps;
  const double var = std::max(0.0, sum_sq / reps - st.mean_accuracy * st.mean_accuracy);
  st.se_accuracy = std::sqrt(var / reps);
  st.se_prob_no_correct = std::sqrt(st.prob_no_correct * (1.0 - st.prob_no_correct) / reps);
  return st;
}

void write_matching_csv(const Matching& m, std::ostream& out) {
  out << "control_id,treatment_id,score,rank\n";
  for (std::size_t k = 0; k < m.pairs.size(); ++k) {
    const auto& pr = m.pairs[k];
    out << csv::quote(pr.control_id) << ',' << csv::quote(pr.treatment_id) << ','
        << csv::format_double(pr.score) << ',' << (k + 1) << '\n';
  }
}

void write_unmatched_csv(const Matching& m, std::ostream& out) {
  out << "group,id\n";
  for (const auto& id : m.unmatched_control) out << "c," << csv::quote(id) << '\n';
  for (const auto& id : m.unmatched_treatment) out << "t," << csv::quote(id) << '\n';
}

Matching read_matching_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("matching file is empty");
  const auto header = csv::split(line);
  if (header.size() < 2 || header[0] != "control_id" || header[1] != "treatment_id") {
    throw DataError("matching file must start with control_id,treatment_id");
  }
  Matching m;
  while (std::getline(in, line)) {
    if (csv::is_blank(line)) continue;
    const auto f = csv::split(line);
    if (f.size() != header.size()) throw DataError("ragged row in matching file");
    MatchedPair pr{f[0], f[1], 0.0};
    if (f.size() > 2) {
      try {
        pr.score = std::stod(f[2]);
      } catch (const std::exception&) {
        throw DataError("non-numeric score '" + f[2] + "' in matching file");
      }
    }
    m.pairs.push_back(std::move(pr));
  }
  return m;
}

Truth read_truth_csv(std::istream& in) {
  const Matching m = read_matching_csv(in);
  Truth t;
  for (const auto& pr : m.pairs) t.emplace_back(pr.control_id, pr.treatment_id);
  return t;
}

void write_truth_csv(const Truth& truth, std::ostream& out) {
  out << "control_id,treatment_id\n";
  for (const auto& [c, t] : truth) out << csv::quote(c) << ',' << csv::quote(t) << '\n';
}

}  // namespace scotoma
