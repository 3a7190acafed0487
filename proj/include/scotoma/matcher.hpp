#pragma once

#include "scotoma/dataset.hpp"
#include "scotoma/score.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scotoma {

// rescan repeats the exhaustive minimum search every round. sorted_edges
// sorts all (score, control, treatment) triples once; both return identical
// matchings, including tie-breaks.
enum class MatchStrategy { rescan, sorted_edges };

struct IndexPair {
  std::size_t control = 0;
  std::size_t treatment = 0;
  double score = 0.0;
};

struct IndexMatching {
  std::vector<IndexPair> pairs;  // inclusion order
  std::vector<std::size_t> unmatched_control;
  std::vector<std::size_t> unmatched_treatment;
};

/// Sequential global-minimum one-to-one matching over a score matrix
/// (rows = controls, columns = treatments).
///
/// Each round takes the smallest remaining score, ties broken by the lowest
/// (control, treatment) index, and removes both units. Stops when either side
/// is exhausted, when `max_pairs` pairs are taken, when the smallest remaining
/// score exceeds `epsilon`, or when it is not finite (infeasible pairs are
/// never matched).
IndexMatching greedy_match_scores(const Matrix& scores, std::optional<double> epsilon = {},
                                  std::optional<std::size_t> max_pairs = {},
                                  MatchStrategy strategy = MatchStrategy::rescan);

struct MatchedPair {
  std::string control_id;
  std::string treatment_id;
  double score = 0.0;
};

struct Matching {
  std::vector<MatchedPair> pairs;
  std::vector<std::string> unmatched_control;
  std::vector<std::string> unmatched_treatment;
};

using PairScorer = std::function<double(const Vector&, const Vector&)>;

Matrix score_matrix(const PairScorer& scorer, const Matrix& controls, const Matrix& treatments);

Matching to_matching(const IndexMatching& m, const std::vector<Observation>& controls,
                     const std::vector<Observation>& treatments);

Matching greedy_match(const WeightVector& beta, const std::vector<Observation>& controls,
                      const std::vector<Observation>& treatments,
                      std::optional<double> epsilon = {},
                      std::optional<std::size_t> max_pairs = {},
                      MatchStrategy strategy = MatchStrategy::rescan);

Matching greedy_match(const PairScorer& scorer, const std::vector<Observation>& controls,
                      const std::vector<Observation>& treatments,
                      std::optional<double> epsilon = {},
                      std::optional<std::size_t> max_pairs = {},
                      MatchStrategy strategy = MatchStrategy::rescan);

// Expert pairing as (control id, treatment id).
using Truth = std::vector<std::pair<std::string, std::string>>;

/// Fraction of truth pairs reproduced by `predicted`. Throws DataError if a
/// predicted id does not occur in the truth pairs.
double matching_accuracy(const Matching& predicted, const Truth& truth);

struct RandomMatchingStats {
  std::size_t n_pairs = 0;
  std::size_t replicates = 0;
  double mean_accuracy = 0.0;
  double prob_no_correct = 0.0;
  double se_accuracy = 0.0;
  double se_prob_no_correct = 0.0;
};

/// Monte Carlo reference for random matching: every control independently
/// draws a uniformly random treatment.
RandomMatchingStats random_matching_stats(std::size_t n_pairs, std::size_t replicates,
                                          std::uint64_t seed);

// control_id,treatment_id,score,rank
void write_matching_csv(const Matching& m, std::ostream& out);
// group,id
void write_unmatched_csv(const Matching& m, std::ostream& out);
Matching read_matching_csv(std::istream& in);
// control_id,treatment_id
Truth read_truth_csv(std::istream& in);
void write_truth_csv(const Truth& truth, std::ostream& out);

}  // namespace scotoma
