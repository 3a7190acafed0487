#pragma once

#include "scotoma/dataset.hpp"
#include "scotoma/eigsolve.hpp"
#include "scotoma/matcher.hpp"
#include "scotoma/score.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace scotoma {

enum class StopReason { converged, pools_exhausted, all_excluded, max_iters };
std::string to_string(StopReason r);

struct IterationRecord {
  std::size_t iteration = 0;
  double delta_inf = 0.0;      // ||beta(k+1) - beta(k)||_inf after sign alignment
  std::size_t added = 0;       // pairs moved into the training set (both pools)
  std::size_t added_object = 0;
  std::size_t excluded = 0;
};

struct FitState {
  std::size_t iteration = 0;
  WeightVector beta;
  // Expert pairs followed by inclusions, in inclusion order.
  std::vector<ObservationPair> paired;
  std::vector<Observation> pool_control;
  std::vector<Observation> pool_treatment;
  std::vector<Observation> object_control;
  std::vector<Observation> object_treatment;
  std::vector<IterationRecord> trajectory;
  // Object pairs absorbed during self-taught iterations.
  std::vector<MatchedPair> object_inclusions;
  // Final pairing of the object set: absorbed pairs, then the thresholded
  // greedy matching of what remains.
  Matching object_matching;
  StopReason stop_reason = StopReason::pools_exhausted;
  bool converged = false;
  bool degenerate = false;
  double lambda = 0.0;
  double epsilon = 0.0;
  std::size_t tau1 = 0;
  std::vector<std::string> warnings;
};

struct FitResult {
  WeightVector beta;
  FitState state;
};

/// lambda from the hyperparameters, or default_lambda on the expert pairs.
double resolve_lambda(const SemiDataset& d, const HyperParams& hp);

/// Top generalized eigenvector on a set of pairs. Throws NumericalError
/// ("insufficient pairs") when the between-pair scatter vanishes.
EigenSolution solve_pairs(const std::vector<ObservationPair>& paired, double lambda);

/// beta(0) from the expert pairs alone.
WeightVector fit_initial(const SemiDataset& d, const HyperParams& hp);
EigenSolution fit_initial_solution(const SemiDataset& d, const HyperParams& hp);

/// Iterative inclusion from the unpaired training pools.
FitResult fit_canonical(const SemiDataset& d, const HyperParams& hp);

/// As fit_canonical, also absorbing tau2 pairs per iteration from the object
/// set (never mixing training and object observations in one pair).
FitResult fit_self_taught(const SemiDataset& d, const HyperParams& hp);

struct ExclusionOutcome {
  std::vector<char> accepted;             // one flag per candidate
  std::vector<WeightVector> loo_betas;    // leave-one-out estimate per candidate
  std::size_t n_accepted = 0;
};

/// Leave-one-out reciprocal-nearest-neighbour filter.
///
/// `candidates` index rows of the current pools. For candidate s, the
/// leave-one-out weight maximizes
///
///   sum_{s' != s} S(c_s', t_s') / (lambda b'b + sum_{s1 != s2; s1, s2 != s} S(c_s1, t_s2))
///
/// over the candidate batch; the candidate is kept only if, under that
/// weight, its control's nearest pool treatment and its treatment's nearest
/// pool control are each other (ties count as nearest).
ExclusionOutcome exclusion_step(const std::vector<IndexPair>& candidates, const Matrix& pool_control,
                                const Matrix& pool_treatment, double lambda);

/// epsilon from the hyperparameters, or the largest within-pair score of
/// `paired` under beta.
double resolve_epsilon(const HyperParams& hp, const WeightVector& beta,
                       const std::vector<ObservationPair>& paired);

// iteration,delta_inf,added,excluded
void write_trajectory_csv(const FitState& s, std::ostream& out);

}  // namespace scotoma
