#pragma once

#include "scotoma/dataset.hpp"
#include "scotoma/fit.hpp"
#include "scotoma/matcher.hpp"
#include "scotoma/score.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace scotoma {

enum class ExpertKind { weighted_euclidean, conjunctive };
std::string to_string(ExpertKind k);
ExpertKind parse_expert_kind(const std::string& s);

// index: observation i of each group is centred at (i, ..., i).
// shared: one offset drawn from U[0, 5] for the whole sample.
enum class MeanDesign { index, shared };
std::string to_string(MeanDesign m);
MeanDesign parse_mean_design(const std::string& s);

// Product feature x_principal * x_noise entering the expert distance.
struct Interaction {
  std::size_t principal = 0;
  std::size_t noise = 0;
  double weight = 0.2;
};

struct DgpConfig {
  std::size_t p = 12;
  std::size_t n_train_pairs = 24;
  std::size_t n_unpaired = 0;   // unpaired observations per group
  std::size_t n_test_pairs = 20;
  double b = 0.5;               // treatment shift on the first coordinate
  double sigma2 = 0.25;
  MeanDesign mean = MeanDesign::shared;
  ExpertKind expert = ExpertKind::weighted_euclidean;
  // nullopt: two distinct coordinates drawn per replicate.
  std::optional<std::array<std::size_t, 2>> principal_idx;
  double w_principal = 0.9;
  double w_noise = 0.05;
  double c = 1.5;               // conjunctive gate on the principal coordinates
  double rho = 0.0;             // equicorrelation
  // Explicit interactions; when empty, n_interactions are drawn per replicate
  // (distinct noise coordinates, each paired with a random principal one).
  std::vector<Interaction> interactions;
  std::size_t n_interactions = 0;
  double interaction_weight = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const DgpConfig& cfg);
// Missing keys keep the defaults; unknown keys raise ConfigError.
DgpConfig dgp_from_json(const nlohmann::json& j, DgpConfig base = {});

struct GeneratedData {
  SemiDataset data;
  Truth truth;                              // expert pairing of the object set
  std::optional<WeightVector> true_beta;    // weighted_euclidean without interactions
  Vector weights;                           // linear expert weights
  std::array<std::size_t, 2> principal{};
  std::vector<Interaction> interactions;
  std::vector<std::size_t> noise_idx;       // coordinates that are not principal
  std::size_t attempts = 1;                  // samples drawn
};

/// p x p covariance sigma2 * ((1 - rho) I + rho 11').
Matrix dgp_covariance(const DgpConfig& cfg);

/// Expert dissimilarity between a control and a treatment:
/// (w'd + sum_k w_k d(x_principal * x_noise))^2, infinite under the
/// conjunctive rule unless both principal differences are below c.
double expert_distance(const Vector& xc, const Vector& xt, const Vector& w,
                       const std::vector<Interaction>& interactions, ExpertKind kind,
                       const std::array<std::size_t, 2>& principal, double c);

/// Draws one replicate. Pairs come from the expert's greedy matching
/// (greedy_match_scores on expert_distance) of a full-size
/// sample and are split at random into expert-paired, unpaired and object
/// blocks; treatments inside the unpaired and object blocks are shuffled.
/// When the conjunctive gate leaves controls unmatched, further samples are
/// drawn and matched until the blocks are full. 100 samples without a single
/// feasible pair raise DataError.
GeneratedData generate(const DgpConfig& cfg);

// --- experiments ------------------------------------------------------------

enum class Method { scotoma, scotoma_initial, scotoma_self_taught, euclidean, mahalanobis,
                    propensity, rca };
std::string to_string(Method m);
Method parse_method(const std::string& s);

struct ExperimentCell {
  std::string label;
  DgpConfig cfg;
};

/// Cartesian product of `grid` (key -> list of values) over `base`.
std::vector<ExperimentCell> expand_grid(const DgpConfig& base, const nlohmann::json& grid);

struct ExperimentSpec {
  std::vector<ExperimentCell> cells;
  std::vector<Method> methods;
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  HyperParams hp;
  std::size_t threads = 1;
};

struct ReplicateRecord {
  std::size_t cell = 0;
  std::size_t replicate = 0;
  Method method = Method::scotoma;
  double accuracy = 0.0;
  bool failed = false;
  std::string error;
};

struct MethodSummary {
  std::size_t cell = 0;
  Method method = Method::scotoma;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  double q25 = 0.0, median = 0.0, q75 = 0.0, mean = 0.0;
  // More than 10% of replicates raised an error.
  bool cell_failed = false;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<ReplicateRecord> records;  // cell-major, then replicate, then method
  std::vector<MethodSummary> summary;

  const MethodSummary& find(std::size_t cell, Method m) const;
};

/// Matches the object block of every replicate with every method; the
/// object set is matched completely (no epsilon) so methods are comparable.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// cell,label,replicate,method,accuracy,failed,error
void write_experiment_csv(const ExperimentResult& r, std::ostream& out);
nlohmann::json experiment_summary_json(const ExperimentResult& r);

/// Seed of replicate `rep` in grid cell `cell`.
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t cell, std::size_t rep);

/// Runs fn(i) for i in [0, n) on `threads` workers. The first exception is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Linear-interpolated quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> v, double q);

// --- protocols --------------------------------------------------------------

/// Mean |beta| over noise coordinates that appear in an interaction minus the
/// mean over those that do not.
double interaction_weight_diff(const WeightVector& beta, const GeneratedData& g);

struct InteractionCell {
  std::size_t n_pairs = 0;
  std::size_t n_interactions = 0;
  std::size_t replicates = 0;
  double mean_diff = 0.0;
  double se_diff = 0.0;
};

/// One cell per (pairs, interactions); beta is fitted on the expert pairs. A
/// zero count compares one randomly marked noise coordinate with the rest.
std::vector<InteractionCell> interaction_table(const DgpConfig& base,
                                               const std::vector<std::size_t>& pairs,
                                               const std::vector<std::size_t>& interactions,
                                               std::size_t replicates, std::uint64_t seed,
                                               const HyperParams& hp, std::size_t threads = 1);

struct SelfTaughtPoint {
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  double gain = 0.0;
  std::size_t iterations = 0;
};

struct SelfTaughtReport {
  std::vector<SelfTaughtPoint> points;
  double mean_gain = 0.0;
  // gain ~ a x^2 + b x + c in the initial accuracy x
  std::array<double, 3> quad{};
  // Initial-accuracy interval where the fitted gain is positive; the upper
  // end doubles as the accuracy cap. Empty when the fit is nowhere positive.
  std::optional<std::array<double, 2>> mediocre_range;
};

/// Per replicate: accuracy of beta(0) on the object set, then the accuracy of
/// the self-taught output after at most `iterations` iterations. tau2
/// defaults to tau1 when hp.tau2 is 0.
SelfTaughtReport self_taught_gain_protocol(const DgpConfig& cfg, std::size_t replicates,
                                           std::size_t iterations, std::uint64_t seed,
                                           HyperParams hp, std::size_t threads = 1);

/// Least-squares polynomial coefficients, highest degree first.
std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y,
                            std::size_t degree);

struct RatePoint {
  std::size_t n_pairs = 0;
  double mean_dist = 0.0;
  double se_dist = 0.0;
};

struct RateReport {
  std::vector<RatePoint> points;
  double slope = 0.0;  // log(mean_dist) on log(n_pairs)
};

/// Empirical convergence rate of beta(0). Expert pairs come from independent
/// sessions, each a greedy expert matching of n_train_pairs + n_unpaired +
/// n_test_pairs draws per group (linear expert). Per replicate, beta(0) is
/// fitted on n such pairs and beta* on `master_factor` * n fresh pairs, and
/// the replicate records their subspace_dist.
RateReport rate_protocol(const DgpConfig& base, const std::vector<std::size_t>& n_pairs,
                         std::size_t replicates, std::size_t master_factor, std::uint64_t seed,
                         std::optional<double> lambda, std::size_t threads = 1);

}  // namespace scotoma
