#include "scotoma/fit.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace scotoma {

namespace {

// Remove the given indices (any order) from a vector, preserving the order of
// the survivors.
template <class T>
void erase_indices(std::vector<T>& v, std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  std::vector<T> out;
  out.reserve(v.size() - idx.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (k < idx.size() && idx[k] == i) {
      ++k;
      continue;
    }
    out.push_back(std::move(v[i]));
  }
  v = std::move(out);
}

double aligned_delta(const Vector& next, const Vector& prev) {
  const double same = (next - prev).cwiseAbs().maxCoeff();
  const double flipped = (next + prev).cwiseAbs().maxCoeff();
  return std::min(same, flipped);
}

// Greedy candidate batch of size <= limit from two pools under beta.
std::vector<IndexPair> select_batch(const WeightVector& beta, const Matrix& c, const Matrix& t,
                                    std::size_t limit) {
  if (limit == 0 || c.rows() == 0 || t.rows() == 0) return {};
  return greedy_match_scores(score_matrix(beta, c, t), std::nullopt, limit,
                             MatchStrategy::sorted_edges)
      .pairs;
}

void check_fit_inputs(const SemiDataset& d, const HyperParams& hp) {
  hp.validate();
  if (d.paired.empty()) throw DataError("fit requires at least one expert pair");
  d.validate();
}

enum class FitMode { canonical, self_taught };

FitResult run_fit(const SemiDataset& d, const HyperParams& hp, FitMode mode) {
  check_fit_inputs(d, hp);
  const std::size_t p = d.p();
  FitState st;
  st.lambda = resolve_lambda(d, hp);
  st.tau1 = hp.resolved_tau1(d.paired.size());
  const std::size_t tau2 = mode == FitMode::self_taught ? hp.tau2 : 0;
  if (hp.exclusion_enabled && st.tau1 < 2) {
    throw ConfigError("exclusion requires tau1 >= 2");
  }
  if (p > d.paired.size()) {
    st.warnings.push_back("more covariates (" + std::to_string(p) + ") than expert pairs (" +
                          std::to_string(d.paired.size()) + ")");
  }

  st.paired = d.paired;
  st.pool_control = d.unpaired_control;
  st.pool_treatment = d.unpaired_treatment;
  st.object_control = d.object_control;
  st.object_treatment = d.object_treatment;

  EigenSolution sol = solve_pairs(st.paired, st.lambda);
  st.beta = sol.beta;
  st.degenerate = sol.degenerate;

  auto training_open = [&] { return !st.pool_control.empty() && !st.pool_treatment.empty(); };
  auto object_open = [&] {
    return tau2 > 0 && !st.object_control.empty() && !st.object_treatment.empty();
  };

  while (true) {
    if (!training_open() && !object_open()) {
      st.stop_reason = StopReason::pools_exhausted;
      break;
    }
    if (st.iteration >= hp.max_iters) {
      st.stop_reason = StopReason::max_iters;
      st.warnings.push_back("stopped at max_iters without convergence");
      break;
    }

    const Matrix pc = stack_rows(st.pool_control, p);
    const Matrix pt = stack_rows(st.pool_treatment, p);
    std::vector<IndexPair> batch = select_batch(st.beta, pc, pt, st.tau1);

    std::size_t excluded = 0;
    if (hp.exclusion_enabled && batch.size() >= 2) {
      const ExclusionOutcome ex = exclusion_step(batch, pc, pt, st.lambda);
      std::vector<IndexPair> kept;
      for (std::size_t s = 0; s < batch.size(); ++s) {
        if (ex.accepted[s]) kept.push_back(batch[s]);
      }
      excluded = batch.size() - kept.size();
      batch = std::move(kept);
    }

    std::vector<IndexPair> object_batch;
    if (object_open()) {
      object_batch = select_batch(st.beta, stack_rows(st.object_control, p),
                                  stack_rows(st.object_treatment, p), tau2);
    }

    IterationRecord rec;
    rec.iteration = st.iteration + 1;
    rec.excluded = excluded;
    if (batch.empty() && object_batch.empty()) {
      st.trajectory.push_back(rec);
      st.stop_reason = StopReason::all_excluded;
      break;
    }

    std::vector<std::size_t> drop_c, drop_t;
    for (const auto& pr : batch) {
      st.paired.push_back(
          {st.pool_control[pr.control], st.pool_treatment[pr.treatment], std::string()});
      drop_c.push_back(pr.control);
      drop_t.push_back(pr.treatment);
    }
    erase_indices(st.pool_control, drop_c);
    erase_indices(st.pool_treatment, drop_t);

    drop_c.clear();
    drop_t.clear();
    for (const auto& pr : object_batch) {
      const auto& oc = st.object_control[pr.control];
      const auto& ot = st.object_treatment[pr.treatment];
      st.paired.push_back({oc, ot, std::string()});
      st.object_inclusions.push_back({oc.id, ot.id, pr.score});
      drop_c.push_back(pr.control);
      drop_t.push_back(pr.treatment);
    }
    erase_indices(st.object_control, drop_c);
    erase_indices(st.object_treatment, drop_t);

    sol = solve_pairs(st.paired, st.lambda);
    rec.delta_inf = aligned_delta(sol.beta.values(), st.beta.values());
    rec.added = batch.size() + object_batch.size();
    rec.added_object = object_batch.size();
    st.beta = sol.beta;
    st.degenerate = st.degenerate || sol.degenerate;
    ++st.iteration;
    st.trajectory.push_back(rec);

    if (rec.delta_inf <= hp.delta0) {
      st.converged = true;
      st.stop_reason = StopReason::converged;
      break;
    }
  }

  st.epsilon = resolve_epsilon(hp, st.beta, st.paired);
  st.object_matching.pairs = st.object_inclusions;
  const Matching rest =
      greedy_match(st.beta, st.object_control, st.object_treatment, st.epsilon, std::nullopt,
                   MatchStrategy::sorted_edges);
  st.object_matching.pairs.insert(st.object_matching.pairs.end(), rest.pairs.begin(),
                                  rest.pairs.end());
  st.object_matching.unmatched_control = rest.unmatched_control;
  st.object_matching.unmatched_treatment = rest.unmatched_treatment;

  FitResult out{st.beta, std::move(st)};
  return out;
}

}  // namespace

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::pools_exhausted: return "pools_exhausted";
    case StopReason::all_excluded: return "all_excluded";
    case StopReason::max_iters: return "max_iters";
  }
  return "unknown";
}

double resolve_lambda(const SemiDataset& d, const HyperParams& hp) {
  if (hp.lambda) return *hp.lambda;
  return default_lambda(paired_controls(d), paired_treatments(d));
}

EigenSolution solve_pairs(const std::vector<ObservationPair>& paired, double lambda) {
  const ScatterPair sp = build_scatter(paired, lambda);
  if (sp.sigma_b.isZero(0.0)) {
    throw NumericalError("insufficient pairs: between-pair scatter is zero (need >= 2 distinct "
                         "expert pairs)");
  }
  EigenSolution sol = top_generalized_eigvec(sp);
  if (!(sol.eigenvalue > 0.0)) {
    throw NumericalError("insufficient pairs: objective is identically zero");
  }
  return sol;
}

EigenSolution fit_initial_solution(const SemiDataset& d, const HyperParams& hp) {
  check_fit_inputs(d, hp);
  return solve_pairs(d.paired, resolve_lambda(d, hp));
}

WeightVector fit_initial(const SemiDataset& d, const HyperParams& hp) {
  return fit_initial_solution(d, hp).beta;
}

FitResult fit_canonical(const SemiDataset& d, const HyperParams& hp) {
  return run_fit(d, hp, FitMode::canonical);
}

FitResult fit_self_taught(const SemiDataset& d, const HyperParams& hp) {
  return run_fit(d, hp, FitMode::self_taught);
}

ExclusionOutcome exclusion_step(const std::vector<IndexPair>& candidates, const Matrix& pool_control,
                                const Matrix& pool_treatment, double lambda) {
  const std::size_t m = candidates.size();
  if (m < 2) throw ConfigError("exclusion requires tau1 >= 2");
  const Eigen::Index p = pool_control.cols();
  if (pool_treatment.cols() != p) throw DataError("exclusion_step: dimension mismatch");

  ExclusionOutcome out;
  out.accepted.assign(m, 0);
  out.loo_betas.reserve(m);

  for (std::size_t s = 0; s < m; ++s) {
    ScatterPair sp;
    sp.ell_dot = m - 1;
    sp.lambda = lambda;
    sp.sigma_b = Matrix::Zero(p, p);  // numerator: kept candidate pairs
    sp.sigma_w = lambda * Matrix::Identity(p, p);  // denominator: ridge + cross non-pairs
    for (std::size_t a = 0; a < m; ++a) {
      if (a == s) continue;
      const auto ca = static_cast<Eigen::Index>(candidates[a].control);
      for (std::size_t b = 0; b < m; ++b) {
        if (b == s) continue;
        const auto tb = static_cast<Eigen::Index>(candidates[b].treatment);
        const Vector diff = (pool_control.row(ca) - pool_treatment.row(tb)).transpose();
        if (a == b) {
          sp.sigma_b.noalias() += diff * diff.transpose();
        } else {
          sp.sigma_w.noalias() += diff * diff.transpose();
        }
      }
    }
    const WeightVector loo = top_generalized_eigvec(sp).beta;
    out.loo_betas.push_back(loo);

    const auto cs = static_cast<Eigen::Index>(candidates[s].control);
    const auto ts = static_cast<Eigen::Index>(candidates[s].treatment);
    const Vector zc = pool_control * loo.values();
    const Vector zt = pool_treatment * loo.values();
    const double own = (zc[cs] - zt[ts]) * (zc[cs] - zt[ts]);
    bool keep = true;
    for (Eigen::Index u = 0; u < zt.size() && keep; ++u) {
      const double v = (zc[cs] - zt[u]) * (zc[cs] - zt[u]);
      if (u != ts && v < own) keep = false;
    }
    for (Eigen::Index u = 0; u < zc.size() && keep; ++u) {
      const double v = (zc[u] - zt[ts]) * (zc[u] - zt[ts]);
      if (u != cs && v < own) keep = false;
    }
    out.accepted[s] = keep ? 1 : 0;
    out.n_accepted += keep ? 1 : 0;
  }
  return out;
}

double resolve_epsilon(const HyperParams& hp, const WeightVector& beta,
                       const std::vector<ObservationPair>& paired) {
  if (hp.epsilon) return *hp.epsilon;
  double eps = 0.0;
  for (const auto& pr : paired) eps = std::max(eps, score(beta, pr.control.x, pr.treatment.x));
  // A perfectly fitting training set would give 0, which is not a valid threshold.
  return eps > 0.0 ? eps : std::numeric_limits<double>::min();
}

void write_trajectory_csv(const FitState& s, std::ostream& out) {
  out << "iteration,delta_inf,added,excluded\n";
  for (const auto& r : s.trajectory) {
    out << r.iteration << ',' << csv::format_double(r.delta_inf) << ',' << r.added << ','
        << r.excluded << '\n';
  }
}

}  // namespace scotoma
