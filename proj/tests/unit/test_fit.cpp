#include "helpers.hpp"
#include "scotoma/fit.hpp"
#include "scotoma/simlab.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace scotoma;

namespace {

SemiDataset simulated(std::uint64_t seed, std::size_t unpaired = 30, std::size_t test_pairs = 15) {
  DgpConfig cfg;
  cfg.p = 5;
  cfg.n_train_pairs = 15;
  cfg.n_unpaired = unpaired;
  cfg.n_test_pairs = test_pairs;
  cfg.seed = seed;
  return generate(cfg).data;
}

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

bool same_trajectory(const FitState& a, const FitState& b) {
  if (a.trajectory.size() != b.trajectory.size()) return false;
  for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
    if (a.trajectory[k].delta_inf != b.trajectory[k].delta_inf ||
        a.trajectory[k].added != b.trajectory[k].added)
      return false;
  }
  return true;
}

// Expert pairs whose within differences lie on the second axis; beta(0) = e1.
SemiDataset axis_pairs() {
  SemiDataset d;
  d.covariate_names = {"x1", "x2"};
  d.paired.push_back({test::obs("pc0", Group::control, v2(0, 0)),
                      test::obs("pt0", Group::treatment, v2(0, 1)), "P0"});
  d.paired.push_back({test::obs("pc1", Group::control, v2(100, 0)),
                      test::obs("pt1", Group::treatment, v2(100, 1)), "P1"});
  return d;
}

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("a single expert pair is insufficient") {
  SemiDataset d = axis_pairs();
  d.paired.pop_back();
  try {
    fit_initial(d, {});
    FAIL("expected an error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("insufficient pairs") != std::string::npos);
  }
  CHECK_THROWS_AS(fit_canonical(d, {}), NumericalError);
  CHECK_THROWS_AS(fit_initial(SemiDataset{}, {}), DataError);
}

TEST_CASE("axis-aligned pairs give the first axis") {
  HyperParams hp;
  hp.lambda = 0.1;
  const auto beta = fit_initial(axis_pairs(), hp);
  CHECK(beta[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(beta[1]) < 1e-14);
}

TEST_CASE("joint rescaling of covariates and lambda leaves beta unchanged") {
  const SemiDataset d = simulated(1);
  SemiDataset scaled = d;
  for (auto& pr : scaled.paired) {
    pr.control.x *= 3.0;
    pr.treatment.x *= 3.0;
  }
  HyperParams hp;
  hp.lambda = 0.01;
  HyperParams hp9 = hp;
  hp9.lambda = 0.09;
  CHECK(subspace_dist(fit_initial(d, hp), fit_initial(scaled, hp9)) < 1e-10);
  // the default lambda follows the data scale on its own
  CHECK(subspace_dist(fit_initial(d, {}), fit_initial(scaled, {})) < 1e-10);
}

TEST_CASE("empty pools reproduce the initial fit") {
  const SemiDataset d = simulated(2, 0, 10);
  const auto r = fit_canonical(d, {});
  CHECK(r.beta.values() == fit_initial(d, {}).values());
  CHECK(r.state.iteration == 0);
  CHECK(r.state.stop_reason == StopReason::pools_exhausted);
  CHECK(r.state.paired.size() == d.paired.size());
}

TEST_CASE("infinite delta0 stops after one iteration") {
  const SemiDataset d = simulated(3);
  HyperParams hp;
  hp.delta0 = INFINITY;
  hp.tau1 = 4;
  const auto r = fit_canonical(d, hp);
  CHECK(r.state.iteration == 1);
  CHECK(r.state.converged);
  CHECK(r.state.paired.size() == d.paired.size() + 4);
  CHECK(r.state.pool_control.size() == d.unpaired_control.size() - 4);
}

TEST_CASE("canonical fit bookkeeping") {
  const SemiDataset d = simulated(4);
  HyperParams hp;
  hp.tau1 = 3;
  hp.delta0 = 0.0;
  const auto r = fit_canonical(d, hp);
  const auto& st = r.state;
  CHECK(st.stop_reason == StopReason::pools_exhausted);
  CHECK(st.iteration == 10);
  CHECK(st.pool_control.empty());
  CHECK(st.paired.size() == d.paired.size() + d.unpaired_control.size());
  std::size_t added = 0;
  for (const auto& rec : st.trajectory) {
    CHECK(rec.added <= 3);
    CHECK(rec.delta_inf >= 0.0);
    added += rec.added;
  }
  CHECK(added + d.paired.size() == st.paired.size());
  // every unpaired observation is used at most once
  std::set<std::string> ids;
  for (const auto& pr : st.paired) {
    CHECK(ids.insert(pr.control.id).second);
    CHECK(ids.insert(pr.treatment.id).second);
  }
  CHECK(r.beta.values().norm() == doctest::Approx(1.0));
  CHECK(st.lambda == resolve_lambda(d, hp));

  // the final object matching covers the object set without reuse
  std::set<std::string> oc, ot;
  for (const auto& m : st.object_matching.pairs) {
    CHECK(oc.insert(m.control_id).second);
    CHECK(ot.insert(m.treatment_id).second);
    CHECK(m.score <= st.epsilon);
  }
  CHECK(oc.size() + st.object_matching.unmatched_control.size() == d.object_control.size());

  std::ostringstream out;
  write_trajectory_csv(st, out);
  CHECK(out.str().rfind("iteration,delta_inf,added,excluded\n", 0) == 0);
}

TEST_CASE("automatic epsilon is the loosest within-pair score") {
  const SemiDataset d = simulated(5);
  const auto r = fit_canonical(d, {});
  double eps = 0.0;
  for (const auto& pr : r.state.paired) eps = std::max(eps, score(r.beta, pr.control.x, pr.treatment.x));
  CHECK(r.state.epsilon == eps);
  HyperParams hp;
  hp.epsilon = 0.25;
  CHECK(resolve_epsilon(hp, r.beta, r.state.paired) == 0.25);
}

TEST_CASE("max_iters caps the loop") {
  const SemiDataset d = simulated(6);
  HyperParams hp;
  hp.tau1 = 1;
  hp.delta0 = 0.0;
  hp.max_iters = 2;
  const auto r = fit_canonical(d, hp);
  CHECK(r.state.iteration == 2);
  CHECK(r.state.stop_reason == StopReason::max_iters);
  CHECK_FALSE(r.state.warnings.empty());
}

TEST_CASE("self-taught reductions") {
  const SemiDataset d = simulated(7);
  HyperParams hp;
  hp.tau1 = 3;
  const auto canonical = fit_canonical(d, hp);
  const auto st0 = fit_self_taught(d, hp);
  CHECK(st0.beta.values() == canonical.beta.values());
  CHECK(same_trajectory(st0.state, canonical.state));

  SemiDataset no_objects = d;
  no_objects.object_control.clear();
  no_objects.object_treatment.clear();
  hp.tau2 = 2;
  const auto a = fit_self_taught(no_objects, hp);
  const auto b = fit_canonical(no_objects, hp);
  CHECK(a.beta.values() == b.beta.values());
  CHECK(same_trajectory(a.state, b.state));
}

TEST_CASE("self-taught absorbs object pairs without crossing blocks") {
  const SemiDataset d = simulated(8);
  HyperParams hp;
  hp.tau1 = 3;
  hp.tau2 = 2;
  hp.delta0 = 0.0;
  hp.epsilon = INFINITY;
  const auto r = fit_self_taught(d, hp);
  const auto& st = r.state;
  CHECK(st.object_inclusions.size() > 0);
  std::size_t from_objects = 0;
  for (const auto& rec : st.trajectory) from_objects += rec.added_object;
  CHECK(from_objects == st.object_inclusions.size());
  std::set<std::string> object_ids;
  for (const auto& o : d.object_control) object_ids.insert(o.id);
  for (const auto& o : d.object_treatment) object_ids.insert(o.id);
  for (const auto& pr : st.paired) {
    CHECK(object_ids.count(pr.control.id) == object_ids.count(pr.treatment.id));
  }
  // absorbed pairs lead the final matching; the rest is matched completely
  REQUIRE(st.object_matching.pairs.size() == d.object_control.size());
  for (std::size_t k = 0; k < st.object_inclusions.size(); ++k) {
    CHECK(st.object_matching.pairs[k].control_id == st.object_inclusions[k].control_id);
  }
}

TEST_CASE("exclusion: orthogonal candidates are both accepted") {
  Matrix c(2, 2), t(2, 2);
  c << 0, 0, 10, 10;
  t << -1, 0, 10, 9;
  const std::vector<IndexPair> cand{{0, 0, 0.0}, {1, 1, 0.0}};
  const auto ex = exclusion_step(cand, c, t, 0.1);
  CHECK(ex.n_accepted == 2);
  // each leave-one-out weight points along the other candidate's difference
  CHECK(subspace_dist(ex.loo_betas[0].values(), Vector::Unit(2, 1)) < 1e-12);
  CHECK(subspace_dist(ex.loo_betas[1].values(), Vector::Unit(2, 0)) < 1e-12);
}

TEST_CASE("exclusion: a dominated candidate is excluded in one dimension") {
  Matrix c(2, 1), t(3, 1);
  c << 0.0, 5.0;
  t << 0.1, 3.0, 5.2;
  // under either unit weight, control 5.0 is closer to 5.2 than to 3.0
  const std::vector<IndexPair> cand{{0, 0, 0.01}, {1, 1, 4.0}};
  const auto ex = exclusion_step(cand, c, t, 0.1);
  CHECK(ex.accepted[0] == 1);
  CHECK(ex.accepted[1] == 0);
  CHECK(ex.n_accepted == 1);
}

TEST_CASE("exclusion: tau1 of one is rejected") {
  CHECK_THROWS_AS(exclusion_step({{0, 0, 0.0}}, Matrix::Zero(1, 2), Matrix::Zero(1, 2), 0.1),
                  ConfigError);
  SemiDataset d = axis_pairs();
  d.unpaired_control.push_back(test::obs("a", Group::control, v2(0, 0)));
  d.unpaired_treatment.push_back(test::obs("b", Group::treatment, v2(0, 0)));
  HyperParams hp;
  hp.exclusion_enabled = true;
  hp.tau1 = 1;
  try {
    fit_canonical(d, hp);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tau1 >= 2") != std::string::npos);
  }
}

TEST_CASE("exclusion: when every candidate is excluded the loop stops") {
  SemiDataset d = axis_pairs();
  d.unpaired_control = {test::obs("a0", Group::control, v2(0, 0)),
                        test::obs("a1", Group::control, v2(10, 0))};
  d.unpaired_treatment = {test::obs("b0", Group::treatment, v2(0, 5)),
                          test::obs("b1", Group::treatment, v2(10, -5)),
                          test::obs("b2", Group::treatment, v2(50, 0.1))};
  HyperParams hp;
  hp.lambda = 0.1;
  hp.tau1 = 2;
  hp.exclusion_enabled = true;
  const auto r = fit_canonical(d, hp);
  CHECK(r.state.stop_reason == StopReason::all_excluded);
  CHECK(r.state.paired.size() == 2);
  CHECK(r.state.iteration == 0);
  REQUIRE(r.state.trajectory.size() == 1);
  CHECK(r.state.trajectory[0].excluded == 2);
  CHECK(r.state.trajectory[0].added == 0);
  CHECK(r.beta.values() == fit_initial(d, hp).values());

  // without the filter both candidates are absorbed
  hp.exclusion_enabled = false;
  CHECK(fit_canonical(d, hp).state.paired.size() == 4);
}

}  // TEST_SUITE
