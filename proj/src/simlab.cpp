#include "scotoma/simlab.hpp"

#include "csv.hpp"
#include "scotoma/baselines.hpp"
#include "scotoma/eigsolve.hpp"
#include "scotoma/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>
#include <tuple>

namespace scotoma {

using nlohmann::json;

std::string to_string(ExpertKind k) {
  return k == ExpertKind::conjunctive ? "conjunctive" : "weighted_euclidean";
}

ExpertKind parse_expert_kind(const std::string& s) {
  if (s == "weighted_euclidean" || s == "linear") return ExpertKind::weighted_euclidean;
  if (s == "conjunctive") return ExpertKind::conjunctive;
  throw ConfigError("unknown expert '" + s + "'");
}

std::string to_string(MeanDesign m) {
  return m == MeanDesign::index ? "index" : "shared";
}

MeanDesign parse_mean_design(const std::string& s) {
  if (s == "index") return MeanDesign::index;
  if (s == "shared") return MeanDesign::shared;
  throw ConfigError("unknown mean design '" + s + "'");
}

void DgpConfig::validate() const {
  if (p < 2) throw ConfigError("dgp: p must be >= 2");
  if (n_train_pairs < 1) throw ConfigError("dgp: n_train_pairs must be >= 1");
  if (n_test_pairs < 1) throw ConfigError("dgp: n_test_pairs must be >= 1");
  if (!(sigma2 > 0.0)) throw ConfigError("dgp: sigma2 must be > 0");
  if (!(w_principal > 0.0) || !(w_noise >= 0.0)) throw ConfigError("dgp: weights must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("dgp: rho must lie in [0, 1)");
  if (!(c > 0.0)) throw ConfigError("dgp: c must be > 0");
  if (!std::isfinite(b)) throw ConfigError("dgp: b must be finite");
  if (principal_idx) {
    const auto& pi = *principal_idx;
    if (pi[0] == pi[1] || pi[0] >= p || pi[1] >= p) {
      throw ConfigError("dgp: principal indices must be distinct and < p");
    }
  }
  for (const auto& it : interactions) {
    if (it.principal >= p || it.noise >= p || it.principal == it.noise) {
      throw ConfigError("dgp: interaction indices out of range");
    }
    if (!(it.weight > 0.0)) throw ConfigError("dgp: interaction weight must be > 0");
  }
  if (interactions.empty() && n_interactions > p - 2) {
    throw ConfigError("dgp: more interactions than noise coordinates");
  }
  if (!(interaction_weight >= 0.0)) throw ConfigError("dgp: interaction weight must be >= 0");
}

json to_json(const DgpConfig& cfg) {
  json j{{"p", cfg.p},
         {"n_train_pairs", cfg.n_train_pairs},
         {"n_unpaired", cfg.n_unpaired},
         {"n_test_pairs", cfg.n_test_pairs},
         {"b", cfg.b},
         {"sigma2", cfg.sigma2},
         {"mean", to_string(cfg.mean)},
         {"expert", to_string(cfg.expert)},
         {"w_principal", cfg.w_principal},
         {"w_noise", cfg.w_noise},
         {"c", cfg.c},
         {"rho", cfg.rho},
         {"n_interactions", cfg.n_interactions},
         {"interaction_weight", cfg.interaction_weight},
         {"seed", cfg.seed}};
  if (cfg.principal_idx) {
    j["principal_idx"] = {(*cfg.principal_idx)[0], (*cfg.principal_idx)[1]};
  } else {
    j["principal_idx"] = nullptr;
  }
  json inter = json::array();
  for (const auto& it : cfg.interactions) {
    inter.push_back({{"principal", it.principal}, {"noise", it.noise}, {"weight", it.weight}});
  }
  j["interactions"] = inter;
  return j;
}

DgpConfig dgp_from_json(const json& j, DgpConfig cfg) {
  if (!j.is_object()) throw ConfigError("dgp config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "p") cfg.p = v.get<std::size_t>();
      else if (key == "n_train_pairs") cfg.n_train_pairs = v.get<std::size_t>();
      else if (key == "n_unpaired") cfg.n_unpaired = v.get<std::size_t>();
      else if (key == "n_test_pairs") cfg.n_test_pairs = v.get<std::size_t>();
      else if (key == "b") cfg.b = v.get<double>();
      else if (key == "sigma2") cfg.sigma2 = v.get<double>();
      else if (key == "mean") cfg.mean = parse_mean_design(v.get<std::string>());
      else if (key == "expert") cfg.expert = parse_expert_kind(v.get<std::string>());
      else if (key == "w_principal") cfg.w_principal = v.get<double>();
      else if (key == "w_noise") cfg.w_noise = v.get<double>();
      else if (key == "c") cfg.c = v.get<double>();
      else if (key == "rho") cfg.rho = v.is_null() ? 0.0 : v.get<double>();
      else if (key == "n_interactions") cfg.n_interactions = v.get<std::size_t>();
      else if (key == "interaction_weight") cfg.interaction_weight = v.get<double>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "principal_idx") {
        if (v.is_null()) {
          cfg.principal_idx.reset();
        } else {
          const auto idx = v.get<std::vector<std::size_t>>();
          if (idx.size() != 2) throw ConfigError("principal_idx needs exactly 2 entries");
          cfg.principal_idx = std::array<std::size_t, 2>{idx[0], idx[1]};
        }
      } else if (key == "interactions") {
        cfg.interactions.clear();
        for (const auto& e : v) {
          Interaction it;
          it.principal = e.at("principal").get<std::size_t>();
          it.noise = e.at("noise").get<std::size_t>();
          it.weight = e.value("weight", 0.2);
          cfg.interactions.push_back(it);
        }
      } else {
        throw ConfigError("unknown dgp key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dgp config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Matrix dgp_covariance(const DgpConfig& cfg) {
  const auto p = static_cast<Eigen::Index>(cfg.p);
  Matrix cov = Matrix::Constant(p, p, cfg.rho);
  cov.diagonal().setOnes();
  return cfg.sigma2 * cov;
}

double expert_distance(const Vector& xc, const Vector& xt, const Vector& w,
                       const std::vector<Interaction>& interactions, ExpertKind kind,
                       const std::array<std::size_t, 2>& principal, double c) {
  if (kind == ExpertKind::conjunctive) {
    for (auto k : principal) {
      const auto i = static_cast<Eigen::Index>(k);
      if (!(std::abs(xc[i] - xt[i]) < c)) return INFINITY;
    }
  }
  double lin = w.dot(xc - xt);
  for (const auto& it : interactions) {
    const auto a = static_cast<Eigen::Index>(it.principal);
    const auto b = static_cast<Eigen::Index>(it.noise);
    lin += it.weight * (xc[a] * xc[b] - xt[a] * xt[b]);
  }
  return lin * lin;
}

namespace {

std::string make_id(const char* prefix, std::size_t k) { return prefix + std::to_string(k); }

// n controls and n treatments; `lower` is the Cholesky factor of the covariance.
std::pair<Matrix, Matrix> draw_groups(const DgpConfig& cfg, Eigen::Index n, const Matrix& lower,
                                      Rng& rng) {
  const Eigen::Index p = lower.rows();
  std::normal_distribution<double> normal;
  Vector centre = Vector::LinSpaced(n, 1.0, static_cast<double>(n));
  if (cfg.mean == MeanDesign::shared) {
    std::uniform_real_distribution<double> offset(0.0, 5.0);
    centre.setConstant(offset(rng));
  }
  Matrix zc(n, p), zt(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < p; ++k) zc(i, k) = normal(rng);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < p; ++k) zt(i, k) = normal(rng);
  }
  Matrix xc = zc * lower.transpose();
  Matrix xt = zt * lower.transpose();
  xc.colwise() += centre;
  xt.colwise() += centre;
  xt.col(0).array() += cfg.b;
  return {std::move(xc), std::move(xt)};
}

Observation make_obs(std::string id, Group g, const Matrix& rows, std::size_t r) {
  return Observation{std::move(id), g, rows.row(static_cast<Eigen::Index>(r)).transpose()};
}

}  // namespace

GeneratedData generate(const DgpConfig& cfg) {
  cfg.validate();
  const auto p = static_cast<Eigen::Index>(cfg.p);
  Rng rng = make_stream(cfg.seed, 0);

  GeneratedData g;
  if (cfg.principal_idx) {
    g.principal = *cfg.principal_idx;
  } else {
    std::vector<std::size_t> all(cfg.p);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    g.principal = {all[0], all[1]};
  }
  g.weights = Vector::Constant(p, cfg.w_noise);
  for (auto k : g.principal) g.weights[static_cast<Eigen::Index>(k)] = cfg.w_principal;
  for (std::size_t k = 0; k < cfg.p; ++k) {
    if (k != g.principal[0] && k != g.principal[1]) g.noise_idx.push_back(k);
  }
  if (!cfg.interactions.empty()) {
    g.interactions = cfg.interactions;
  } else if (cfg.n_interactions > 0) {
    std::vector<std::size_t> noise = g.noise_idx;
    std::shuffle(noise.begin(), noise.end(), rng);
    std::uniform_int_distribution<int> side(0, 1);
    for (std::size_t k = 0; k < cfg.n_interactions; ++k) {
      g.interactions.push_back({g.principal[static_cast<std::size_t>(side(rng))], noise[k],
                                cfg.interaction_weight});
    }
  }

  const Eigen::LLT<Matrix> chol(dgp_covariance(cfg));
  const Matrix lower = chol.matrixL();
  const std::size_t n_total = cfg.n_train_pairs + cfg.n_unpaired + cfg.n_test_pairs;
  const auto n = static_cast<Eigen::Index>(n_total);

  // Batches of n controls and n treatments are drawn until the oracle has
  // produced n_total pairs; a batch with no feasible pair counts as a failed attempt.
  Matrix xc(0, p), xt(0, p);
  std::vector<IndexPair> pairs;
  std::size_t failed = 0;
  g.attempts = 0;
  while (pairs.size() < n_total) {
    ++g.attempts;
    Matrix bc, bt;
    std::tie(bc, bt) = draw_groups(cfg, n, lower, rng);

    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector ci = bc.row(i).transpose();
      for (Eigen::Index j = 0; j < n; ++j) {
        d(i, j) = expert_distance(ci, bt.row(j).transpose(), g.weights, g.interactions,
                                  cfg.expert, g.principal, cfg.c);
      }
    }
    const auto found = greedy_match_scores(d).pairs;
    if (found.empty()) {
      if (++failed == 100) throw DataError("expert oracle found no feasible pair in 100 attempts");
      continue;
    }
    const auto offset = static_cast<std::size_t>(xc.rows());
    xc.conservativeResize(xc.rows() + n, Eigen::NoChange);
    xt.conservativeResize(xt.rows() + n, Eigen::NoChange);
    xc.bottomRows(n) = bc;
    xt.bottomRows(n) = bt;
    for (const auto& pr : found) {
      if (pairs.size() == n_total) break;
      pairs.push_back({pr.control + offset, pr.treatment + offset, pr.score});
    }
  }

  std::shuffle(pairs.begin(), pairs.end(), rng);
  SemiDataset& data = g.data;
  for (std::size_t k = 0; k < cfg.p; ++k) data.covariate_names.push_back(make_id("x", k + 1));

  std::size_t at = 0;
  for (std::size_t k = 0; k < cfg.n_train_pairs; ++k, ++at) {
    data.paired.push_back({make_obs(make_id("pc", k), Group::control, xc, pairs[at].control),
                           make_obs(make_id("pt", k), Group::treatment, xt, pairs[at].treatment),
                           make_id("p", k)});
  }
  auto fill_block = [&](std::size_t count, const char* cpre, const char* tpre,
                        std::vector<Observation>& cs, std::vector<Observation>& ts,
                        Truth* truth) {
    std::vector<std::size_t> perm(count);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t base = at;
    for (std::size_t k = 0; k < count; ++k) {
      cs.push_back(make_obs(make_id(cpre, k), Group::control, xc, pairs[base + k].control));
    }
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t src = perm[k];
      ts.push_back(make_obs(make_id(tpre, src), Group::treatment, xt, pairs[base + src].treatment));
    }
    if (truth) {
      for (std::size_t k = 0; k < count; ++k) truth->emplace_back(make_id(cpre, k), make_id(tpre, k));
    }
    at += count;
  };
  fill_block(cfg.n_unpaired, "uc", "ut", data.unpaired_control, data.unpaired_treatment, nullptr);
  fill_block(cfg.n_test_pairs, "oc", "ot", data.object_control, data.object_treatment, &g.truth);

  if (cfg.expert == ExpertKind::weighted_euclidean && g.interactions.empty()) {
    g.true_beta = WeightVector(g.weights);
  }
  return g;
}

// --- experiments ------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::scotoma: return "scotoma";
    case Method::scotoma_initial: return "scotoma_initial";
    case Method::scotoma_self_taught: return "scotoma_self_taught";
    case Method::euclidean: return "euclidean";
    case Method::mahalanobis: return "mahalanobis";
    case Method::propensity: return "propensity";
    case Method::rca: return "rca";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::scotoma, Method::scotoma_initial, Method::scotoma_self_taught,
                   Method::euclidean, Method::mahalanobis, Method::propensity, Method::rca}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown method '" + s + "'");
}

std::vector<ExperimentCell> expand_grid(const DgpConfig& base, const json& grid) {
  std::vector<ExperimentCell> cells{{"", base}};
  if (grid.is_null()) {
    cells.front().label = "base";
    return cells;
  }
  if (!grid.is_object()) throw ConfigError("grid must be an object of value lists");
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty()) {
      throw ConfigError("grid entry '" + key + "' must be a non-empty list");
    }
    std::vector<ExperimentCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        ExperimentCell c = cell;
        c.cfg = dgp_from_json(json{{key, v}}, cell.cfg);
        c.label += (c.label.empty() ? "" : ";") + key + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

const MethodSummary& ExperimentResult::find(std::size_t cell, Method m) const {
  for (const auto& s : summary) {
    if (s.cell == cell && s.method == m) return s;
  }
  throw ConfigError("no summary for method " + to_string(m));
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t cell, std::size_t rep) {
  return derive_seed(seed, cell + 1, rep);
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

double method_accuracy(Method m, const GeneratedData& g, const HyperParams& hp) {
  const SemiDataset& d = g.data;
  auto match_with = [&](const WeightVector& beta) {
    return matching_accuracy(
        greedy_match(beta, d.object_control, d.object_treatment, std::nullopt, std::nullopt,
                     MatchStrategy::sorted_edges),
        g.truth);
  };
  auto match_scorer = [&](const PairScorer& s) {
    return matching_accuracy(greedy_match(s, d.object_control, d.object_treatment, std::nullopt,
                                          std::nullopt, MatchStrategy::sorted_edges),
                             g.truth);
  };
  switch (m) {
    case Method::scotoma: return match_with(fit_canonical(d, hp).beta);
    case Method::scotoma_initial: return match_with(fit_initial(d, hp));
    case Method::scotoma_self_taught: {
      HyperParams h = hp;
      if (h.tau2 == 0) h.tau2 = h.resolved_tau1(d.paired.size());
      h.epsilon = INFINITY;
      return matching_accuracy(fit_self_taught(d, h).state.object_matching, g.truth);
    }
    case Method::euclidean: return match_scorer(euclidean_scorer());
    case Method::mahalanobis: return match_scorer(mahalanobis_scorer(d).scorer());
    case Method::propensity: return match_scorer(propensity_scorer(d).scorer());
    case Method::rca: return match_scorer(rca_scorer(d.paired).scorer());
  }
  throw ConfigError("unknown method");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.methods.empty()) throw ConfigError("run_experiment: need at least one method");
  if (spec.replicates < 1) throw ConfigError("run_experiment: replicates must be >= 1");
  if (spec.cells.empty()) throw ConfigError("run_experiment: empty grid");
  spec.hp.validate();
  for (const auto& c : spec.cells) c.cfg.validate();

  const std::size_t nm = spec.methods.size();
  const std::size_t reps = spec.replicates;
  ExperimentResult out;
  out.spec = spec;
  out.records.resize(spec.cells.size() * reps * nm);

  parallel_for(spec.cells.size() * reps, spec.threads, [&](std::size_t task) {
    const std::size_t cell = task / reps;
    const std::size_t rep = task % reps;
    ReplicateRecord* row = &out.records[task * nm];
    for (std::size_t k = 0; k < nm; ++k) {
      row[k].cell = cell;
      row[k].replicate = rep;
      row[k].method = spec.methods[k];
    }
    DgpConfig cfg = spec.cells[cell].cfg;
    cfg.seed = replicate_seed(spec.seed, cell, rep);
    std::optional<GeneratedData> g;
    try {
      g = generate(cfg);
    } catch (const std::exception& e) {
      for (std::size_t k = 0; k < nm; ++k) {
        row[k].failed = true;
        row[k].error = e.what();
      }
      return;
    }
    for (std::size_t k = 0; k < nm; ++k) {
      try {
        row[k].accuracy = method_accuracy(spec.methods[k], *g, spec.hp);
      } catch (const std::exception& e) {
        row[k].failed = true;
        row[k].error = e.what();
      }
    }
  });

  for (std::size_t cell = 0; cell < spec.cells.size(); ++cell) {
    for (std::size_t k = 0; k < nm; ++k) {
      MethodSummary s;
      s.cell = cell;
      s.method = spec.methods[k];
      std::vector<double> acc;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto& r = out.records[(cell * reps + rep) * nm + k];
        if (r.failed) ++s.n_failed;
        else acc.push_back(r.accuracy);
      }
      s.n_ok = acc.size();
      s.cell_failed = static_cast<double>(s.n_failed) > 0.1 * static_cast<double>(reps);
      if (!acc.empty()) {
        s.q25 = quantile(acc, 0.25);
        s.median = quantile(acc, 0.5);
        s.q75 = quantile(acc, 0.75);
        s.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
      } else {
        s.q25 = s.median = s.q75 = s.mean = NAN;
      }
      out.summary.push_back(s);
    }
  }
  return out;
}

void write_experiment_csv(const ExperimentResult& r, std::ostream& out) {
  out << "cell,label,replicate,method,accuracy,failed,error\n";
  for (const auto& rec : r.records) {
    out << rec.cell << ',' << csv::quote(r.spec.cells[rec.cell].label) << ',' << rec.replicate
        << ',' << to_string(rec.method) << ','
        << (rec.failed ? std::string() : csv::format_double(rec.accuracy)) << ','
        << (rec.failed ? 1 : 0) << ',' << csv::quote(rec.error) << '\n';
  }
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json hp_to_json(const HyperParams& hp) {
  json j{{"tau2", hp.tau2}, {"delta0", hp.delta0}, {"max_iters", hp.max_iters},
         {"exclusion", hp.exclusion_enabled}};
  j["lambda"] = hp.lambda ? json(*hp.lambda) : json("auto");
  j["tau1"] = hp.tau1 ? json(*hp.tau1) : json("auto");
  j["epsilon"] = hp.epsilon ? number_or_null(*hp.epsilon) : json("auto");
  return j;
}

}  // namespace

json experiment_summary_json(const ExperimentResult& r) {
  json cells = json::array();
  for (std::size_t c = 0; c < r.spec.cells.size(); ++c) {
    json methods = json::object();
    for (const auto& s : r.summary) {
      if (s.cell != c) continue;
      methods[to_string(s.method)] = {{"n_ok", s.n_ok},
                                      {"n_failed", s.n_failed},
                                      {"failed", s.cell_failed},
                                      {"q25", number_or_null(s.q25)},
                                      {"median", number_or_null(s.median)},
                                      {"q75", number_or_null(s.q75)},
                                      {"mean", number_or_null(s.mean)}};
    }
    cells.push_back({{"label", r.spec.cells[c].label},
                     {"config", to_json(r.spec.cells[c].cfg)},
                     {"methods", methods}});
  }
  json method_names = json::array();
  for (auto m : r.spec.methods) method_names.push_back(to_string(m));
  return {{"replicates", r.spec.replicates},
          {"seed", r.spec.seed},
          {"methods", method_names},
          {"hyperparameters", hp_to_json(r.spec.hp)},
          {"cells", cells}};
}

// --- protocols --------------------------------------------------------------

double interaction_weight_diff(const WeightVector& beta, const GeneratedData& g) {
  std::vector<char> in_inter(static_cast<std::size_t>(beta.size()), 0);
  for (const auto& it : g.interactions) in_inter[it.noise] = 1;
  double sum_in = 0.0, sum_out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (auto k : g.noise_idx) {
    const double v = std::abs(beta[static_cast<Eigen::Index>(k)]);
    if (in_inter[k]) {
      sum_in += v;
      ++n_in;
    } else {
      sum_out += v;
      ++n_out;
    }
  }
  if (n_out == 0) throw ConfigError("interaction_weight_diff: no noise variables outside interactions");
  if (n_in == 0) throw ConfigError("interaction_weight_diff: no interactions");
  return sum_in / static_cast<double>(n_in) - sum_out / static_cast<double>(n_out);
}

std::vector<InteractionCell> interaction_table(const DgpConfig& base,
                                               const std::vector<std::size_t>& pairs,
                                               const std::vector<std::size_t>& interactions,
                                               std::size_t replicates, std::uint64_t seed,
                                               const HyperParams& hp, std::size_t threads) {
  if (replicates < 1) throw ConfigError("interaction_table: replicates must be >= 1");
  std::vector<InteractionCell> out;
  std::size_t cell = 0;
  for (auto np : pairs) {
    for (auto ni : interactions) {
      DgpConfig cfg = base;
      cfg.n_train_pairs = np;
      cfg.n_interactions = ni;
      cfg.interactions.clear();
      // A zero-weight product term marks one noise coordinate as a placebo.
      if (ni == 0) {
        cfg.n_interactions = 1;
        cfg.interaction_weight = 0.0;
      }
      cfg.validate();
      std::vector<double> diffs(replicates);
      parallel_for(replicates, threads, [&](std::size_t rep) {
        DgpConfig c = cfg;
        c.seed = replicate_seed(seed, cell, rep);
        const GeneratedData g = generate(c);
        diffs[rep] = interaction_weight_diff(fit_initial(g.data, hp), g);
      });
      InteractionCell ic;
      ic.n_pairs = np;
      ic.n_interactions = ni;
      ic.replicates = replicates;
      const double n = static_cast<double>(replicates);
      ic.mean_diff = std::accumulate(diffs.begin(), diffs.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : diffs) ss += (v - ic.mean_diff) * (v - ic.mean_diff);
      ic.se_diff = replicates > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
      out.push_back(ic);
      ++cell;
    }
  }
  return out;
}

std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y,
                            std::size_t degree) {
  if (x.size() != y.size() || x.size() <= degree) {
    throw DataError("polyfit: need more points than the degree");
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto m = static_cast<Eigen::Index>(degree + 1);
  Matrix v(n, m);
  Vector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double pw = 1.0;
    for (Eigen::Index k = m - 1; k >= 0; --k) {
      v(i, k) = pw;
      pw *= x[static_cast<std::size_t>(i)];
    }
    rhs[i] = y[static_cast<std::size_t>(i)];
  }
  const Vector coef = v.colPivHouseholderQr().solve(rhs);
  return {coef.data(), coef.data() + coef.size()};
}

SelfTaughtReport self_taught_gain_protocol(const DgpConfig& cfg, std::size_t replicates,
                                           std::size_t iterations, std::uint64_t seed,
                                           HyperParams hp, std::size_t threads) {
  if (replicates < 3) throw ConfigError("self_taught protocol: replicates must be >= 3");
  if (iterations < 1) throw ConfigError("self_taught protocol: iterations must be >= 1");
  cfg.validate();
  hp.max_iters = iterations;
  hp.epsilon = INFINITY;
  if (hp.tau2 == 0) hp.tau2 = hp.resolved_tau1(cfg.n_train_pairs);
  hp.validate();

  SelfTaughtReport rep;
  rep.points.resize(replicates);
  parallel_for(replicates, threads, [&](std::size_t r) {
    DgpConfig c = cfg;
    c.seed = replicate_seed(seed, 0, r);
    const GeneratedData g = generate(c);
    const auto& d = g.data;
    const WeightVector b0 = fit_initial(d, hp);
    SelfTaughtPoint pt;
    pt.initial_accuracy = matching_accuracy(
        greedy_match(b0, d.object_control, d.object_treatment, std::nullopt, std::nullopt,
                     MatchStrategy::sorted_edges),
        g.truth);
    const FitResult fr = fit_self_taught(d, hp);
    pt.final_accuracy = matching_accuracy(fr.state.object_matching, g.truth);
    pt.gain = pt.final_accuracy - pt.initial_accuracy;
    pt.iterations = fr.state.iteration;
    rep.points[r] = pt;
  });

  std::vector<double> x, y;
  for (const auto& pt : rep.points) {
    x.push_back(pt.initial_accuracy);
    y.push_back(pt.gain);
  }
  rep.mean_gain = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  const auto q = polyfit(x, y, 2);
  rep.quad = {q[0], q[1], q[2]};

  const double a = q[0], b = q[1], c0 = q[2];
  auto fitted = [&](double t) { return (a * t + b) * t + c0; };
  if (a < 0.0) {
    const double disc = b * b - 4.0 * a * c0;
    if (disc > 0.0) {
      const double r1 = (-b + std::sqrt(disc)) / (2.0 * a);
      const double r2 = (-b - std::sqrt(disc)) / (2.0 * a);
      const double lo = std::max(0.0, std::min(r1, r2));
      const double hi = std::min(1.0, std::max(r1, r2));
      if (lo < hi) rep.mediocre_range = std::array<double, 2>{lo, hi};
    }
  } else {
    // Convex or linear fit: report the positive part of [0, 1] on a grid.
    double lo = NAN, hi = NAN;
    for (int k = 0; k <= 1000; ++k) {
      const double t = k / 1000.0;
      if (fitted(t) > 0.0) {
        if (std::isnan(lo)) lo = t;
        hi = t;
      }
    }
    if (!std::isnan(lo) && lo < hi) rep.mediocre_range = std::array<double, 2>{lo, hi};
  }
  return rep;
}

RateReport rate_protocol(const DgpConfig& base, const std::vector<std::size_t>& n_pairs,
                         std::size_t replicates, std::size_t master_factor, std::uint64_t seed,
                         std::optional<double> lambda, std::size_t threads) {
  if (n_pairs.size() < 2) throw ConfigError("rate protocol: need at least two sample sizes");
  if (replicates < 1 || master_factor < 2) {
    throw ConfigError("rate protocol: replicates >= 1 and master_factor >= 2 required");
  }
  if (base.expert != ExpertKind::weighted_euclidean || base.n_interactions > 0 ||
      !base.interactions.empty()) {
    throw ConfigError("rate protocol needs the linear expert without interactions");
  }
  base.validate();
  const auto p = static_cast<Eigen::Index>(base.p);
  const Eigen::LLT<Matrix> chol(dgp_covariance(base));
  const Matrix lower = chol.matrixL();
  const auto session =
      static_cast<Eigen::Index>(base.n_train_pairs + base.n_unpaired + base.n_test_pairs);

  RateReport out;
  for (std::size_t cell = 0; cell < n_pairs.size(); ++cell) {
    const std::size_t n = n_pairs[cell];
    if (n < 2) throw ConfigError("rate protocol: sample sizes must be >= 2");
    std::vector<double> dist(replicates);
    parallel_for(replicates, threads, [&](std::size_t rep) {
      Rng rng = make_stream(seed, cell + 1, rep);

      std::array<std::size_t, 2> principal;
      if (base.principal_idx) {
        principal = *base.principal_idx;
      } else {
        std::vector<std::size_t> coords(base.p);
        std::iota(coords.begin(), coords.end(), 0);
        std::shuffle(coords.begin(), coords.end(), rng);
        principal = {coords[0], coords[1]};
      }
      Vector w = Vector::Constant(p, base.w_noise);
      for (auto k : principal) w[static_cast<Eigen::Index>(k)] = base.w_principal;

      // Expert sessions of fixed size; the estimation sample and the master
      // are filled with whole sessions and truncated.
      auto draw_pairs = [&](std::size_t want, Matrix& oc, Matrix& ot) {
        const auto rows = static_cast<Eigen::Index>(want);
        oc.resize(rows, p);
        ot.resize(rows, p);
        Eigen::Index filled = 0;
        while (filled < rows) {
          const auto [xc, xt] = draw_groups(base, session, lower, rng);
          const Vector zc = xc * w, zt = xt * w;
          const Matrix d = (zc.replicate(1, session) - zt.transpose().replicate(session, 1))
                               .array()
                               .square();
          auto pairs = greedy_match_scores(d, {}, {}, MatchStrategy::sorted_edges).pairs;
          std::shuffle(pairs.begin(), pairs.end(), rng);
          for (const auto& pr : pairs) {
            if (filled == rows) break;
            oc.row(filled) = xc.row(static_cast<Eigen::Index>(pr.control));
            ot.row(filled) = xt.row(static_cast<Eigen::Index>(pr.treatment));
            ++filled;
          }
        }
      };
      Matrix sc, st, mc, mt;
      draw_pairs(n, sc, st);
      draw_pairs(master_factor * n, mc, mt);
      const double lam_master = lambda.value_or(default_lambda(mc, mt));
      const double lam_small = lambda.value_or(default_lambda(sc, st));
      const WeightVector star = top_generalized_eigvec(build_scatter(mc, mt, lam_master)).beta;
      const WeightVector hat = top_generalized_eigvec(build_scatter(sc, st, lam_small)).beta;
      dist[rep] = subspace_dist(star, hat);
    });
    RatePoint pt;
    pt.n_pairs = n;
    const double r = static_cast<double>(replicates);
    pt.mean_dist = std::accumulate(dist.begin(), dist.end(), 0.0) / r;
    double ss = 0.0;
    for (double v : dist) ss += (v - pt.mean_dist) * (v - pt.mean_dist);
    pt.se_dist = replicates > 1 ? std::sqrt(ss / (r - 1.0) / r) : 0.0;
    out.points.push_back(pt);
  }
  std::vector<double> lx, ly;
  for (const auto& pt : out.points) {
    lx.push_back(std::log(static_cast<double>(pt.n_pairs)));
    ly.push_back(std::log(pt.mean_dist));
  }
  out.slope = polyfit(lx, ly, 1)[0];
  return out;
}

}  // namespace scotoma
