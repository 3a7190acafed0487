#include "cli.hpp"

#include "scotoma/dataset.hpp"
#include "scotoma/fit.hpp"
#include "scotoma/matcher.hpp"
#include "scotoma/simlab.hpp"
#include "csv.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace scotoma::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open config file " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + p.string() + ": " + e.what());
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Collects output files and records their digests for the manifest.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      throw ConfigError("cannot create output directory " + dir_.string());
    }
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (dir_ / name).string());
    out << content;
    if (!out) throw ConfigError("write failed for " + (dir_ / name).string());
    manifest_.push_back({{"file", name}, {"fnv1a64", fnv1a64_hex(content)},
                         {"bytes", content.size()}});
  }

  template <class Fn>
  void write_with(const std::string& name, Fn&& fn) {
    std::ostringstream ss;
    fn(ss);
    write(name, ss.str());
  }

  // diagnostics.json is written last and lists every other file.
  void finish(json diagnostics) {
    diagnostics["manifest"] = manifest_;
    const std::string text = diagnostics.dump(2) + "\n";
    std::ofstream out(dir_ / "diagnostics.json", std::ios::binary);
    if (!out) throw ConfigError("cannot write diagnostics.json");
    out << text;
  }

 private:
  fs::path dir_;
  json manifest_ = json::array();
};

json double_or_string(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

std::optional<double> parse_epsilon(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "auto") return std::nullopt;
    if (s == "inf" || s == "infinity") return INFINITY;
    throw ConfigError("epsilon must be a number, \"auto\" or \"inf\"");
  }
  if (!v.is_number()) throw ConfigError("epsilon must be a number, \"auto\" or \"inf\"");
  return v.get<double>();
}

std::optional<double> parse_epsilon_flag(const std::string& s) {
  if (s == "auto") return std::nullopt;
  if (s == "inf" || s == "infinity") return INFINITY;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ConfigError("--epsilon must be a number, auto or inf");
  return v;
}

std::string to_string(FitMode m) {
  switch (m) {
    case FitMode::initial: return "initial";
    case FitMode::canonical: return "canonical";
    case FitMode::self_taught: return "self_taught";
  }
  return "unknown";
}

json hp_json(const HyperParams& hp) {
  json j{{"tau2", hp.tau2},
         {"delta0", double_or_string(hp.delta0)},
         {"max_iters", hp.max_iters},
         {"exclusion", hp.exclusion_enabled},
         {"seed", hp.seed}};
  j["lambda"] = hp.lambda ? json(*hp.lambda) : json("auto");
  j["tau1"] = hp.tau1 ? json(*hp.tau1) : json("auto");
  j["epsilon"] = hp.epsilon ? double_or_string(*hp.epsilon) : json("auto");
  return j;
}

template <class T>
std::vector<T> list_or(const json& cfg, const char* key, std::vector<T> fallback) {
  if (!cfg.contains(key)) return fallback;
  return cfg.at(key).get<std::vector<T>>();
}

// --- fit ---------------------------------------------------------------------

int cmd_fit(const std::string& config_path, const std::string& data_path,
            const std::string& out_path, std::optional<std::uint64_t> seed, std::ostream& out) {
  FitConfig fc = fit_config_from_json(read_json_file(config_path));
  if (seed) fc.hp.seed = *seed;
  const SemiDataset d = load_dataset(data_path, CsvSchema{fc.ignore_columns});

  OutputDir dir(out_path);
  json diag{{"command", "fit"}, {"mode", to_string(fc.mode)}, {"hyperparameters", hp_json(fc.hp)}};
  diag["inputs"] = {{"config", file_digest(config_path)}, {"data", file_digest(data_path)}};
  diag["dims"] = {{"p", d.p()},
                  {"paired", d.paired.size()},
                  {"unpaired_control", d.unpaired_control.size()},
                  {"unpaired_treatment", d.unpaired_treatment.size()},
                  {"object_control", d.object_control.size()},
                  {"object_treatment", d.object_treatment.size()}};

  WeightVector beta;
  FitState state;
  bool have_state = false;
  if (fc.mode == FitMode::initial) {
    const EigenSolution sol = fit_initial_solution(d, fc.hp);
    beta = sol.beta;
    diag["degenerate"] = sol.degenerate;
    diag["iterations"] = 0;
    diag["stop_reason"] = "initial";
    diag["converged"] = true;
    diag["lambda"] = resolve_lambda(d, fc.hp);
    diag["eigenvalue"] = sol.eigenvalue;
    diag["residual"] = sol.residual;
    diag["warnings"] = json::array();
  } else {
    FitResult r = fc.mode == FitMode::canonical ? fit_canonical(d, fc.hp) : fit_self_taught(d, fc.hp);
    beta = r.beta;
    state = std::move(r.state);
    have_state = true;
    diag["degenerate"] = state.degenerate;
    diag["iterations"] = state.iteration;
    diag["stop_reason"] = scotoma::to_string(state.stop_reason);
    diag["converged"] = state.converged;
    diag["lambda"] = state.lambda;
    diag["tau1"] = state.tau1;
    diag["epsilon"] = double_or_string(state.epsilon);
    diag["training_pairs"] = state.paired.size();
    diag["object_inclusions"] = state.object_inclusions.size();
    diag["warnings"] = state.warnings;
  }

  dir.write_with("beta.csv", [&](std::ostream& o) { write_beta_csv(beta, d.covariate_names, o); });
  dir.write_with("trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(state, o); });
  if (have_state && !(d.object_control.empty() && d.object_treatment.empty())) {
    dir.write_with("matching.csv",
                   [&](std::ostream& o) { write_matching_csv(state.object_matching, o); });
    dir.write_with("unmatched.csv",
                   [&](std::ostream& o) { write_unmatched_csv(state.object_matching, o); });
  }
  dir.finish(diag);
  out << "fit (" << to_string(fc.mode) << "): wrote " << out_path << "\n";
  return ok;
}

// --- match -------------------------------------------------------------------

int cmd_match(const std::string& beta_path, const std::string& data_path,
              const std::string& eps_flag, const std::string& out_path,
              const std::vector<std::string>& ignore, std::ostream& out) {
  const std::optional<double> eps = parse_epsilon_flag(eps_flag);
  std::ifstream bin(beta_path);
  if (!bin) throw DataError("cannot open beta file " + beta_path);
  const auto [names, beta] = read_beta_csv(bin);
  const SemiDataset d = load_dataset(data_path, CsvSchema{ignore});
  if (names != d.covariate_names) throw DataError("beta coordinates do not match the data columns");
  if (d.object_control.empty() && d.object_treatment.empty()) {
    throw DataError("data file has no object observations to match");
  }
  double threshold = INFINITY;
  if (eps) {
    threshold = *eps;
    if (!(threshold > 0.0)) throw ConfigError("epsilon must be > 0");
  } else {
    if (d.paired.empty()) throw ConfigError("epsilon=auto needs expert pairs in the data");
    threshold = resolve_epsilon(HyperParams{}, beta, d.paired);
  }
  const Matching m = greedy_match(beta, d.object_control, d.object_treatment, threshold,
                                  std::nullopt, MatchStrategy::sorted_edges);

  OutputDir dir(out_path);
  dir.write_with("matching.csv", [&](std::ostream& o) { write_matching_csv(m, o); });
  dir.write_with("unmatched.csv", [&](std::ostream& o) { write_unmatched_csv(m, o); });
  json diag{{"command", "match"},
            {"epsilon", double_or_string(threshold)},
            {"pairs", m.pairs.size()},
            {"unmatched_control", m.unmatched_control.size()},
            {"unmatched_treatment", m.unmatched_treatment.size()}};
  diag["inputs"] = {{"beta", file_digest(beta_path)}, {"data", file_digest(data_path)}};
  dir.finish(diag);
  out << "match: " << m.pairs.size() << " pairs written to " << out_path << "\n";
  return ok;
}

// --- evaluate ----------------------------------------------------------------

int cmd_evaluate(const std::string& matching_path, const std::string& truth_path,
                 const std::string& out_path, std::ostream& out) {
  std::ifstream min(matching_path);
  if (!min) throw DataError("cannot open matching file " + matching_path);
  std::ifstream tin(truth_path);
  if (!tin) throw DataError("cannot open truth file " + truth_path);
  const Matching m = read_matching_csv(min);
  const Truth t = read_truth_csv(tin);
  const double acc = matching_accuracy(m, t);
  json res{{"accuracy", acc},
           {"correct", static_cast<std::size_t>(std::lround(acc * static_cast<double>(t.size())))},
           {"truth_pairs", t.size()},
           {"predicted_pairs", m.pairs.size()}};
  if (!out_path.empty()) {
    OutputDir dir(out_path);
    dir.write("evaluation.json", res.dump(2) + "\n");
    json diag{{"command", "evaluate"}};
    diag["inputs"] = {{"matching", file_digest(matching_path)}, {"truth", file_digest(truth_path)}};
    dir.finish(diag);
  }
  out << res.dump() << "\n";
  return ok;
}

// --- simulate ----------------------------------------------------------------

std::string fmt(double v) { return csv::format_double(v); }

void simulate_random_table(const json& cfg, std::uint64_t seed, OutputDir& dir, json& summary) {
  const auto ns = list_or<std::size_t>(cfg, "n", {5, 10, 15, 20, 30, 50});
  const std::size_t reps = cfg.value("replicates", std::size_t{100000});
  json rows = json::array();
  std::ostringstream csv;
  csv << "n_pairs,replicates,mean_accuracy,se_accuracy,prob_no_correct,se_prob_no_correct,"
         "expected_accuracy,closed_form_no_correct\n";
  for (auto n : ns) {
    const RandomMatchingStats st = random_matching_stats(n, reps, seed);
    const double closed = std::pow(1.0 - 1.0 / static_cast<double>(n), static_cast<double>(n));
    csv << n << ',' << reps << ',' << fmt(st.mean_accuracy) << ',' << fmt(st.se_accuracy) << ','
        << fmt(st.prob_no_correct) << ',' << fmt(st.se_prob_no_correct) << ','
        << fmt(1.0 / static_cast<double>(n)) << ',' << fmt(closed) << '\n';
    rows.push_back({{"n_pairs", n},
                    {"mean_accuracy", st.mean_accuracy},
                    {"prob_no_correct", st.prob_no_correct},
                    {"closed_form_no_correct", closed}});
  }
  dir.write("results.csv", csv.str());
  summary["rows"] = rows;
}

DgpConfig base_config(const json& cfg) {
  return cfg.contains("base") ? dgp_from_json(cfg.at("base")) : DgpConfig{};
}

HyperParams config_hp(const json& cfg) {
  return cfg.contains("hyperparameters") ? hyperparams_from_json(cfg.at("hyperparameters"))
                                         : HyperParams{};
}

void simulate_grid(const json& cfg, std::uint64_t seed, std::size_t threads, OutputDir& dir,
                   json& summary) {
  ExperimentSpec spec;
  spec.cells = expand_grid(base_config(cfg), cfg.value("grid", json()));
  for (const auto& m : list_or<std::string>(cfg, "methods", {"scotoma", "euclidean",
                                                             "mahalanobis", "propensity", "rca"})) {
    spec.methods.push_back(parse_method(m));
  }
  spec.replicates = cfg.value("replicates", std::size_t{100});
  spec.seed = seed;
  spec.hp = config_hp(cfg);
  spec.threads = threads;
  const ExperimentResult r = run_experiment(spec);
  dir.write_with("results.csv", [&](std::ostream& o) { write_experiment_csv(r, o); });
  summary["experiment"] = experiment_summary_json(r);
}

void simulate_interactions(const json& cfg, std::uint64_t seed, std::size_t threads,
                           OutputDir& dir, json& summary) {
  const auto pairs = list_or<std::size_t>(cfg, "pairs", {15, 24, 36});
  const auto inter = list_or<std::size_t>(cfg, "interactions", {1, 2, 3, 5});
  const std::size_t reps = cfg.value("replicates", std::size_t{100});
  const auto cells =
      interaction_table(base_config(cfg), pairs, inter, reps, seed, config_hp(cfg), threads);
  std::ostringstream csv;
  csv << "n_pairs,n_interactions,replicates,mean_diff,se_diff,mean_diff_x10\n";
  json rows = json::array();
  for (const auto& c : cells) {
    csv << c.n_pairs << ',' << c.n_interactions << ',' << c.replicates << ',' << fmt(c.mean_diff)
        << ',' << fmt(c.se_diff) << ',' << fmt(10.0 * c.mean_diff) << '\n';
    rows.push_back({{"n_pairs", c.n_pairs},
                    {"n_interactions", c.n_interactions},
                    {"mean_diff", c.mean_diff},
                    {"se_diff", c.se_diff}});
  }
  dir.write("results.csv", csv.str());
  summary["rows"] = rows;
}

void simulate_self_taught(const json& cfg, std::uint64_t seed, std::size_t threads,
                          OutputDir& dir, json& summary) {
  DgpConfig base;
  base.n_train_pairs = 15;
  base.n_unpaired = 60;
  if (cfg.contains("base")) base = dgp_from_json(cfg.at("base"), base);
  HyperParams hp = config_hp(cfg);
  if (!hp.tau1) hp.tau1 = 3;
  const SelfTaughtReport rep =
      self_taught_gain_protocol(base, cfg.value("replicates", std::size_t{50}),
                                cfg.value("iterations", std::size_t{10}), seed, hp, threads);
  std::ostringstream csv;
  csv << "replicate,initial_accuracy,final_accuracy,gain,iterations\n";
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const auto& pt = rep.points[i];
    csv << i << ',' << fmt(pt.initial_accuracy) << ',' << fmt(pt.final_accuracy) << ','
        << fmt(pt.gain) << ',' << pt.iterations << '\n';
  }
  dir.write("results.csv", csv.str());
  summary["mean_gain"] = rep.mean_gain;
  summary["quadratic_fit"] = {rep.quad[0], rep.quad[1], rep.quad[2]};
  if (rep.mediocre_range) {
    summary["mediocre_range"] = {(*rep.mediocre_range)[0], (*rep.mediocre_range)[1]};
    summary["accuracy_cap"] = (*rep.mediocre_range)[1];
  } else {
    summary["mediocre_range"] = nullptr;
    summary["accuracy_cap"] = nullptr;
  }
}

void simulate_rate(const json& cfg, std::uint64_t seed, std::size_t threads, OutputDir& dir,
                   json& summary) {
  DgpConfig base;
  base.p = 6;
  if (cfg.contains("base")) base = dgp_from_json(cfg.at("base"), base);
  std::optional<double> lambda;
  if (cfg.contains("lambda") && !cfg.at("lambda").is_string()) lambda = cfg.at("lambda").get<double>();
  const RateReport rep = rate_protocol(
      base, list_or<std::size_t>(cfg, "n_pairs", {25, 50, 100, 200, 400}),
      cfg.value("replicates", std::size_t{100}), cfg.value("master_factor", std::size_t{50}), seed,
      lambda, threads);
  std::ostringstream csv;
  csv << "n_pairs,mean_dist,se_dist\n";
  for (const auto& pt : rep.points) {
    csv << pt.n_pairs << ',' << fmt(pt.mean_dist) << ',' << fmt(pt.se_dist) << '\n';
  }
  dir.write("results.csv", csv.str());
  summary["slope"] = rep.slope;
}

void simulate_dataset(const json& cfg, std::uint64_t seed, OutputDir& dir, json& summary) {
  DgpConfig base = base_config(cfg);
  base.seed = seed;
  const GeneratedData g = generate(base);
  dir.write_with("data.csv", [&](std::ostream& o) { write_dataset(g.data, o); });
  dir.write_with("truth.csv", [&](std::ostream& o) { write_truth_csv(g.truth, o); });
  summary["principal"] = {g.principal[0], g.principal[1]};
  summary["attempts"] = g.attempts;
  if (g.true_beta) {
    std::vector<double> b(g.true_beta->values().data(),
                          g.true_beta->values().data() + g.true_beta->size());
    summary["true_beta"] = b;
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_flag, std::size_t threads, std::ostream& out) {
  const json cfg = read_json_file(config_path);
  if (!cfg.is_object() || !cfg.contains("protocol")) {
    throw ConfigError("simulate config needs a \"protocol\" field");
  }
  static const std::vector<std::string> known{"protocol", "seed", "replicates", "base", "grid",
                                              "methods", "hyperparameters", "n", "pairs",
                                              "interactions", "iterations", "n_pairs",
                                              "master_factor", "lambda"};
  for (const auto& [key, _] : cfg.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown simulate key '" + key + "'");
    }
  }
  const std::string protocol = cfg.at("protocol").get<std::string>();
  const std::uint64_t seed = seed_flag ? *seed_flag : cfg.value("seed", std::uint64_t{0});

  static const std::vector<std::string> protocols{"random_table", "linear_grid", "experiment",
                                                  "interaction_table", "self_taught", "rate",
                                                  "dataset"};
  if (std::find(protocols.begin(), protocols.end(), protocol) == protocols.end()) {
    throw ConfigError("unknown protocol '" + protocol + "'");
  }

  OutputDir dir(out_path);
  json summary{{"protocol", protocol}, {"seed", seed}};
  try {
    if (protocol == "random_table") simulate_random_table(cfg, seed, dir, summary);
    else if (protocol == "linear_grid" || protocol == "experiment") simulate_grid(cfg, seed, threads, dir, summary);
    else if (protocol == "interaction_table") simulate_interactions(cfg, seed, threads, dir, summary);
    else if (protocol == "self_taught") simulate_self_taught(cfg, seed, threads, dir, summary);
    else if (protocol == "rate") simulate_rate(cfg, seed, threads, dir, summary);
    else simulate_dataset(cfg, seed, dir, summary);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("simulate config: ") + e.what());
  }
  dir.write("summary.json", summary.dump(2) + "\n");
  json diag{{"command", "simulate"}, {"protocol", protocol}, {"seed", seed}, {"threads", threads}};
  diag["inputs"] = {{"config", file_digest(config_path)}};
  dir.finish(diag);
  out << "simulate (" << protocol << "): wrote " << out_path << "\n";
  return ok;
}

std::uint64_t json_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(key + " must be a nonnegative integer");
  }
  return static_cast<std::uint64_t>(v.get<std::int64_t>());
}

}  // namespace

HyperParams hyperparams_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("hyperparameters must be a JSON object");
  HyperParams hp;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lambda") {
        if (v.is_string() && v.get<std::string>() == "auto") hp.lambda.reset();
        else hp.lambda = v.get<double>();
      } else if (key == "tau1") {
        if (v.is_string() && v.get<std::string>() == "auto") hp.tau1.reset();
        else hp.tau1 = json_count(v, key);
      } else if (key == "tau2") {
        hp.tau2 = json_count(v, key);
      } else if (key == "delta0") {
        hp.delta0 = v.is_string() && v.get<std::string>() == "inf" ? INFINITY : v.get<double>();
      } else if (key == "epsilon") {
        hp.epsilon = parse_epsilon(v);
      } else if (key == "max_iters") {
        hp.max_iters = v.is_string() && v.get<std::string>() == "inf" ? HyperParams::unlimited
                                                                       : json_count(v, key);
      } else if (key == "exclusion") {
        hp.exclusion_enabled = v.get<bool>();
      } else if (key == "seed") {
        hp.seed = json_count(v, key);
      } else {
        throw ConfigError("unknown hyperparameter '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("hyperparameters: ") + e.what());
  }
  hp.validate();
  return hp;
}

FitConfig fit_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("fit config must be a JSON object");
  FitConfig fc;
  json hp = json::object();
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "mode") {
        const auto m = v.get<std::string>();
        if (m == "initial") fc.mode = FitMode::initial;
        else if (m == "canonical") fc.mode = FitMode::canonical;
        else if (m == "self_taught") fc.mode = FitMode::self_taught;
        else throw ConfigError("unknown mode '" + m + "'");
      } else if (key == "ignore_columns") {
        fc.ignore_columns = v.get<std::vector<std::string>>();
      } else {
        hp[key] = v;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("fit config: ") + e.what());
  }
  fc.hp = hyperparams_from_json(hp);
  if (fc.hp.tau2 > 0 && fc.mode != FitMode::self_taught) {
    throw ConfigError("tau2 requires self_taught");
  }
  return fc;
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest(const fs::path& p) { return fnv1a64_hex(slurp(p)); }

std::size_t resolve_threads(int flag_value) {
  if (flag_value > 0) return static_cast<std::size_t>(flag_value);
  if (const char* env = std::getenv("SCOTOMA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*env != '\0' && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw ConfigError("SCOTOMA_THREADS must be a positive integer");
  }
  return 1;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semisupervised one-to-one matching with a learned quadratic score"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "scotoma 0.1.0");

  std::string config, data, outdir, beta, epsilon = "inf", matching, truth;
  std::vector<std::string> ignore;
  std::uint64_t seed = 0;
  int threads = 0;

  auto* fit = app.add_subcommand("fit", "Learn the weight vector from a dataset");
  fit->add_option("--config", config, "JSON hyperparameters")->required()->check(CLI::ExistingFile);
  fit->add_option("--data", data, "Dataset CSV")->required();
  fit->add_option("--out", outdir, "Output directory")->required();
  auto* fit_seed = fit->add_option("--seed", seed, "Seed override");

  auto* match = app.add_subcommand("match", "Match the object set with a stored weight vector");
  match->add_option("--beta", beta, "beta.csv from fit")->required();
  match->add_option("--data", data, "Dataset CSV")->required();
  match->add_option("--epsilon", epsilon, "Score threshold: number, auto or inf");
  match->add_option("--out", outdir, "Output directory")->required();
  match->add_option("--ignore-column", ignore, "Extra CSV column to skip");

  auto* sim = app.add_subcommand("simulate", "Run a simulation protocol");
  sim->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", outdir, "Output directory")->required();
  auto* sim_seed = sim->add_option("--seed", seed, "Seed override");
  sim->add_option("--threads", threads, "Worker threads (default SCOTOMA_THREADS or 1)");

  auto* eval = app.add_subcommand("evaluate", "Score a matching against the expert pairing");
  eval->add_option("--matching", matching, "Matching CSV")->required();
  eval->add_option("--truth", truth, "Truth CSV (control_id,treatment_id)")->required();
  eval->add_option("--out", outdir, "Optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*fit) {
      return cmd_fit(config, data, outdir, *fit_seed ? std::optional<std::uint64_t>(seed) : std::nullopt, out);
    }
    if (*match) return cmd_match(beta, data, epsilon, outdir, ignore, out);
    if (*sim) {
      return cmd_simulate(config, outdir,
                          *sim_seed ? std::optional<std::uint64_t>(seed) : std::nullopt,
                          resolve_threads(threads), out);
    }
    if (*eval) return cmd_evaluate(matching, truth, outdir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return data_error;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return numerical_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return internal_error;
  }
  return config_error;
}

}  // namespace scotoma::cli
