#include "scotoma/baselines.hpp"
#include "scotoma/dataset.hpp"
#include "scotoma/eigsolve.hpp"
#include "scotoma/fit.hpp"
#include "scotoma/matcher.hpp"
#include "scotoma/score.hpp"
#include "scotoma/simlab.hpp"

#include <json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace scotoma;

namespace {

HyperParams make_hyper(std::optional<double> lambda, std::optional<std::size_t> tau1,
                       std::size_t tau2, double delta0, std::optional<double> epsilon,
                       std::size_t max_iters, bool exclusion, std::uint64_t seed) {
  HyperParams hp;
  hp.lambda = lambda;
  hp.tau1 = tau1;
  hp.tau2 = tau2;
  hp.delta0 = delta0;
  hp.epsilon = epsilon;
  hp.max_iters = max_iters;
  hp.exclusion_enabled = exclusion;
  hp.seed = seed;
  hp.validate();
  return hp;
}

std::vector<std::string> ids(const std::vector<Observation>& obs) {
  std::vector<std::string> out;
  out.reserve(obs.size());
  for (const auto& o : obs) out.push_back(o.id);
  return out;
}

py::dict matching_dict(const Matching& m) {
  py::list pairs;
  for (const auto& p : m.pairs) pairs.append(py::make_tuple(p.control_id, p.treatment_id, p.score));
  py::dict d;
  d["pairs"] = pairs;
  d["unmatched_control"] = m.unmatched_control;
  d["unmatched_treatment"] = m.unmatched_treatment;
  return d;
}

Matching matching_from(const py::iterable& pairs) {
  Matching m;
  for (const auto& item : pairs) {
    const auto t = item.cast<py::sequence>();
    MatchedPair mp;
    mp.control_id = t[0].cast<std::string>();
    mp.treatment_id = t[1].cast<std::string>();
    m.pairs.push_back(mp);
  }
  return m;
}

DgpConfig dgp_from_dict(const py::dict& cfg) {
  const auto dumps = py::module_::import("json").attr("dumps");
  return dgp_from_json(nlohmann::json::parse(dumps(cfg).cast<std::string>()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SCOTOMA semisupervised one-to-one matching";

  auto base = py::register_exception<Error>(m, "ScotomaError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<SemiDataset>(m, "Dataset")
      .def_property_readonly("covariate_names",
                             [](const SemiDataset& d) { return d.covariate_names; })
      .def_property_readonly("p", &SemiDataset::p)
      .def_property_readonly("dims",
                             [](const SemiDataset& d) {
                               const auto k = d.dims();
                               py::dict out;
                               out["paired"] = k.paired;
                               out["unpaired_control"] = k.unpaired_control;
                               out["unpaired_treatment"] = k.unpaired_treatment;
                               out["object_control"] = k.object_control;
                               out["object_treatment"] = k.object_treatment;
                               out["p"] = k.p;
                               return out;
                             })
      .def_property_readonly("paired_controls", &paired_controls)
      .def_property_readonly("paired_treatments", &paired_treatments)
      .def_property_readonly("object_controls",
                             [](const SemiDataset& d) { return stack_rows(d.object_control, d.p()); })
      .def_property_readonly("object_treatments",
                             [](const SemiDataset& d) { return stack_rows(d.object_treatment, d.p()); })
      .def_property_readonly("object_control_ids",
                             [](const SemiDataset& d) { return ids(d.object_control); })
      .def_property_readonly("object_treatment_ids",
                             [](const SemiDataset& d) { return ids(d.object_treatment); })
      .def("to_csv", [](const SemiDataset& d) {
        std::ostringstream out;
        write_dataset(d, out);
        return out.str();
      });

  m.def("load_dataset", [](const std::filesystem::path& path) { return load_dataset(path); },
        py::arg("path"));
  m.def("parse_dataset", [](const std::string& text) {
    std::istringstream in(text);
    return parse_dataset(in);
  }, py::arg("text"));

  m.def("score", [](const Vector& beta, const Vector& xi, const Vector& xj) {
    return score(WeightVector(beta), xi, xj);
  }, py::arg("beta"), py::arg("xi"), py::arg("xj"));
  m.def("score_matrix", [](const Vector& beta, const Matrix& controls, const Matrix& treatments) {
    return score_matrix(WeightVector(beta), controls, treatments);
  }, py::arg("beta"), py::arg("controls"), py::arg("treatments"));
  m.def("normalize_weights", [](const Vector& v) { return WeightVector(v).values(); });
  m.def("subspace_dist", py::overload_cast<const Vector&, const Vector&>(&subspace_dist),
        py::arg("b1"), py::arg("b2"));

  m.def("top_generalized_eigvec", [](const Matrix& controls, const Matrix& treatments, double lambda) {
    const auto sol = top_generalized_eigvec(build_scatter(controls, treatments, lambda));
    py::dict out;
    out["beta"] = sol.beta.values();
    out["eigenvalue"] = sol.eigenvalue;
    out["degenerate"] = sol.degenerate;
    out["residual"] = sol.residual;
    return out;
  }, py::arg("controls"), py::arg("treatments"), py::arg("lambda_"));

  m.def("greedy_match_scores",
        [](const Matrix& scores, std::optional<double> epsilon, std::optional<std::size_t> max_pairs) {
          const auto r = greedy_match_scores(scores, epsilon, max_pairs);
          std::vector<std::tuple<std::size_t, std::size_t, double>> out;
          for (const auto& p : r.pairs) out.emplace_back(p.control, p.treatment, p.score);
          return out;
        },
        py::arg("scores"), py::arg("epsilon") = py::none(), py::arg("max_pairs") = py::none());

  m.def("match_objects",
        [](const SemiDataset& d, const Vector& beta, std::optional<double> epsilon) {
          return matching_dict(
              greedy_match(WeightVector(beta), d.object_control, d.object_treatment, epsilon));
        },
        py::arg("dataset"), py::arg("beta"), py::arg("epsilon") = py::none());

  m.def("matching_accuracy",
        [](const py::iterable& predicted, const Truth& truth) {
          return matching_accuracy(matching_from(predicted), truth);
        },
        py::arg("predicted"), py::arg("truth"));

  m.def("random_matching_stats",
        [](std::size_t n, std::size_t replicates, std::uint64_t seed) {
          const auto s = random_matching_stats(n, replicates, seed);
          py::dict out;
          out["mean_accuracy"] = s.mean_accuracy;
          out["prob_no_correct"] = s.prob_no_correct;
          out["se_accuracy"] = s.se_accuracy;
          out["se_prob_no_correct"] = s.se_prob_no_correct;
          return out;
        },
        py::arg("n_pairs"), py::arg("replicates"), py::arg("seed") = 0);

  m.def("fit",
        [](const SemiDataset& d, const std::string& mode, std::optional<double> lambda,
           std::optional<std::size_t> tau1, std::size_t tau2, double delta0,
           std::optional<double> epsilon, std::size_t max_iters, bool exclusion,
           std::uint64_t seed) {
          const HyperParams hp =
              make_hyper(lambda, tau1, tau2, delta0, epsilon, max_iters, exclusion, seed);
          py::dict out;
          if (mode == "initial") {
            out["beta"] = fit_initial(d, hp).values();
            return out;
          }
          FitResult r;
          if (mode == "canonical") {
            r = fit_canonical(d, hp);
          } else if (mode == "self_taught") {
            r = fit_self_taught(d, hp);
          } else {
            throw ConfigError("unknown fit mode '" + mode + "'");
          }
          out["beta"] = r.beta.values();
          out["iterations"] = r.state.iteration;
          out["stop_reason"] = to_string(r.state.stop_reason);
          out["converged"] = r.state.converged;
          out["lambda"] = r.state.lambda;
          out["epsilon"] = r.state.epsilon;
          out["n_paired"] = r.state.paired.size();
          out["matching"] = matching_dict(r.state.object_matching);
          out["warnings"] = r.state.warnings;
          return out;
        },
        py::arg("dataset"), py::arg("mode") = "canonical", py::arg("lambda_") = py::none(),
        py::arg("tau1") = py::none(), py::arg("tau2") = 0, py::arg("delta0") = 1e-4,
        py::arg("epsilon") = py::none(), py::arg("max_iters") = 100,
        py::arg("exclusion") = false, py::arg("seed") = 0);

  m.def("generate",
        [](const py::dict& cfg) {
          auto g = generate(dgp_from_dict(cfg));
          py::dict out;
          out["truth"] = g.truth;
          out["true_beta"] = g.true_beta ? py::cast(Vector(g.true_beta->values())) : py::none();
          out["principal"] = g.principal;
          out["dataset"] = std::move(g.data);
          return out;
        },
        py::arg("config") = py::dict());
}
