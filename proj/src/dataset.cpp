#include "scotoma/dataset.hpp"

#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_set>

namespace scotoma {

namespace {

const char* group_label(Group g) { return g == Group::control ? "c" : "t"; }

void check_observation(const Observation& o, Group expected, std::size_t p,
                       std::unordered_set<std::string>& seen) {
  if (o.group != expected) {
    throw DataError("observation '" + o.id + "' sits in the wrong group block");
  }
  if (static_cast<std::size_t>(o.x.size()) != p) {
    throw DataError("observation '" + o.id + "' has " + std::to_string(o.x.size()) +
                    " covariates, expected " + std::to_string(p));
  }
  if (!o.x.allFinite()) {
    throw DataError("observation '" + o.id + "' has non-finite covariates");
  }
  if (!seen.insert(o.id).second) {
    throw DataError("duplicate id '" + o.id + "'");
  }
}

template <class F>
void for_each_observation(const SemiDataset& d, F&& f) {
  for (const auto& pr : d.paired) {
    f(pr.control);
    f(pr.treatment);
  }
  for (const auto& o : d.unpaired_control) f(o);
  for (const auto& o : d.unpaired_treatment) f(o);
  for (const auto& o : d.object_control) f(o);
  for (const auto& o : d.object_treatment) f(o);
}

template <class F>
void transform_observations(SemiDataset& d, F&& f) {
  for (auto& pr : d.paired) {
    f(pr.control);
    f(pr.treatment);
  }
  for (auto* block : {&d.unpaired_control, &d.unpaired_treatment, &d.object_control,
                      &d.object_treatment}) {
    for (auto& o : *block) f(o);
  }
}

double parse_number(const std::string& field, const std::string& column, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (first == last || ec != std::errc() || ptr != last) {
    throw DataError("line " + std::to_string(line) + ": non-numeric covariate '" + field +
                    "' in column " + column);
  }
  if (!std::isfinite(v)) {
    throw DataError("line " + std::to_string(line) + ": non-finite covariate in column " +
                    column);
  }
  return v;
}

struct PendingPair {
  std::optional<Observation> control;
  std::optional<Observation> treatment;
  std::size_t members = 0;
  std::size_t first_seen = 0;
};

}  // namespace

DatasetDims SemiDataset::dims() const {
  return DatasetDims{paired.size(),        unpaired_control.size(), unpaired_treatment.size(),
                     object_control.size(), object_treatment.size(), p()};
}

void SemiDataset::validate() const {
  const std::size_t dim = p();
  std::unordered_set<std::string> seen;
  for (const auto& pr : paired) {
    check_observation(pr.control, Group::control, dim, seen);
    check_observation(pr.treatment, Group::treatment, dim, seen);
  }
  for (const auto& o : unpaired_control) check_observation(o, Group::control, dim, seen);
  for (const auto& o : unpaired_treatment) check_observation(o, Group::treatment, dim, seen);
  for (const auto& o : object_control) check_observation(o, Group::control, dim, seen);
  for (const auto& o : object_treatment) check_observation(o, Group::treatment, dim, seen);
}

Matrix stack_rows(const std::vector<Observation>& obs, std::size_t p) {
  Matrix m(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < obs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = obs[i].x;
  return m;
}

Matrix paired_controls(const SemiDataset& d) {
  Matrix m(static_cast<Eigen::Index>(d.paired.size()), static_cast<Eigen::Index>(d.p()));
  for (std::size_t i = 0; i < d.paired.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = d.paired[i].control.x;
  }
  return m;
}

Matrix paired_treatments(const SemiDataset& d) {
  Matrix m(static_cast<Eigen::Index>(d.paired.size()), static_cast<Eigen::Index>(d.p()));
  for (std::size_t i = 0; i < d.paired.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = d.paired[i].treatment.x;
  }
  return m;
}

SemiDataset parse_dataset(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!csv::is_blank(line)) {
      header = csv::split(line);
      break;
    }
  }
  if (header.empty()) throw DataError("no observations: empty file");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(header[i], i).second) {
      throw DataError("duplicate column '" + header[i] + "'");
    }
  }
  for (const char* required : {"id", "group", "pair_id", "role"}) {
    if (!col.count(required)) throw DataError(std::string("missing column '") + required + "'");
  }

  // Covariates are x1..xp; any other column must be explicitly ignored.
  std::size_t p = 0;
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> cov_names;
  for (std::size_t k = 1;; ++k) {
    auto it = col.find("x" + std::to_string(k));
    if (it == col.end()) break;
    cov_cols.push_back(it->second);
    cov_names.push_back(it->first);
    p = k;
  }
  for (const auto& name : header) {
    if (name == "id" || name == "group" || name == "pair_id" || name == "role") continue;
    if (std::find(cov_names.begin(), cov_names.end(), name) != cov_names.end()) continue;
    if (std::find(schema.ignore_columns.begin(), schema.ignore_columns.end(), name) !=
        schema.ignore_columns.end()) {
      continue;
    }
    if (name.size() > 1 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      throw DataError("missing covariate column x" + std::to_string(p + 1) + " (found " + name +
                      ")");
    }
    throw DataError("unexpected column '" + name + "'");
  }
  if (p == 0) throw DataError("missing covariate column x1");

  SemiDataset d;
  d.covariate_names = cov_names;
  std::map<std::string, PendingPair> pending;
  std::vector<std::string> pair_order;
  std::unordered_set<std::string> ids;
  std::size_t rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (csv::is_blank(line)) continue;
    auto fields = csv::split(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": ragged row with " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    ++rows;
    Observation o;
    o.id = fields[col["id"]];
    if (o.id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty id");
    if (!ids.insert(o.id).second) throw DataError("duplicate id '" + o.id + "'");

    const std::string& g = fields[col["group"]];
    if (g == "c") {
      o.group = Group::control;
    } else if (g == "t") {
      o.group = Group::treatment;
    } else {
      throw DataError("line " + std::to_string(line_no) + ": group must be c or t, got '" + g +
                      "'");
    }
    const std::string& role = fields[col["role"]];
    if (role != "train" && role != "object") {
      throw DataError("line " + std::to_string(line_no) + ": role must be train or object, got '" +
                      role + "'");
    }
    o.x.resize(static_cast<Eigen::Index>(p));
    for (std::size_t k = 0; k < p; ++k) {
      o.x[static_cast<Eigen::Index>(k)] = parse_number(fields[cov_cols[k]], cov_names[k], line_no);
    }

    const std::string& pid = fields[col["pair_id"]];
    if (!pid.empty()) {
      if (role == "object") {
        throw DataError("pair_id '" + pid + "' on object row '" + o.id +
                        "': object observations cannot carry expert pairs");
      }
      auto [it, inserted] = pending.try_emplace(pid);
      if (inserted) pair_order.push_back(pid);
      auto& slot = it->second;
      ++slot.members;
      if (slot.members > 2) throw DataError("pair_id '" + pid + "' has more than 2 members");
      auto& side = o.group == Group::control ? slot.control : slot.treatment;
      if (side) throw DataError("same-group pair: pair_id '" + pid + "' has two " +
                                (o.group == Group::control ? "control" : "treatment") + " rows");
      side = std::move(o);
      continue;
    }
    if (role == "train") {
      (o.group == Group::control ? d.unpaired_control : d.unpaired_treatment).push_back(std::move(o));
    } else {
      (o.group == Group::control ? d.object_control : d.object_treatment).push_back(std::move(o));
    }
  }
  if (rows == 0) throw DataError("no observations");

  for (const auto& pid : pair_order) {
    auto& slot = pending[pid];
    if (slot.members != 2) {
      throw DataError("pair_id '" + pid + "' has " + std::to_string(slot.members) +
                      " member(s), expected 2");
    }
    d.paired.push_back(ObservationPair{std::move(*slot.control), std::move(*slot.treatment), pid});
  }
  d.validate();
  return d;
}

SemiDataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path.string());
  return parse_dataset(in, schema);
}

void write_dataset(const SemiDataset& d, std::ostream& out) {
  out << "id,group,pair_id,role";
  for (const auto& name : d.covariate_names) out << ',' << name;
  out << '\n';
  auto row = [&](const Observation& o, const std::string& pid, const char* role) {
    out << csv::quote(o.id) << ',' << group_label(o.group) << ',' << csv::quote(pid) << ',' << role;
    for (Eigen::Index k = 0; k < o.x.size(); ++k) out << ',' << csv::format_double(o.x[k]);
    out << '\n';
  };
  for (std::size_t i = 0; i < d.paired.size(); ++i) {
    const auto& pr = d.paired[i];
    const std::string pid = pr.pair_id.empty() ? "P" + std::to_string(i + 1) : pr.pair_id;
    row(pr.control, pid, "train");
    row(pr.treatment, pid, "train");
  }
  for (const auto& o : d.unpaired_control) row(o, "", "train");
  for (const auto& o : d.unpaired_treatment) row(o, "", "train");
  for (const auto& o : d.object_control) row(o, "", "object");
  for (const auto& o : d.object_treatment) row(o, "", "object");
}

void write_dataset(const SemiDataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset(d, out);
}

Vector StandardizationState::apply(const Vector& x) const {
  return (x - mean).cwiseQuotient(scale);
}

Vector StandardizationState::invert(const Vector& z) const {
  return z.cwiseProduct(scale) + mean;
}

std::pair<SemiDataset, StandardizationState> standardize(const SemiDataset& d) {
  const auto p = static_cast<Eigen::Index>(d.p());
  std::size_t n = 0;
  Vector sum = Vector::Zero(p);
  for_each_observation(d, [&](const Observation& o) {
    sum += o.x;
    ++n;
  });
  if (n == 0) throw DataError("no observations");
  StandardizationState state;
  state.mean = sum / static_cast<double>(n);
  Vector ss = Vector::Zero(p);
  for_each_observation(d, [&](const Observation& o) {
    ss += (o.x - state.mean).cwiseAbs2();
  });
  state.scale = (ss / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index k = 0; k < p; ++k) {
    // Relative to the coordinate's magnitude so constant-but-large columns are caught.
    const double ref = std::max(1.0, std::abs(state.mean[k]));
    if (!(state.scale[k] > 1e-12 * ref)) {
      const std::string name = static_cast<std::size_t>(k) < d.covariate_names.size()
                                   ? d.covariate_names[static_cast<std::size_t>(k)]
                                   : "x" + std::to_string(k + 1);
      throw DataError("zero-variance coordinate " + name);
    }
  }
  return {apply_standardization(d, state), state};
}

SemiDataset apply_standardization(const SemiDataset& d, const StandardizationState& state) {
  SemiDataset out = d;
  transform_observations(out, [&](Observation& o) { o.x = state.apply(o.x); });
  return out;
}

}  // namespace scotoma
