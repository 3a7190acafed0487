#pragma once

#include "scotoma/types.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace scotoma {

enum class Group { control, treatment };

struct Observation {
  std::string id;
  Group group = Group::control;
  Vector x;
};

// One expert pair. pair_id is kept only so datasets round-trip through CSV.
struct ObservationPair {
  Observation control;
  Observation treatment;
  std::string pair_id;
};

struct DatasetDims {
  std::size_t paired = 0;              // number of expert pairs
  std::size_t unpaired_control = 0;
  std::size_t unpaired_treatment = 0;
  std::size_t object_control = 0;
  std::size_t object_treatment = 0;
  std::size_t p = 0;

  std::size_t observations() const {
    return 2 * paired + unpaired_control + unpaired_treatment + object_control +
           object_treatment;
  }
};

// Training block (expert pairs + unpaired pools) and object block. Pairings
// never cross blocks: object rows carry no expert pair.
struct SemiDataset {
  std::vector<ObservationPair> paired;
  std::vector<Observation> unpaired_control;
  std::vector<Observation> unpaired_treatment;
  std::vector<Observation> object_control;
  std::vector<Observation> object_treatment;
  std::vector<std::string> covariate_names;

  DatasetDims dims() const;
  std::size_t p() const { return covariate_names.size(); }

  // Throws DataError on duplicate ids, wrong group labels, ragged or
  // non-finite covariates.
  void validate() const;
};

// Stack observations (or one side of the pairs) as rows.
Matrix stack_rows(const std::vector<Observation>& obs, std::size_t p);
Matrix paired_controls(const SemiDataset& d);
Matrix paired_treatments(const SemiDataset& d);

struct CsvSchema {
  std::vector<std::string> ignore_columns;
};

// CSV layout: id,group,pair_id,role,x1..xp with group in {c,t} and role in
// {train,object}. Rows sharing a non-empty pair_id form an expert pair.
SemiDataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});
SemiDataset parse_dataset(std::istream& in, const CsvSchema& schema = {});
void write_dataset(const SemiDataset& d, std::ostream& out);
void write_dataset(const SemiDataset& d, const std::filesystem::path& path);

struct StandardizationState {
  Vector mean;
  Vector scale;

  Vector apply(const Vector& x) const;
  Vector invert(const Vector& z) const;
};

// Pooled (all five blocks) mean and population standard deviation.
std::pair<SemiDataset, StandardizationState> standardize(const SemiDataset& d);
SemiDataset apply_standardization(const SemiDataset& d, const StandardizationState& state);

}  // namespace scotoma
