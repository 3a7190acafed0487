#pragma once

#include "scotoma/score.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

namespace scotoma::cli {

// Process exit codes.
enum ExitCode : int {
  ok = 0,
  config_error = 1,
  data_error = 2,
  numerical_error = 3,
  internal_error = 4,
};

enum class FitMode { initial, canonical, self_taught };

struct FitConfig {
  HyperParams hp;
  FitMode mode = FitMode::canonical;
  std::vector<std::string> ignore_columns;
};

/// Keys: lambda, tau1, tau2, delta0, epsilon, max_iters, exclusion, mode,
/// seed, ignore_columns. "auto" selects the default for lambda, tau1 and
/// epsilon; epsilon also accepts "inf". Throws ConfigError.
FitConfig fit_config_from_json(const nlohmann::json& j);
HyperParams hyperparams_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit digest as 16 hex digits.
std::string fnv1a64_hex(const std::string& bytes);
std::string file_digest(const std::filesystem::path& p);

/// Threads from the flag, else SCOTOMA_THREADS, else 1.
std::size_t resolve_threads(int flag_value);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scotoma::cli
