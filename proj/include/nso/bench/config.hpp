#pragma once
// Experiment configuration: a TOML document plus command-line overrides.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nso/objectives/noise.hpp"
#include "nso/orchestrator.hpp"
#include "nso/seed_select.hpp"

namespace nso::bench {

/// Malformed or inconsistent configuration (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SeedingSettings {
  int repetitions = 10;
  int b_start = 5;
  double local_half_width = 0.2;
  /// A run succeeds when its best value is within this of the known minimum.
  double tolerance = 1e-2;
};

struct ExperimentConfig {
  std::string problem_id = "H2-d";
  Mode mode = Mode::GpImfil;
  /// Modes run by `compare`.
  std::vector<Mode> modes{Mode::GpImfil, Mode::ImfilOnly, Mode::GpOnly};
  int trials = 3;
  BudgetPlan budgets;
  std::optional<NoiseSpec> noise;
  WeightPattern pattern;
  OrchestratorOptions options;
  SeedingSettings seeding;
  std::uint64_t rng_seed_base = 1;
  std::filesystem::path output_dir = "nso-out";

  nlohmann::json to_json() const;
};

/// Values given on the command line; they win over the file.
struct Overrides {
  std::optional<std::string> problem;
  std::optional<std::string> mode;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> cap;
};

/// Parses TOML text (empty text means all defaults), applies overrides and
/// resolves problem-dependent defaults. Throws ConfigError.
ExperimentConfig resolve_config(const std::string& toml_text, const Overrides& overrides);

/// Reads the file (if given) and calls resolve_config. Throws ConfigError.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const Overrides& overrides);

}  // namespace nso::bench
