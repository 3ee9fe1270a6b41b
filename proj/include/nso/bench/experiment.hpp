#pragma once
// Trial fan-out, trace/summary writers, mode comparison and the seeding study.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nso/bench/config.hpp"
#include "nso/orchestrator.hpp"

namespace nso::bench {

struct SummaryRow {
  std::string problem_id;
  Mode mode = Mode::GpImfil;
  double mean_best = 0.0;
  double std_best = 0.0;  // population formula (divisor n)
  double mean_evals_to_best = 0.0;
  int trials = 0;
};

struct ExperimentResult {
  SummaryRow summary;
  std::vector<RunRecord> records;  // in trial order
  /// Set when a trial aborted; its files then carry a ".partial" suffix.
  std::optional<std::string> error;
};

/// Worker count: NOISY_SEED_OPT_THREADS when set and positive, otherwise the
/// hardware concurrency, never more than `jobs`.
int worker_count(int jobs);

/// Runs config.trials trials of config.mode (trial i uses seed base + i) and,
/// when `write` is set, writes per-trial trace CSV, record JSON and timing JSON
/// plus the summary CSV under config.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write = true);

/// mean/std/mean evals-to-best over the records.
SummaryRow summarize(const std::string& problem_id, Mode mode,
                     const std::vector<RunRecord>& records);

/// Trace CSV: eval_index, theta_0..theta_{d-1}, value, best_so_far, phase, seed_index.
std::string trace_csv(const RunRecord& record);

struct ComparisonResult {
  std::vector<ExperimentResult> per_mode;  // in config.modes order
  std::vector<SummaryRow> ranking;         // ascending mean_best, ties by mode order
  std::optional<std::string> error;
};

/// Runs every mode in config.modes on the same problem, budgets and seeds and
/// writes progress.csv (mode, trial, eval_index, best_so_far) and ranking.csv.
/// Throws ConfigError when config.modes is empty.
ComparisonResult compare(const ExperimentConfig& config, bool write = true);

struct SeedingRun {
  int repetition = 0;
  double best_value = 0.0;
  int evals = 0;
  bool success = false;
  bool boundary_seed = false;
  std::vector<Vector> seeds;
};

struct SeedingMethodSummary {
  std::string method;
  double mean_result = 0.0;
  double mean_evals = 0.0;
  double success_rate = 0.0;
};

struct SeedingReport {
  std::string problem_id;
  double reference_min = 0.0;
  std::vector<SeedingRun> multistart;  // surrogate-seeded, one per repetition
  std::vector<SeedingRun> baseline;    // single start from the domain center
  SeedingMethodSummary multistart_summary;
  SeedingMethodSummary baseline_summary;
};

/// Multistart with config.seeding.b_start seeds in boxes of half-width
/// config.seeding.local_half_width and no local budget limit, against a
/// single ImFil start from the domain center, over the full domain.
/// Noise is switched off. Throws ConfigError when the problem has no known
/// minimum.
SeedingReport seeding_study(const ExperimentConfig& config, bool write = true);

}  // namespace nso::bench
