#pragma once
// Surrogate-seeded multistart driver and the two baselines it is compared
// against: GP-only Bayesian optimization and ImFil restarted from the design.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nso/acquisition.hpp"
#include "nso/design.hpp"
#include "nso/gp.hpp"
#include "nso/imfil.hpp"
#include "nso/seed_select.hpp"

namespace nso {

/// Objective with an evaluation key. Stochastic objectives must derive their
/// randomness from the key only, so repeated runs and parallel local searches
/// reproduce the same values.
using Objective = std::function<double(std::span<const double> theta, std::uint64_t key)>;

enum class Mode { GpImfil, ImfilOnly, GpOnly };

std::string_view mode_name(Mode mode);
/// Throws std::invalid_argument for unknown names.
Mode parse_mode(std::string_view name);

struct BudgetPlan {
  int n0 = 6;
  int b_gp = 30;
  int b_loc = 970;
  int b_start = 10;
  double local_half_width = 0.05;
  int total_cap = 1000;

  /// n0 = 2(d+1), b_gp = n0 + 8(d+1), the rest of the cap for local search.
  static BudgetPlan paper_protocol(std::size_t d, int total_cap = 1000,
                                   double local_half_width = 0.05);
  /// Throws std::invalid_argument unless n0 <= b_gp <= total_cap,
  /// b_gp + b_loc <= total_cap and all counts are positive (b_loc >= 0).
  void validate() const;
};

struct OrchestratorOptions {
  KernelSpec kernel;
  AcquisitionOptions acquisition;
  ImfilConfig imfil;
  /// Full hyperparameter search every iteration up to this many samples ...
  int refit_all_until = 50;
  /// ... then after max(refit_period, refit_fraction * k) new samples; in
  /// between only the factorization is updated.
  int refit_period = 5;
  double refit_fraction = 0.1;
  /// Periodic refits past refit_all_until do one sweep from the previous
  /// optimum within this log-radius, plus this many random restarts.
  double late_refit_radius = 1.0;
  int late_refit_restarts = 0;
  /// Stop the GP phase after this many consecutive non-improving iterations;
  /// 0 disables.
  int stall_threshold = 0;
  /// Run the local searches concurrently. Each search then gets an equal
  /// share of the remaining cap and results are merged in seed order.
  bool parallel_local = false;
  /// Measure seed distances in unit-cube coordinates.
  bool unit_cube_seed_distances = false;
};

struct RunEvent {
  std::int64_t eval_index = 0;  // samples taken when the event happened
  std::string kind;
  std::string message;
};

struct LocalSearchInfo {
  int seed_index = 0;
  Vector start;
  Vector box_lower;
  Vector box_upper;
  int n_evals = 0;
  Termination termination = Termination::ScalesExhausted;
  double best_value = 0.0;
};

struct PhaseTiming {
  double design_seconds = 0.0;
  double gp_seconds = 0.0;
  double local_seconds = 0.0;
};

struct RunRecord {
  Mode mode = Mode::GpImfil;
  std::vector<EvaluatedSample> samples;
  Vector best_theta;
  double best_value = 0.0;
  std::vector<Vector> seeds_used;
  std::vector<LocalSearchInfo> local_searches;
  std::vector<RunEvent> events;
  nlohmann::json config_snapshot = nlohmann::json::object();
  std::uint64_t rng_seed = 0;
  bool aborted = false;
  std::string error;
  /// Wall-clock only; deliberately left out of to_json() so records stay
  /// byte-identical across reruns.
  PhaseTiming timing;

  /// Index (into samples) of the first sample attaining best_value.
  std::size_t best_position() const;
  /// Running minimum of the sample values.
  Vector best_so_far() const;
  /// Best value among the first n samples (all of them when n exceeds the count).
  double incumbent_at(std::size_t n) const;

  nlohmann::json to_json() const;
};

/// Design, GP iterations up to b_gp, seed selection and sub-box ImFil runs
/// until b_loc local evaluations are spent or the seeds run out. Each local
/// search is also capped by what is left of total_cap.
RunRecord run_gp_imfil(const Objective& objective, const SearchDomain& domain,
                       const BudgetPlan& budgets, const WeightPattern& pattern,
                       std::uint64_t rng_seed, const OrchestratorOptions& options = {});

/// The same design, then ImFil over the whole domain restarted from the
/// design points in ascending order of their value until the cap is spent.
RunRecord run_imfil_only(const Objective& objective, const SearchDomain& domain,
                         const BudgetPlan& budgets, std::uint64_t rng_seed,
                         const OrchestratorOptions& options = {});

/// GP iterations for the whole cap; no local phase.
RunRecord run_gp_only(const Objective& objective, const SearchDomain& domain,
                      const BudgetPlan& budgets, std::uint64_t rng_seed,
                      const OrchestratorOptions& options = {});

/// Dispatch on mode (the weight pattern is only used by GpImfil).
RunRecord run_mode(Mode mode, const Objective& objective, const SearchDomain& domain,
                   const BudgetPlan& budgets, const WeightPattern& pattern,
                   std::uint64_t rng_seed, const OrchestratorOptions& options = {});

}  // namespace nso
