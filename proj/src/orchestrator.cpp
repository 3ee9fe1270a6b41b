#include "nso/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

#include <fmt/core.h>

namespace nso {
namespace {

// Sub-seed streams.
constexpr std::uint64_t kDesignStream = 100;
constexpr std::uint64_t kFitStream = 101;
constexpr std::uint64_t kAcquireStream = 102;
constexpr std::uint64_t kFallbackStream = 103;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Local-search evaluations are keyed by (search, evaluation within search) so
// that their noise does not depend on how many samples came before.
std::uint64_t local_key(int search, int intra) {
  return (static_cast<std::uint64_t>(search + 1) << 32) | static_cast<std::uint32_t>(intra);
}

struct Abort {};

nlohmann::json snapshot(Mode mode, const BudgetPlan& b, const OrchestratorOptions& o,
                        const WeightPattern* pattern, std::uint64_t rng_seed) {
  const auto& k = o.kernel;
  const auto& a = o.acquisition;
  const auto& f = o.imfil;
  nlohmann::json j;
  j["mode"] = mode_name(mode);
  j["rng_seed"] = rng_seed;
  j["budgets"] = {{"n0", b.n0},           {"b_gp", b.b_gp},
                  {"b_loc", b.b_loc},     {"b_start", b.b_start},
                  {"local_half_width", b.local_half_width}, {"total_cap", b.total_cap}};
  j["kernel"] = {{"kind", k.has_nugget() ? "se+white" : "se"},
                 {"length_scale_bounds", {k.length_scale_bounds.first, k.length_scale_bounds.second}},
                 {"nugget_bounds", {k.nugget_bounds.first, k.nugget_bounds.second}},
                 {"restarts", k.restarts},
                 {"sweeps", k.sweeps},
                 {"search_radius", k.search_radius},
                 {"search_tolerance", k.search_tolerance}};
  j["acquisition"] = {{"candidates_per_dim", a.candidates_per_dim},
                      {"incumbent_perturbations", a.incumbent_perturbations},
                      {"perturbation_scale", a.perturbation_scale},
                      {"polish_starts", a.polish_starts},
                      {"polish_iterations", a.polish_iterations},
                      {"polish_initial_step", a.polish_initial_step}};
  j["imfil"] = {{"max_evals", f.max_evals},
                {"scales", f.scales},
                {"armijo_c", f.armijo_c},
                {"max_line_steps", f.max_line_steps}};
  j["orchestrator"] = {{"refit_all_until", o.refit_all_until},
                       {"refit_period", o.refit_period},
                       {"refit_fraction", o.refit_fraction},
                       {"late_refit_radius", o.late_refit_radius},
                       {"late_refit_restarts", o.late_refit_restarts},
                       {"stall_threshold", o.stall_threshold},
                       {"parallel_local", o.parallel_local},
                       {"unit_cube_seed_distances", o.unit_cube_seed_distances}};
  if (pattern) j["weight_pattern"] = pattern->weights;
  return j;
}

class Runner {
 public:
  Runner(const Objective& f, const SearchDomain& domain, const BudgetPlan& budgets,
         const OrchestratorOptions& options, std::uint64_t rng_seed, RunRecord& rec)
      : f_(f), domain_(domain), budgets_(budgets), opt_(options), seed_(rng_seed), rec_(rec) {}

  int used() const { return static_cast<int>(rec_.samples.size()); }
  int remaining() const { return budgets_.total_cap - used(); }

  double call(std::span<const double> theta, std::uint64_t key) const {
    double v = 0.0;
    try {
      v = f_(theta, key);
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("objective evaluation failed: {}", e.what()));
    }
    if (!std::isfinite(v)) throw std::runtime_error("objective returned a non-finite value");
    return v;
  }

  void append(EvaluatedSample s) {
    s.eval_index = used() + 1;
    rec_.samples.push_back(std::move(s));
  }

  void fail(const std::exception& e) {
    rec_.aborted = true;
    rec_.error = e.what();
    throw Abort{};
  }

  double evaluate(const Vector& theta, Phase phase) {
    double v = 0.0;
    try {
      v = call(theta, static_cast<std::uint64_t>(used() + 1));
    } catch (const std::exception& e) {
      fail(e);
    }
    append({theta, v, 0, phase, std::nullopt});
    return v;
  }

  void event(std::string kind, std::string message) {
    rec_.events.push_back({used(), std::move(kind), std::move(message)});
  }

  std::vector<Vector> design() {
    const auto t0 = Clock::now();
    const int n = std::min(budgets_.n0, budgets_.total_cap);
    auto points = latin_hypercube(domain_, static_cast<std::size_t>(n), mix_seed(seed_, kDesignStream));
    for (const auto& p : points) evaluate(p, Phase::InitDesign);
    rec_.timing.design_seconds += seconds_since(t0);
    return points;
  }

  void gp_phase(int target) {
    const auto t0 = Clock::now();
    std::optional<GpModel> model;
    std::optional<Vector> warm;
    double best = rec_.incumbent_at(rec_.samples.size());
    int stall = 0;
    int last_fit = 0;
    for (std::uint64_t iter = 0; used() < std::min(target, budgets_.total_cap); ++iter) {
      const int k = used();
      std::vector<Vector> xs;
      Vector ys;
      xs.reserve(rec_.samples.size());
      for (const auto& s : rec_.samples) {
        xs.push_back(s.theta);
        ys.push_back(s.value);
      }

      Vector theta;
      try {
        const int period = std::max(
            opt_.refit_period, static_cast<int>(opt_.refit_fraction * static_cast<double>(k)));
        const bool full_fit = !model || k <= opt_.refit_all_until || k - last_fit >= period;
        if (full_fit) last_fit = k;
        if (full_fit) {
          KernelSpec spec = opt_.kernel;
          if (k > opt_.refit_all_until && warm) {
            spec.restarts = opt_.late_refit_restarts;
            spec.sweeps = 1;
            spec.search_radius = std::min(spec.search_radius, opt_.late_refit_radius);
          }
          FitOptions fo;
          fo.input_box = domain_;
          fo.warm_start = warm;
          model = GpModel::fit(xs, ys, spec, mix_seed(seed_, kFitStream, iter), fo);
        } else {
          model = GpModel::condition(xs, ys, *model);
        }
        warm = model->log_params();
        const auto acq =
            maximize_ei(*model, domain_, best, mix_seed(seed_, kAcquireStream, iter), opt_.acquisition);
        if (acq.saturated) event("ei_saturated", "all candidates had zero EI; took farthest point");
        theta = acq.theta_new;
      } catch (const std::runtime_error& e) {
        event("gp_fit_failed", fmt::format("{}; falling back to exploration", e.what()));
        model.reset();
        const auto cands = latin_hypercube(
            domain_, static_cast<std::size_t>(std::max(1, opt_.acquisition.candidates_per_dim)) *
                         domain_.dim(),
            mix_seed(seed_, kFallbackStream, iter));
        theta = farthest_candidate(cands, xs, domain_);
      }

      const double v = evaluate(theta, Phase::GpIteration);
      if (v < best) {
        best = v;
        stall = 0;
      } else if (opt_.stall_threshold > 0 && ++stall >= opt_.stall_threshold) {
        event("gp_stalled", fmt::format("{} iterations without improvement", stall));
        break;
      }
    }
    rec_.timing.gp_seconds += seconds_since(t0);
  }

  struct Local {
    LocalResult result;
    std::vector<EvaluatedSample> samples;
    std::optional<std::string> error;
  };

  // Runs one ImFil search; its samples go to `sink` (the record itself in the
  // sequential case) as they are produced.
  LocalResult local_search(int search, const SearchDomain& box, const Vector& start, int budget,
                           std::vector<EvaluatedSample>& sink, bool renumber) {
    ImfilConfig cfg = opt_.imfil;
    cfg.max_evals = budget;
    int intra = 0;
    const LocalObjective obj = [&](std::span<const double> theta) {
      const double v = call(theta, local_key(search, intra++));
      EvaluatedSample s{Vector(theta.begin(), theta.end()), v, 0, Phase::LocalSearch, search};
      if (renumber) {
        append(std::move(s));
      } else {
        s.eval_index = static_cast<std::int64_t>(sink.size()) + 1;
        sink.push_back(std::move(s));
      }
      return v;
    };
    return imfil_minimize(obj, box, start, cfg);
  }

  void record_local(int search, const SearchDomain& box, const Vector& start,
                    const LocalResult& r) {
    rec_.local_searches.push_back({search, start, box.lower(), box.upper(), r.n_evals,
                                   r.termination, r.best_value});
  }

  void warn_boundary(int search, const Vector& seed) {
    for (std::size_t j = 0; j < seed.size(); ++j) {
      if (seed[j] - domain_.lower()[j] < budgets_.local_half_width ||
          domain_.upper()[j] - seed[j] < budgets_.local_half_width) {
        event("boundary_seed",
              fmt::format("seed {} lies within {} of the domain boundary in coordinate {}", search,
                          budgets_.local_half_width, j));
        return;
      }
    }
  }

  // Sequential local phase; boxes are sub-boxes around each seed unless
  // full_domain is set.
  void local_phase(const std::vector<Vector>& seeds, bool full_domain, int local_budget) {
    const auto t0 = Clock::now();
    int spent = 0;
    for (std::size_t ctr = 0; ctr < seeds.size(); ++ctr) {
      if (spent >= local_budget || remaining() <= 0) break;
      const int search = static_cast<int>(ctr);
      const SearchDomain box =
          full_domain ? domain_ : sub_box(seeds[ctr], budgets_.local_half_width, domain_);
      const Vector start = clip_to_domain(seeds[ctr], box);
      if (!full_domain) warn_boundary(search, start);
      const int budget = std::min(opt_.imfil.max_evals, remaining());
      std::vector<EvaluatedSample> unused;
      LocalResult r;
      try {
        r = local_search(search, box, start, budget, unused, true);
      } catch (const std::exception& e) {
        fail(e);
      }
      rec_.seeds_used.push_back(start);
      record_local(search, box, start, r);
      spent += r.n_evals;
    }
    rec_.timing.local_seconds += seconds_since(t0);
  }

  // Concurrent variant: every search gets an equal share of the remaining cap;
  // results are merged in seed order under the same b_loc guard.
  void local_phase_parallel(const std::vector<Vector>& seeds, int local_budget) {
    const auto t0 = Clock::now();
    const int n = static_cast<int>(seeds.size());
    if (n == 0 || remaining() <= 0 || local_budget <= 0) return;
    const int share = std::max(1, std::min(opt_.imfil.max_evals, remaining() / n));
    std::vector<Local> out(static_cast<std::size_t>(n));
    std::vector<SearchDomain> boxes;
    std::vector<Vector> starts;
    for (int i = 0; i < n; ++i) {
      boxes.push_back(sub_box(seeds[i], budgets_.local_half_width, domain_));
      starts.push_back(clip_to_domain(seeds[i], boxes.back()));
    }
    std::atomic<int> next{0};
    const auto worker = [&] {
      for (int i = next++; i < n; i = next++) {
        auto& slot = out[static_cast<std::size_t>(i)];
        try {
          slot.result = local_search(i, boxes[i], starts[i], share, slot.samples, false);
        } catch (const std::exception& e) {
          slot.error = e.what();
        }
      }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < std::min<unsigned>(hw, static_cast<unsigned>(n)); ++t) {
      pool.emplace_back(worker);
    }
    pool.clear();  // joins

    int spent = 0;
    for (int i = 0; i < n; ++i) {
      auto& slot = out[static_cast<std::size_t>(i)];
      if (spent >= local_budget || slot.samples.size() > static_cast<std::size_t>(remaining())) {
        event("local_search_discarded", fmt::format("search {} exceeded the local budget", i));
        continue;
      }
      warn_boundary(i, starts[i]);
      for (auto& s : slot.samples) append(std::move(s));
      if (slot.error) fail(std::runtime_error(*slot.error));
      rec_.seeds_used.push_back(starts[i]);
      record_local(i, boxes[i], starts[i], slot.result);
      spent += slot.result.n_evals;
    }
    rec_.timing.local_seconds += seconds_since(t0);
  }

  void finish() {
    if (rec_.samples.empty()) return;
    const std::size_t b = rec_.best_position();
    rec_.best_theta = rec_.samples[b].theta;
    rec_.best_value = rec_.samples[b].value;
  }

 private:
  const Objective& f_;
  const SearchDomain& domain_;
  const BudgetPlan& budgets_;
  const OrchestratorOptions& opt_;
  std::uint64_t seed_;
  RunRecord& rec_;
};

RunRecord start_record(Mode mode, const BudgetPlan& budgets, const OrchestratorOptions& options,
                       const WeightPattern* pattern, std::uint64_t rng_seed) {
  budgets.validate();
  options.kernel.validate();
  options.imfil.validate();
  RunRecord rec;
  rec.mode = mode;
  rec.rng_seed = rng_seed;
  rec.config_snapshot = snapshot(mode, budgets, options, pattern, rng_seed);
  return rec;
}

}  // namespace

RunRecord run_gp_imfil(const Objective& objective, const SearchDomain& domain,
                       const BudgetPlan& budgets, const WeightPattern& pattern,
                       std::uint64_t rng_seed, const OrchestratorOptions& options) {
  pattern.validate();
  if (pattern.weights.size() + 1 < static_cast<std::size_t>(budgets.b_start)) {
    throw std::invalid_argument(fmt::format("weight pattern has {} entries but b_start is {}",
                                            pattern.weights.size(), budgets.b_start));
  }
  RunRecord rec = start_record(Mode::GpImfil, budgets, options, &pattern, rng_seed);
  Runner run(objective, domain, budgets, options, rng_seed, rec);
  try {
    run.design();
    run.gp_phase(budgets.b_gp);
    if (budgets.b_loc > 0 && run.remaining() > 0) {
      SeedSelectOptions so;
      if (options.unit_cube_seed_distances) so.unit_cube_box = domain;
      const int b_start = std::min<int>(budgets.b_start, static_cast<int>(rec.samples.size()));
      std::vector<Vector> seeds;
      for (std::size_t idx : select_starts(rec.samples, pattern, b_start, so)) {
        seeds.push_back(rec.samples[idx].theta);
      }
      if (options.parallel_local) {
        run.local_phase_parallel(seeds, budgets.b_loc);
      } else {
        run.local_phase(seeds, false, budgets.b_loc);
      }
    }
  } catch (const Abort&) {
  }
  run.finish();
  return rec;
}

RunRecord run_imfil_only(const Objective& objective, const SearchDomain& domain,
                         const BudgetPlan& budgets, std::uint64_t rng_seed,
                         const OrchestratorOptions& options) {
  RunRecord rec = start_record(Mode::ImfilOnly, budgets, options, nullptr, rng_seed);
  Runner run(objective, domain, budgets, options, rng_seed, rec);
  try {
    const auto points = run.design();
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return rec.samples[a].value < rec.samples[b].value;
    });
    std::vector<Vector> seeds;
    for (std::size_t i : order) seeds.push_back(points[i]);
    run.local_phase(seeds, true, std::numeric_limits<int>::max());
  } catch (const Abort&) {
  }
  run.finish();
  return rec;
}

RunRecord run_gp_only(const Objective& objective, const SearchDomain& domain,
                      const BudgetPlan& budgets, std::uint64_t rng_seed,
                      const OrchestratorOptions& options) {
  RunRecord rec = start_record(Mode::GpOnly, budgets, options, nullptr, rng_seed);
  Runner run(objective, domain, budgets, options, rng_seed, rec);
  try {
    run.design();
    run.gp_phase(budgets.total_cap);
  } catch (const Abort&) {
  }
  run.finish();
  return rec;
}

RunRecord run_mode(Mode mode, const Objective& objective, const SearchDomain& domain,
                   const BudgetPlan& budgets, const WeightPattern& pattern,
                   std::uint64_t rng_seed, const OrchestratorOptions& options) {
  switch (mode) {
    case Mode::GpImfil:
      return run_gp_imfil(objective, domain, budgets, pattern, rng_seed, options);
    case Mode::ImfilOnly:
      return run_imfil_only(objective, domain, budgets, rng_seed, options);
    case Mode::GpOnly:
      return run_gp_only(objective, domain, budgets, rng_seed, options);
  }
  throw std::invalid_argument("run_mode: unknown mode");
}

}  // namespace nso
