#include "nso/bench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include <fmt/core.h>

#include "nso/imfil.hpp"
#include "nso/objectives/registry.hpp"

namespace nso::bench {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

fs::path with_partial(fs::path p, bool partial) {
  if (partial) p += ".partial";
  return p;
}

// Runs jobs 0..n-1 on up to worker_count(n) threads; rethrows the exception
// of the lowest failing job after all workers finish.
template <class F>
void fan_out(int n, F&& job) {
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n));
  const auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        failures[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int workers = worker_count(n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

std::string summary_csv(const std::vector<SummaryRow>& rows, bool with_rank) {
  std::string out = with_rank ? "rank," : "";
  out += "problem_id,mode,mean_best,std_best,mean_evals_to_best,trials\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (with_rank) out += fmt::format("{},", i + 1);
    out += fmt::format("{},{},{},{},{},{}\n", r.problem_id, mode_name(r.mode), r.mean_best,
                       r.std_best, r.mean_evals_to_best, r.trials);
  }
  return out;
}

std::string file_stem(const ExperimentConfig& c, Mode mode) {
  return fmt::format("{}_{}", c.problem_id, mode_name(mode));
}

}  // namespace

int worker_count(int jobs) {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("NOISY_SEED_OPT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<int>(std::min<long>(v, 1024));
  }
  return std::max(1, std::min(n, jobs));
}

SummaryRow summarize(const std::string& problem_id, Mode mode,
                     const std::vector<RunRecord>& records) {
  SummaryRow row;
  row.problem_id = problem_id;
  row.mode = mode;
  row.trials = static_cast<int>(records.size());
  if (records.empty()) return row;
  const double n = static_cast<double>(records.size());
  double sum = 0.0;
  double evals = 0.0;
  for (const auto& r : records) {
    sum += r.best_value;
    evals += static_cast<double>(r.best_position() + 1);
  }
  row.mean_best = sum / n;
  double var = 0.0;
  for (const auto& r : records) var += (r.best_value - row.mean_best) * (r.best_value - row.mean_best);
  row.std_best = std::sqrt(var / n);
  row.mean_evals_to_best = evals / n;
  return row;
}

std::string trace_csv(const RunRecord& record) {
  const std::size_t d = record.samples.empty() ? 0 : record.samples.front().theta.size();
  std::string out = "eval_index";
  for (std::size_t j = 0; j < d; ++j) out += fmt::format(",theta_{}", j);
  out += ",value,best_so_far,phase,seed_index\n";
  const Vector best = record.best_so_far();
  for (std::size_t i = 0; i < record.samples.size(); ++i) {
    const auto& s = record.samples[i];
    out += fmt::format("{}", s.eval_index);
    for (double x : s.theta) out += fmt::format(",{}", x);
    out += fmt::format(",{},{},{},", s.value, best[i], phase_name(s.phase));
    if (s.seed_index) out += fmt::format("{}", *s.seed_index);
    out += '\n';
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool write) {
  const Problem problem = make_problem(config.problem_id);
  ExperimentResult result;
  result.records.resize(static_cast<std::size_t>(config.trials));
  std::vector<std::string> errors(static_cast<std::size_t>(config.trials));

  fan_out(config.trials, [&](int trial) {
    const std::uint64_t seed = config.rng_seed_base + static_cast<std::uint64_t>(trial);
    auto& rec = result.records[static_cast<std::size_t>(trial)];
    try {
      const Objective f = problem.objective(config.noise, seed);
      BudgetPlan budgets = config.budgets;
      if (config.mode == Mode::GpOnly) {
        budgets.b_gp = budgets.total_cap;
        budgets.b_loc = 0;
      }
      rec = run_mode(config.mode, f, problem.domain, budgets, config.pattern, seed, config.options);
      rec.config_snapshot["experiment"] = config.to_json();
      rec.config_snapshot["experiment"]["trial"] = trial;
      if (rec.aborted) errors[static_cast<std::size_t>(trial)] = rec.error;
      if (write) {
        const fs::path base = config.output_dir / fmt::format("{}_trial{}", file_stem(config, config.mode), trial);
        write_file(with_partial(fs::path(base) += ".csv", rec.aborted), trace_csv(rec));
        write_file(with_partial(fs::path(base) += ".json", rec.aborted), rec.to_json().dump(2) + "\n");
        const nlohmann::json timing = {{"design_seconds", rec.timing.design_seconds},
                                       {"gp_seconds", rec.timing.gp_seconds},
                                       {"local_seconds", rec.timing.local_seconds}};
        write_file(fs::path(base) += "_timing.json", timing.dump(2) + "\n");
      }
    } catch (const std::exception& e) {
      rec.aborted = true;
      errors[static_cast<std::size_t>(trial)] = e.what();
    }
  });

  for (int t = 0; t < config.trials; ++t) {
    if (!errors[static_cast<std::size_t>(t)].empty()) {
      result.error = fmt::format("trial {}: {}", t, errors[static_cast<std::size_t>(t)]);
      break;
    }
  }
  result.summary = summarize(config.problem_id, config.mode, result.records);
  if (write) {
    write_file(with_partial(config.output_dir / (file_stem(config, config.mode) + "_summary.csv"),
                            result.error.has_value()),
               summary_csv({result.summary}, false));
  }
  return result;
}

ComparisonResult compare(const ExperimentConfig& config, bool write) {
  if (config.modes.empty()) throw ConfigError("compare needs at least one mode");
  ComparisonResult out;
  std::string progress = "mode,trial,eval_index,best_so_far\n";
  for (Mode m : config.modes) {
    ExperimentConfig c = config;
    c.mode = m;
    out.per_mode.push_back(run_experiment(c, write));
    const auto& res = out.per_mode.back();
    if (res.error && !out.error) out.error = fmt::format("{}: {}", mode_name(m), *res.error);
    for (std::size_t t = 0; t < res.records.size(); ++t) {
      const auto& rec = res.records[t];
      const Vector best = rec.best_so_far();
      for (std::size_t i = 0; i < rec.samples.size(); ++i) {
        progress += fmt::format("{},{},{},{}\n", mode_name(m), t, rec.samples[i].eval_index, best[i]);
      }
    }
  }
  std::vector<std::size_t> order(out.per_mode.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.per_mode[a].summary.mean_best < out.per_mode[b].summary.mean_best;
  });
  for (std::size_t i : order) out.ranking.push_back(out.per_mode[i].summary);
  if (write) {
    const bool partial = out.error.has_value();
    write_file(with_partial(config.output_dir / (config.problem_id + "_progress.csv"), partial), progress);
    write_file(with_partial(config.output_dir / (config.problem_id + "_ranking.csv"), partial),
               summary_csv(out.ranking, true));
  }
  return out;
}

SeedingReport seeding_study(const ExperimentConfig& config, bool write) {
  const Problem problem = make_problem(config.problem_id);
  if (!problem.reference_min) {
    throw ConfigError(fmt::format("problem '{}' has no known global minimum", config.problem_id));
  }
  const SeedingSettings& s = config.seeding;
  SeedingReport rep;
  rep.problem_id = config.problem_id;
  rep.reference_min = *problem.reference_min;
  const Objective f = problem.objective(std::nullopt, 0);
  const SearchDomain& dom = problem.domain;

  BudgetPlan budgets = BudgetPlan::paper_protocol(problem.dim(), 1, s.local_half_width);
  budgets.n0 = config.budgets.n0;
  budgets.b_gp = config.budgets.b_gp;
  budgets.b_start = s.b_start;
  budgets.b_loc = s.b_start * config.options.imfil.max_evals;
  budgets.total_cap = budgets.b_gp + budgets.b_loc;
  const WeightPattern pattern =
      config.pattern.weights.size() + 1 >= static_cast<std::size_t>(s.b_start)
          ? config.pattern
          : WeightPattern::cycling(s.b_start);

  const auto near_boundary = [&](const Vector& p) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p[j] - dom.lower()[j] < s.local_half_width || dom.upper()[j] - p[j] < s.local_half_width) {
        return true;
      }
    }
    return false;
  };

  rep.multistart.resize(static_cast<std::size_t>(s.repetitions));
  rep.baseline.resize(static_cast<std::size_t>(s.repetitions));
  std::vector<std::string> errors(static_cast<std::size_t>(s.repetitions));
  fan_out(s.repetitions, [&](int r) {
    const std::uint64_t seed = config.rng_seed_base + static_cast<std::uint64_t>(r);
    const RunRecord rec = run_gp_imfil(f, dom, budgets, pattern, seed, config.options);
    if (rec.aborted) {
      errors[static_cast<std::size_t>(r)] = rec.error;
      return;
    }
    SeedingRun& m = rep.multistart[static_cast<std::size_t>(r)];
    m.repetition = r;
    m.best_value = rec.best_value;
    m.evals = static_cast<int>(rec.samples.size());
    m.success = rec.best_value <= rep.reference_min + s.tolerance;
    m.seeds = rec.seeds_used;
    m.boundary_seed = std::any_of(m.seeds.begin(), m.seeds.end(), near_boundary);

    const Vector center = dom.center();
    const LocalResult lr = imfil_minimize(
        [&](std::span<const double> x) { return f(x, 0); }, dom, center, config.options.imfil);
    SeedingRun& b = rep.baseline[static_cast<std::size_t>(r)];
    b.repetition = r;
    b.best_value = lr.best_value;
    b.evals = lr.n_evals;
    b.success = lr.best_value <= rep.reference_min + s.tolerance;
    b.seeds = {center};
    b.boundary_seed = near_boundary(center);
  });

  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error(fmt::format("seeding run aborted: {}", e));
  }

  const auto summarize_runs = [](std::string name, const std::vector<SeedingRun>& runs) {
    SeedingMethodSummary sm;
    sm.method = std::move(name);
    for (const auto& r : runs) {
      sm.mean_result += r.best_value;
      sm.mean_evals += r.evals;
      sm.success_rate += r.success ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(runs.size());
    sm.mean_result /= n;
    sm.mean_evals /= n;
    sm.success_rate /= n;
    return sm;
  };
  rep.multistart_summary = summarize_runs("GpImfil", rep.multistart);
  rep.baseline_summary = summarize_runs("ImfilOnly-center", rep.baseline);

  if (write) {
    std::string runs = "method,repetition,best_value,evals,success,boundary_seed\n";
    for (const auto* set : {&rep.multistart, &rep.baseline}) {
      const std::string& name =
          set == &rep.multistart ? rep.multistart_summary.method : rep.baseline_summary.method;
      for (const auto& r : *set) {
        runs += fmt::format("{},{},{},{},{},{}\n", name, r.repetition, r.best_value, r.evals,
                            r.success ? 1 : 0, r.boundary_seed ? 1 : 0);
      }
    }
    std::string summary = "method,result,iters,rate\n";
    for (const auto* sm : {&rep.multistart_summary, &rep.baseline_summary}) {
      summary += fmt::format("{},{},{},{}\n", sm->method, sm->mean_result, sm->mean_evals,
                             sm->success_rate);
    }
    write_file(config.output_dir / (config.problem_id + "_seeding_runs.csv"), runs);
    write_file(config.output_dir / (config.problem_id + "_seeding_summary.csv"), summary);
  }
  return rep;
}

}  // namespace nso::bench
