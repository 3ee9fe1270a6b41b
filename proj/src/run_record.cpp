#include <algorithm>
#include <limits>
#include <stdexcept>

#include <fmt/core.h>

#include "nso/orchestrator.hpp"

namespace nso {

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::GpImfil:
      return "GpImfil";
    case Mode::ImfilOnly:
      return "ImfilOnly";
    case Mode::GpOnly:
      return "GpOnly";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::GpImfil, Mode::ImfilOnly, Mode::GpOnly}) {
    if (name == mode_name(m)) return m;
  }
  throw std::invalid_argument(
      fmt::format("unknown mode '{}' (expected GpImfil, ImfilOnly or GpOnly)", name));
}

BudgetPlan BudgetPlan::paper_protocol(std::size_t d, int total_cap, double local_half_width) {
  BudgetPlan b;
  const int dp1 = static_cast<int>(d) + 1;
  b.n0 = std::min(2 * dp1, total_cap);
  b.b_gp = std::min(b.n0 + 8 * dp1, total_cap);
  b.b_loc = total_cap - b.b_gp;
  b.b_start = 10;
  b.local_half_width = local_half_width;
  b.total_cap = total_cap;
  return b;
}

void BudgetPlan::validate() const {
  if (n0 < 1) throw std::invalid_argument("budgets: n0 must be positive");
  if (total_cap < 1) throw std::invalid_argument("budgets: total_cap must be positive");
  if (b_gp < n0 || b_gp > total_cap) {
    throw std::invalid_argument(
        fmt::format("budgets: need n0 <= b_gp <= total_cap (got {}, {}, {})", n0, b_gp, total_cap));
  }
  if (b_loc < 0 || b_gp + b_loc > total_cap) {
    throw std::invalid_argument(fmt::format(
        "budgets: need 0 <= b_loc and b_gp + b_loc <= total_cap (got {}, {}, {})", b_loc, b_gp,
        total_cap));
  }
  if (b_start < 1) throw std::invalid_argument("budgets: b_start must be positive");
  if (!(local_half_width > 0.0)) {
    throw std::invalid_argument("budgets: local_half_width must be positive");
  }
}

std::size_t RunRecord::best_position() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].value < samples[best].value) best = i;
  }
  return best;
}

Vector RunRecord::best_so_far() const {
  Vector out(samples.size());
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    running = std::min(running, samples[i].value);
    out[i] = running;
  }
  return out;
}

double RunRecord::incumbent_at(std::size_t n) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < std::min(n, samples.size()); ++i) {
    best = std::min(best, samples[i].value);
  }
  return best;
}

nlohmann::json RunRecord::to_json() const {
  using nlohmann::json;
  json j;
  j["mode"] = mode_name(mode);
  j["rng_seed"] = rng_seed;
  j["status"] = aborted ? "aborted" : "completed";
  if (aborted) j["error"] = error;
  j["best_value"] = best_value;
  j["best_theta"] = best_theta;
  j["n_samples"] = samples.size();
  j["seeds_used"] = seeds_used;

  json locals = json::array();
  for (const auto& l : local_searches) {
    locals.push_back({{"seed_index", l.seed_index},
                      {"start", l.start},
                      {"box_lower", l.box_lower},
                      {"box_upper", l.box_upper},
                      {"n_evals", l.n_evals},
                      {"termination", termination_name(l.termination)},
                      {"best_value", l.best_value}});
  }
  j["local_searches"] = std::move(locals);

  json ev = json::array();
  for (const auto& e : events) {
    ev.push_back({{"eval_index", e.eval_index}, {"kind", e.kind}, {"message", e.message}});
  }
  j["events"] = std::move(ev);
  j["config"] = config_snapshot;

  json s = json::array();
  for (const auto& smp : samples) {
    json row = {{"eval_index", smp.eval_index},
                {"theta", smp.theta},
                {"value", smp.value},
                {"phase", phase_name(smp.phase)}};
    row["seed_index"] = smp.seed_index ? json(*smp.seed_index) : json(nullptr);
    s.push_back(std::move(row));
  }
  j["samples"] = std::move(s);
  return j;
}

}  // namespace nso
