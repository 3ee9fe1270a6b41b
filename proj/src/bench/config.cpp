#include "nso/bench/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>
#include <fmt/ranges.h>
#include <toml.hpp>

#include "nso/objectives/registry.hpp"

namespace nso::bench {
namespace {

void check_keys(const toml::table& t, std::string_view section,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, node] : t) {
    if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
      throw ConfigError(fmt::format("unknown key '{}' in [{}]", key.str(),
                                    section.empty() ? "top level" : section));
    }
  }
}

const toml::table* section(const toml::table& root, std::string_view name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(fmt::format("'{}' must be a table", name));
  return n->as_table();
}

std::optional<std::int64_t> get_int(const toml::table* t, std::string_view key) {
  if (!t) return std::nullopt;
  const toml::node* n = t->get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value_exact<std::int64_t>()) return v;
  throw ConfigError(fmt::format("'{}' must be an integer", key));
}

std::optional<double> get_double(const toml::table* t, std::string_view key) {
  if (!t) return std::nullopt;
  const toml::node* n = t->get(key);
  if (!n) return std::nullopt;
  if (n->is_floating_point() || n->is_integer()) return n->value<double>();
  throw ConfigError(fmt::format("'{}' must be a number", key));
}

std::optional<bool> get_bool(const toml::table* t, std::string_view key) {
  if (!t) return std::nullopt;
  const toml::node* n = t->get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value_exact<bool>()) return v;
  throw ConfigError(fmt::format("'{}' must be a boolean", key));
}

std::optional<std::string> get_string(const toml::table* t, std::string_view key) {
  if (!t) return std::nullopt;
  const toml::node* n = t->get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value_exact<std::string>()) return v;
  throw ConfigError(fmt::format("'{}' must be a string", key));
}

std::optional<Vector> get_doubles(const toml::table* t, std::string_view key) {
  if (!t) return std::nullopt;
  const toml::node* n = t->get(key);
  if (!n) return std::nullopt;
  const toml::array* arr = n->as_array();
  if (!arr) throw ConfigError(fmt::format("'{}' must be an array of numbers", key));
  Vector out;
  for (const auto& el : *arr) {
    if (!(el.is_floating_point() || el.is_integer())) {
      throw ConfigError(fmt::format("'{}' must be an array of numbers", key));
    }
    out.push_back(*el.value<double>());
  }
  return out;
}

std::pair<double, double> get_bounds(const toml::table* t, std::string_view key,
                                     std::pair<double, double> fallback) {
  const auto v = get_doubles(t, key);
  if (!v) return fallback;
  if (v->size() != 2) throw ConfigError(fmt::format("'{}' must hold two numbers", key));
  return {(*v)[0], (*v)[1]};
}

int to_int(std::int64_t v, std::string_view key) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(fmt::format("'{}' is out of range", key));
  }
  return static_cast<int>(v);
}

Mode mode_from(const std::string& name) {
  try {
    return parse_mode(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["problem"] = problem_id;
  j["mode"] = mode_name(mode);
  std::vector<std::string> names;
  for (Mode m : modes) names.emplace_back(mode_name(m));
  j["modes"] = names;
  j["trials"] = trials;
  j["seed"] = rng_seed_base;
  j["output_dir"] = output_dir.generic_string();
  if (noise) {
    j["noise"] = {{"enabled", true},
                  {"shots", noise->shots ? nlohmann::json(*noise->shots) : nlohmann::json("infinite")},
                  {"misclass", noise->misclass}};
  } else {
    j["noise"] = {{"enabled", false}};
  }
  j["seeding"] = {{"repetitions", seeding.repetitions},
                  {"b_start", seeding.b_start},
                  {"local_half_width", seeding.local_half_width},
                  {"tolerance", seeding.tolerance}};
  return j;
}

ExperimentConfig resolve_config(const std::string& toml_text, const Overrides& ov) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error: " << e.description() << " at " << e.source().begin;
    throw ConfigError(msg.str());
  }
  check_keys(root, "",
             {"problem", "mode", "modes", "trials", "seed", "output_dir", "budgets", "noise",
              "weights", "kernel", "imfil", "acquisition", "orchestrator", "seeding"});

  ExperimentConfig cfg;
  if (auto v = get_string(&root, "problem")) cfg.problem_id = *v;
  if (auto v = get_string(&root, "mode")) cfg.mode = mode_from(*v);
  if (const toml::node* n = root.get("modes")) {
    const toml::array* arr = n->as_array();
    if (!arr || arr->empty()) throw ConfigError("'modes' must be a non-empty array of strings");
    cfg.modes.clear();
    for (const auto& el : *arr) {
      auto s = el.value_exact<std::string>();
      if (!s) throw ConfigError("'modes' must be a non-empty array of strings");
      cfg.modes.push_back(mode_from(*s));
    }
  }
  if (auto v = get_int(&root, "trials")) cfg.trials = to_int(*v, "trials");
  if (auto v = get_int(&root, "seed")) {
    if (*v < 0) throw ConfigError("'seed' must be nonnegative");
    cfg.rng_seed_base = static_cast<std::uint64_t>(*v);
  }
  if (auto v = get_string(&root, "output_dir")) cfg.output_dir = *v;

  if (ov.problem) cfg.problem_id = *ov.problem;
  if (ov.mode) cfg.mode = mode_from(*ov.mode);
  if (ov.trials) cfg.trials = *ov.trials;
  if (ov.seed) cfg.rng_seed_base = *ov.seed;
  if (ov.out) cfg.output_dir = *ov.out;
  if (cfg.trials < 1) throw ConfigError("trials must be at least 1");

  std::optional<Problem> problem;
  try {
    problem = make_problem(cfg.problem_id);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  // Budgets: protocol defaults for the problem's dimension, then explicit keys.
  const toml::table* b = section(root, "budgets");
  if (b) check_keys(*b, "budgets", {"total_cap", "n0", "b_gp", "b_loc", "b_start", "local_half_width"});
  int cap = 1000;
  if (auto v = get_int(b, "total_cap")) cap = to_int(*v, "total_cap");
  if (ov.cap) cap = *ov.cap;
  if (cap < 1) throw ConfigError("total_cap must be positive");
  BudgetPlan plan = BudgetPlan::paper_protocol(problem->dim(), cap, problem->local_half_width);
  if (auto v = get_int(b, "n0")) plan.n0 = to_int(*v, "n0");
  if (auto v = get_int(b, "b_gp")) {
    plan.b_gp = to_int(*v, "b_gp");
  } else {
    plan.b_gp = std::max(plan.b_gp, std::min(plan.n0, cap));
  }
  if (auto v = get_int(b, "b_loc")) {
    plan.b_loc = to_int(*v, "b_loc");
  } else {
    plan.b_loc = std::max(0, cap - plan.b_gp);
  }
  if (auto v = get_int(b, "b_start")) plan.b_start = to_int(*v, "b_start");
  if (auto v = get_double(b, "local_half_width")) plan.local_half_width = *v;
  try {
    plan.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  cfg.budgets = plan;

  // Noise: the problem's default unless the file says otherwise.
  cfg.noise = problem->noise;
  if (const toml::table* n = section(root, "noise")) {
    check_keys(*n, "noise", {"enabled", "shots", "misclass"});
    const bool enabled = get_bool(n, "enabled").value_or(true);
    if (!enabled) {
      cfg.noise.reset();
    } else {
      NoiseSpec ns = cfg.noise.value_or(NoiseSpec{});
      if (const toml::node* s = n->get("shots")) {
        if (auto str = s->value_exact<std::string>(); str && *str == "infinite") {
          ns.shots.reset();
        } else if (auto i = s->value_exact<std::int64_t>()) {
          ns.shots = to_int(*i, "shots");
        } else {
          throw ConfigError("'shots' must be an integer or \"infinite\"");
        }
      }
      if (auto v = get_double(n, "misclass")) ns.misclass = *v;
      try {
        ns.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      cfg.noise = ns;
    }
  }

  const toml::table* w = section(root, "weights");
  if (w) check_keys(*w, "weights", {"pattern"});
  if (auto v = get_doubles(w, "pattern")) {
    cfg.pattern.weights = *v;
  } else {
    cfg.pattern = WeightPattern::cycling(plan.b_start);
  }

  KernelSpec& k = cfg.options.kernel;
  if (const toml::table* t = section(root, "kernel")) {
    check_keys(*t, "kernel", {"kind", "length_scale_bounds", "nugget_bounds", "restarts", "sweeps",
                              "search_radius", "search_tolerance"});
    if (auto v = get_string(t, "kind")) {
      if (*v == "se") {
        k.kind = KernelKind::SquaredExponential;
      } else if (*v == "se+white") {
        k.kind = KernelKind::SquaredExponentialPlusWhiteNoise;
      } else {
        throw ConfigError(fmt::format("kernel kind '{}' (expected \"se\" or \"se+white\")", *v));
      }
    }
    k.length_scale_bounds = get_bounds(t, "length_scale_bounds", k.length_scale_bounds);
    k.nugget_bounds = get_bounds(t, "nugget_bounds", k.nugget_bounds);
    if (auto v = get_int(t, "restarts")) k.restarts = to_int(*v, "restarts");
    if (auto v = get_int(t, "sweeps")) k.sweeps = to_int(*v, "sweeps");
    if (auto v = get_double(t, "search_radius")) k.search_radius = *v;
    if (auto v = get_double(t, "search_tolerance")) k.search_tolerance = *v;
  }

  ImfilConfig& im = cfg.options.imfil;
  if (const toml::table* t = section(root, "imfil")) {
    check_keys(*t, "imfil", {"max_evals", "scales", "armijo_c", "max_line_steps"});
    if (auto v = get_int(t, "max_evals")) im.max_evals = to_int(*v, "max_evals");
    if (auto v = get_doubles(t, "scales")) im.scales = *v;
    if (auto v = get_double(t, "armijo_c")) im.armijo_c = *v;
    if (auto v = get_int(t, "max_line_steps")) im.max_line_steps = to_int(*v, "max_line_steps");
  }

  AcquisitionOptions& ac = cfg.options.acquisition;
  if (const toml::table* t = section(root, "acquisition")) {
    check_keys(*t, "acquisition", {"candidates_per_dim", "incumbent_perturbations",
                                   "perturbation_scale", "polish_starts", "polish_iterations",
                                   "polish_initial_step"});
    if (auto v = get_int(t, "candidates_per_dim")) ac.candidates_per_dim = to_int(*v, "candidates_per_dim");
    if (auto v = get_int(t, "incumbent_perturbations")) {
      ac.incumbent_perturbations = to_int(*v, "incumbent_perturbations");
    }
    if (auto v = get_double(t, "perturbation_scale")) ac.perturbation_scale = *v;
    if (auto v = get_int(t, "polish_starts")) ac.polish_starts = to_int(*v, "polish_starts");
    if (auto v = get_int(t, "polish_iterations")) ac.polish_iterations = to_int(*v, "polish_iterations");
    if (auto v = get_double(t, "polish_initial_step")) ac.polish_initial_step = *v;
  }

  OrchestratorOptions& o = cfg.options;
  if (const toml::table* t = section(root, "orchestrator")) {
    check_keys(*t, "orchestrator", {"refit_all_until", "refit_period", "refit_fraction", "late_refit_radius", "late_refit_restarts",
                                    "stall_threshold", "parallel_local", "unit_cube_seed_distances"});
    if (auto v = get_int(t, "refit_all_until")) o.refit_all_until = to_int(*v, "refit_all_until");
    if (auto v = get_int(t, "refit_period")) o.refit_period = to_int(*v, "refit_period");
    if (auto v = get_double(t, "refit_fraction")) o.refit_fraction = *v;
    if (auto v = get_double(t, "late_refit_radius")) o.late_refit_radius = *v;
    if (auto v = get_int(t, "late_refit_restarts")) {
      o.late_refit_restarts = to_int(*v, "late_refit_restarts");
    }
    if (auto v = get_int(t, "stall_threshold")) o.stall_threshold = to_int(*v, "stall_threshold");
    if (auto v = get_bool(t, "parallel_local")) o.parallel_local = *v;
    if (auto v = get_bool(t, "unit_cube_seed_distances")) o.unit_cube_seed_distances = *v;
  }

  if (const toml::table* t = section(root, "seeding")) {
    check_keys(*t, "seeding", {"repetitions", "b_start", "local_half_width", "tolerance"});
    if (auto v = get_int(t, "repetitions")) cfg.seeding.repetitions = to_int(*v, "repetitions");
    if (auto v = get_int(t, "b_start")) cfg.seeding.b_start = to_int(*v, "b_start");
    if (auto v = get_double(t, "local_half_width")) cfg.seeding.local_half_width = *v;
    if (auto v = get_double(t, "tolerance")) cfg.seeding.tolerance = *v;
  }

  try {
    k.validate();
    im.validate();
    cfg.pattern.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.pattern.weights.size() + 1 < static_cast<std::size_t>(plan.b_start)) {
    throw ConfigError(fmt::format("weight pattern has {} entries; b_start {} needs {}",
                                  cfg.pattern.weights.size(), plan.b_start, plan.b_start - 1));
  }
  if (o.refit_period < 1) throw ConfigError("refit_period must be positive");
  if (!(o.refit_fraction >= 0.0)) throw ConfigError("refit_fraction must be nonnegative");
  if (!(o.late_refit_radius > 0.0) || o.late_refit_restarts < 0) {
    throw ConfigError("late_refit_radius must be positive and late_refit_restarts nonnegative");
  }
  if (ac.candidates_per_dim < 1 || ac.polish_starts < 1 || ac.incumbent_perturbations < 0) {
    throw ConfigError("acquisition counts must be positive");
  }
  if (cfg.seeding.repetitions < 1 || cfg.seeding.b_start < 1 ||
      !(cfg.seeding.local_half_width > 0.0) || !(cfg.seeding.tolerance > 0.0)) {
    throw ConfigError("seeding settings must be positive");
  }
  return cfg;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const Overrides& overrides) {
  std::string text;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path->string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return resolve_config(text, overrides);
}

}  // namespace nso::bench
