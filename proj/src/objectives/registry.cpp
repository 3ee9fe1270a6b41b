#include "nso/objectives/registry.hpp"

#include <memory>
#include <numbers>
#include <stdexcept>

#include <fmt/core.h>

#include "nso/objectives/synthetic.hpp"

namespace nso {
namespace {

// Fraction of the domain width used as the default local half-width.
constexpr double kLocalFraction = 0.05;

struct HubbardEntry {
  const char* id;
  int nx, ny, n_up, n_down, layers;
  std::size_t n_params;
};

// Layer counts give the parameter counts of the original problem set where
// 2*layers (or 2*layers - 1) can match them.
constexpr HubbardEntry kHubbard[] = {
    {"H1", 2, 1, 1, 0, 1, 2},  {"H2", 2, 1, 1, 1, 1, 2},   {"H3", 2, 2, 1, 1, 5, 9},
    {"H4", 2, 2, 2, 2, 7, 14}, {"H5", 2, 2, 3, 3, 5, 9},   {"H6", 3, 2, 1, 1, 10, 20},
};

NoiseSpec default_noise() { return NoiseSpec{8192, 0.003, 0}; }

Problem hubbard_problem(const HubbardEntry& e, bool noisy) {
  HubbardSpec spec{e.nx, e.ny, e.n_up, e.n_down, 1.0, 2.0, e.layers};
  auto hva = std::make_shared<const HvaEnergy>(spec, e.n_params);
  const auto& sp = hva->spectrum();
  const double pi = std::numbers::pi;
  return Problem{
      fmt::format("{}-{}", e.id, noisy ? "n" : "d"),
      fmt::format("Hubbard {}x{} filling ({},{}), t=1 U=2, {}-parameter ansatz{}", e.nx, e.ny,
                  e.n_up, e.n_down, e.n_params, noisy ? ", measurement noise" : ""),
      SearchDomain::cube(e.n_params, -pi, pi),
      hva->ground_energy(),
      std::nullopt,
      {sp.front(), sp.back()},
      noisy ? std::optional<NoiseSpec>(default_noise()) : std::nullopt,
      kLocalFraction * 2.0 * pi,
      spec,
      [hva](std::span<const double> x) { return (*hva)(x); }};
}

Problem synthetic_problem(std::string id, SyntheticKind kind, std::size_t d, bool noisy) {
  SyntheticFunction fn = synthetic_suite(kind, d);
  double hi = 0.0;
  switch (kind) {
    case SyntheticKind::Sphere:
      hi = static_cast<double>(d);
      break;
    case SyntheticKind::Rastrigin2:
      hi = 80.0;
      break;
    case SyntheticKind::ShiftedAckley:
      hi = 20.0 + std::numbers::e;
      break;
    case SyntheticKind::TwoWells:
      hi = 0.0;
      break;
  }
  const double width = fn.domain.width(0);
  return Problem{std::move(id),
                 fmt::format("{} in {} dimensions{}", synthetic_name(kind), d,
                             noisy ? ", measurement noise" : ""),
                 fn.domain,
                 fn.min_value,
                 fn.minimizers.front(),
                 {fn.min_value, hi},
                 noisy ? std::optional<NoiseSpec>(default_noise()) : std::nullopt,
                 kLocalFraction * width,
                 std::nullopt,
                 fn.f};
}

}  // namespace

Objective Problem::objective(const std::optional<NoiseSpec>& noise_spec,
                             std::uint64_t stream) const {
  std::optional<NoiseSpec> ns = noise_spec;
  if (ns) {
    ns->validate();
    ns->rng_stream = stream;
  }
  return [f = clean, dom = domain, range = value_range, ns](std::span<const double> theta,
                                                             std::uint64_t key) {
    if (!dom.contains(theta)) throw std::out_of_range("parameter vector outside the problem domain");
    const double v = f(theta);
    return ns ? apply_noise(v, *ns, range, key) : v;
  };
}

std::vector<std::string> problem_ids() {
  std::vector<std::string> ids;
  for (const auto& e : kHubbard) {
    ids.push_back(fmt::format("{}-d", e.id));
    ids.push_back(fmt::format("{}-n", e.id));
  }
  for (const char* s : {"sphere-5", "rastrigin-2", "ackley-4", "twowells-9", "twowells-9-n"}) {
    ids.emplace_back(s);
  }
  return ids;
}

Problem make_problem(std::string_view id) {
  for (const auto& e : kHubbard) {
    const std::string base = e.id;
    if (id == base || id == base + "-d") return hubbard_problem(e, false);
    if (id == base + "-n") return hubbard_problem(e, true);
  }
  if (id == "sphere-5") return synthetic_problem("sphere-5", SyntheticKind::Sphere, 5, false);
  if (id == "rastrigin-2") {
    return synthetic_problem("rastrigin-2", SyntheticKind::Rastrigin2, 2, false);
  }
  if (id == "ackley-4") return synthetic_problem("ackley-4", SyntheticKind::ShiftedAckley, 4, false);
  if (id == "twowells-9") return synthetic_problem("twowells-9", SyntheticKind::TwoWells, 9, false);
  if (id == "twowells-9-n") {
    return synthetic_problem("twowells-9-n", SyntheticKind::TwoWells, 9, true);
  }
  throw std::invalid_argument(fmt::format("unknown problem '{}'", id));
}

}  // namespace nso
