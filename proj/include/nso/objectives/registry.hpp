#pragma once
// Named benchmark problems addressable from the command line.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nso/design.hpp"
#include "nso/objectives/hubbard.hpp"
#include "nso/objectives/noise.hpp"
#include "nso/orchestrator.hpp"

namespace nso {

struct Problem {
  std::string id;
  std::string description;
  SearchDomain domain;
  /// Known global minimum of the noise-free landscape, when there is one.
  std::optional<double> reference_min;
  std::optional<Vector> reference_argmin;
  /// Bracket of attainable values; feeds the noise model.
  std::pair<double, double> value_range;
  /// Default noise; nullopt for deterministic problems.
  std::optional<NoiseSpec> noise;
  /// Default sub-box half-width for the local searches.
  double local_half_width = 0.05;
  std::optional<HubbardSpec> hubbard;
  std::function<double(std::span<const double>)> clean;

  std::size_t dim() const { return domain.dim(); }
  /// Objective with the given noise (or none), its draws keyed by
  /// (stream, evaluation key). Evaluating outside the domain throws.
  Objective objective(const std::optional<NoiseSpec>& noise_spec, std::uint64_t stream) const;
  Objective objective(std::uint64_t stream) const { return objective(noise, stream); }
};

/// Canonical problem ids in listing order (aliases excluded).
std::vector<std::string> problem_ids();

/// Throws std::invalid_argument for unknown ids.
Problem make_problem(std::string_view id);

}  // namespace nso
