#pragma once
// Implicit filtering: bound-constrained coordinate-stencil descent with a
// difference gradient, run over a decreasing sequence of stencil scales.

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "nso/design.hpp"

namespace nso {

using LocalObjective = std::function<double(std::span<const double>)>;

struct ImfilConfig {
  int max_evals = 1000;
  /// Stencil sizes as fractions of the box width, strictly decreasing in (0, 1].
  Vector scales{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
  double armijo_c = 1e-4;
  int max_line_steps = 5;

  /// Throws std::invalid_argument when any field is out of range.
  void validate() const;
};

enum class Termination { ScalesExhausted, BudgetExhausted };

std::string_view termination_name(Termination t);

struct LocalResult {
  Vector best_theta;
  double best_value = 0.0;
  /// Every evaluation, in call order. eval_index counts from 1 within the search.
  std::vector<EvaluatedSample> samples;
  int n_evals = 0;
  Termination termination = Termination::ScalesExhausted;
  /// Accepted moves at each scale (same length as config.scales; scales never
  /// reached stay 0).
  std::vector<int> moves_per_scale;
};

/// Minimizes `objective` over `box` starting from `start`; the start itself is
/// the first evaluation. Each distinct visit is evaluated once, so a noisy
/// center keeps the value it was accepted with.
/// Throws std::invalid_argument when start lies outside the box or the config
/// is invalid.
LocalResult imfil_minimize(const LocalObjective& objective, const SearchDomain& box,
                           std::span<const double> start, const ImfilConfig& config = {});

}  // namespace nso
