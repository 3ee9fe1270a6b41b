#pragma once
// Choice of diverse, low-valued starting points for the local searches.

#include <optional>
#include <span>
#include <vector>

#include "nso/design.hpp"

namespace nso {

struct WeightPattern {
  /// Weight on the scaled value for the 2nd, 3rd, ... start; each in [0, 1).
  Vector weights;

  /// {0.3, 0.5, 0.7, 0.95} repeated or truncated to b_start - 1 entries.
  static WeightPattern cycling(int b_start);
  /// Throws std::invalid_argument when a weight is outside [0, 1).
  void validate() const;
};

/// (v - min) / (max - min); all zeros when every value is equal.
/// Throws std::invalid_argument on empty input.
Vector scale_values(std::span<const double> values);

struct SeedSelectOptions {
  /// Measure distances after mapping this box to the unit cube instead of in
  /// the original units.
  std::optional<SearchDomain> unit_cube_box;
};

/// Greedy selection: the best sample first, then repeatedly the unselected
/// sample minimizing w V_E + (1 - w) V_D, where V_D is the rescaled distance
/// to the selected set with far points scoring low. Ties go to the lowest
/// eval_index. Samples at an already selected location are never selected
/// again. Returns archive indices in selection order; fewer than b_start when
/// the archive runs out of distinct points.
/// Throws std::invalid_argument for an empty archive, b_start < 1, b_start
/// larger than the archive or a pattern shorter than b_start - 1.
std::vector<std::size_t> select_starts(const std::vector<EvaluatedSample>& archive,
                                       const WeightPattern& pattern, int b_start,
                                       const SeedSelectOptions& options = {});

}  // namespace nso
