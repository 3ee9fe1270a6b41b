#include "nso/seed_select.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include <fmt/core.h>

#include "nso/simd/kernels.hpp"

namespace nso {

WeightPattern WeightPattern::cycling(int b_start) {
  static constexpr double kCycle[] = {0.3, 0.5, 0.7, 0.95};
  WeightPattern p;
  for (int i = 0; i + 1 < b_start; ++i) p.weights.push_back(kCycle[i % 4]);
  return p;
}

void WeightPattern::validate() const {
  for (double w : weights) {
    if (!(w >= 0.0 && w < 1.0)) {
      throw std::invalid_argument(fmt::format("weight pattern entry {} outside [0, 1)", w));
    }
  }
}

Vector scale_values(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("scale_values: no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  Vector out(values.size(), 0.0);
  if (*hi == *lo) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / (*hi - *lo);
  return out;
}

std::vector<std::size_t> select_starts(const std::vector<EvaluatedSample>& archive,
                                       const WeightPattern& pattern, int b_start,
                                       const SeedSelectOptions& options) {
  if (archive.empty()) throw std::invalid_argument("select_starts: empty archive");
  if (b_start < 1) throw std::invalid_argument("select_starts: b_start must be positive");
  const std::size_t n = archive.size();
  if (static_cast<std::size_t>(b_start) > n) {
    throw std::invalid_argument(
        fmt::format("select_starts: b_start {} exceeds archive size {}", b_start, n));
  }
  if (pattern.weights.size() + 1 < static_cast<std::size_t>(b_start)) {
    throw std::invalid_argument(fmt::format("select_starts: {} weights for {} starts",
                                            pattern.weights.size(), b_start));
  }
  pattern.validate();

  const std::size_t d = archive.front().theta.size();
  Vector cols(d * n);
  Vector values(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (archive[i].theta.size() != d) throw std::invalid_argument("select_starts: ragged archive");
    const Vector p = options.unit_cube_box ? options.unit_cube_box->to_unit(archive[i].theta)
                                           : archive[i].theta;
    for (std::size_t j = 0; j < d; ++j) cols[j * n + i] = p[j];
    values[i] = archive[i].value;
  }
  const Vector v_e = scale_values(values);

  // Lower eval_index wins ties.
  const auto earlier = [&](std::size_t a, std::size_t b) {
    return archive[a].eval_index < archive[b].eval_index;
  };

  std::vector<std::size_t> chosen;
  std::vector<bool> taken(n, false);
  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (values[i] < values[first] || (values[i] == values[first] && earlier(i, first))) first = i;
  }

  Vector min_dist(n, std::numeric_limits<double>::infinity());
  const auto& kern = simd::active();
  const auto add = [&](std::size_t idx) {
    chosen.push_back(idx);
    taken[idx] = true;
    Vector p(d);
    for (std::size_t j = 0; j < d; ++j) p[j] = cols[j * n + idx];
    kern.min_dist_update(p, cols.data(), n, min_dist);
    // Duplicates of a selected location are excluded from later rounds.
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i] && min_dist[i] == 0.0) taken[i] = true;
    }
  };
  add(first);

  while (chosen.size() < static_cast<std::size_t>(b_start)) {
    double d_min = std::numeric_limits<double>::infinity();
    double d_max = -d_min;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      d_min = std::min(d_min, min_dist[i]);
      d_max = std::max(d_max, min_dist[i]);
    }
    if (d_max < 0.0) break;  // nothing left

    const double w = pattern.weights[chosen.size() - 1];
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double v_d = d_max > d_min ? (d_max - min_dist[i]) / (d_max - d_min) : 0.0;
      const double score = w * v_e[i] + (1.0 - w) * v_d;
      if (best == n || score < best_score || (score == best_score && earlier(i, best))) {
        best = i;
        best_score = score;
      }
    }
    add(best);
  }
  return chosen;
}

}  // namespace nso
