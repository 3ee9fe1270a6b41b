#pragma once
// Test functions with analytically known minima.

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nso/design.hpp"

namespace nso {

enum class SyntheticKind { Sphere, Rastrigin2, ShiftedAckley, TwoWells };

std::string_view synthetic_name(SyntheticKind kind);

struct SyntheticFunction {
  SyntheticKind kind = SyntheticKind::Sphere;
  SearchDomain domain;
  std::vector<Vector> minimizers;
  double min_value = 0.0;
  /// Secondary basin, where the construction has one (TwoWells).
  std::optional<Vector> local_minimizer;
  std::optional<double> local_value;
  std::function<double(std::span<const double>)> f;

  std::size_t dim() const { return domain.dim(); }
  double operator()(std::span<const double> x) const { return f(x); }
};

/// Supported dimensions: Sphere 1..64 on [0,1]^d; Rastrigin2 only d = 2 on
/// [-2,2]^2; ShiftedAckley 1..32 on [-5,5]^d; TwoWells 2..64 on [0,1]^d.
/// TwoWells is min(-g_a, -0.8 g_b) with Gaussian bumps at a = 0.2*1 and
/// b = 0.62*1 of width 0.25 sqrt(d), so the global value is exactly -1 and
/// the wider basin around the domain center leads to the -0.8 well.
/// Throws std::invalid_argument for unsupported dimensions.
SyntheticFunction synthetic_suite(SyntheticKind kind, std::size_t d);

}  // namespace nso
