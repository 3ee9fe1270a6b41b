#pragma once
// Scalar measurement-noise model: a readout bias toward the middle of the
// spectrum plus Gaussian shot noise.

#include <cstdint>
#include <optional>
#include <utility>

namespace nso {

struct NoiseSpec {
  std::optional<int> shots = 8192;  // nullopt means infinitely many shots
  double misclass = 0.003;
  std::uint64_t rng_stream = 0;

  /// Throws std::invalid_argument for shots < 1 or misclass outside [0, 0.5).
  void validate() const;
  /// (E_max - E_min) / (2 sqrt(shots)); 0 for infinite shots.
  double shot_sigma(std::pair<double, double> value_range) const;
};

/// clean + misclass (E_mid - clean) + N(0, shot_sigma^2), the normal draw
/// keyed by (rng_stream, counter) only.
double apply_noise(double clean_value, const NoiseSpec& noise,
                   std::pair<double, double> value_range, std::uint64_t counter);

}  // namespace nso
