#include "nso/objectives/noise.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/core.h>

#include "nso/design.hpp"

namespace nso {

void NoiseSpec::validate() const {
  if (shots && *shots < 1) throw std::invalid_argument("noise: shots must be positive");
  if (!(misclass >= 0.0 && misclass < 0.5)) {
    throw std::invalid_argument(fmt::format("noise: misclass {} outside [0, 0.5)", misclass));
  }
}

double NoiseSpec::shot_sigma(std::pair<double, double> value_range) const {
  if (!shots) return 0.0;
  return (value_range.second - value_range.first) / (2.0 * std::sqrt(static_cast<double>(*shots)));
}

double apply_noise(double clean_value, const NoiseSpec& noise,
                   std::pair<double, double> value_range, std::uint64_t counter) {
  const double mid = 0.5 * (value_range.first + value_range.second);
  double v = clean_value + noise.misclass * (mid - clean_value);
  const double sigma = noise.shot_sigma(value_range);
  if (sigma > 0.0) {
    std::mt19937_64 rng(mix_seed(noise.rng_stream, 0x6e6f697365ULL, counter));
    std::normal_distribution<double> normal(0.0, sigma);
    v += normal(rng);
  }
  return v;
}

}  // namespace nso
