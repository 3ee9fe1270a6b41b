#pragma once
// Search domains, evaluated samples and space-filling designs.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace nso {

using Vector = std::vector<double>;

/// Axis-aligned box with lower[j] < upper[j] in every dimension.
class SearchDomain {
 public:
  /// Throws std::invalid_argument on empty, mismatched or inverted bounds.
  SearchDomain(Vector lower, Vector upper);

  static SearchDomain cube(std::size_t dim, double lo, double hi);

  std::size_t dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  double width(std::size_t j) const { return upper_[j] - lower_[j]; }
  double diagonal() const;
  Vector center() const;

  bool contains(std::span<const double> theta) const;

  /// Affine maps to and from [0,1]^d.
  Vector to_unit(std::span<const double> theta) const;
  Vector from_unit(std::span<const double> unit) const;

  bool operator==(const SearchDomain&) const = default;

 private:
  Vector lower_;
  Vector upper_;
};

enum class Phase { InitDesign, GpIteration, LocalSearch };

std::string_view phase_name(Phase phase);

struct EvaluatedSample {
  Vector theta;
  double value = 0.0;
  std::int64_t eval_index = 0;  // 1-based, contiguous within a run
  Phase phase = Phase::InitDesign;
  std::optional<int> seed_index;  // local search that produced the sample
};

/// Random Latin hypercube: one point per axis bin, independent permutation per
/// axis, uniform placement inside the bin. Deterministic for a given seed.
std::vector<Vector> latin_hypercube(const SearchDomain& domain, std::size_t n,
                                    std::uint64_t rng_seed);

Vector clip_to_domain(std::span<const double> theta, const SearchDomain& domain);

/// The box center +/- half_width intersected with the domain. The center is
/// clipped first, so the result always contains it.
SearchDomain sub_box(std::span<const double> center, double half_width,
                     const SearchDomain& domain);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Stateless stream splitting for deterministic sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace nso
