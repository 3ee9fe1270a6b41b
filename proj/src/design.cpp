#include "nso/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/core.h>

namespace nso {

SearchDomain::SearchDomain(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.empty()) throw std::invalid_argument("SearchDomain: dimension must be positive");
  if (lower_.size() != upper_.size()) {
    throw std::invalid_argument(fmt::format("SearchDomain: {} lower bounds but {} upper bounds",
                                            lower_.size(), upper_.size()));
  }
  for (std::size_t j = 0; j < lower_.size(); ++j) {
    if (!std::isfinite(lower_[j]) || !std::isfinite(upper_[j]) || !(lower_[j] < upper_[j])) {
      throw std::invalid_argument(fmt::format(
          "SearchDomain: need lower < upper in dimension {} (got {} and {})", j, lower_[j],
          upper_[j]));
    }
  }
}

SearchDomain SearchDomain::cube(std::size_t dim, double lo, double hi) {
  return SearchDomain(Vector(dim, lo), Vector(dim, hi));
}

double SearchDomain::diagonal() const {
  double acc = 0.0;
  for (std::size_t j = 0; j < dim(); ++j) acc += width(j) * width(j);
  return std::sqrt(acc);
}

Vector SearchDomain::center() const {
  Vector c(dim());
  for (std::size_t j = 0; j < dim(); ++j) c[j] = 0.5 * (lower_[j] + upper_[j]);
  return c;
}

bool SearchDomain::contains(std::span<const double> theta) const {
  if (theta.size() != dim()) return false;
  for (std::size_t j = 0; j < dim(); ++j) {
    if (!(lower_[j] <= theta[j] && theta[j] <= upper_[j])) return false;
  }
  return true;
}

Vector SearchDomain::to_unit(std::span<const double> theta) const {
  Vector u(dim());
  for (std::size_t j = 0; j < dim(); ++j) u[j] = (theta[j] - lower_[j]) / width(j);
  return u;
}

Vector SearchDomain::from_unit(std::span<const double> unit) const {
  Vector x(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    x[j] = std::clamp(lower_[j] + unit[j] * width(j), lower_[j], upper_[j]);
  }
  return x;
}

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::InitDesign:
      return "InitDesign";
    case Phase::GpIteration:
      return "GpIteration";
    case Phase::LocalSearch:
      return "LocalSearch";
  }
  return "?";
}

std::vector<Vector> latin_hypercube(const SearchDomain& domain, std::size_t n,
                                    std::uint64_t rng_seed) {
  if (n == 0) throw std::invalid_argument("latin_hypercube: n must be positive");
  const std::size_t d = domain.dim();
  std::mt19937_64 rng(rng_seed);
  // Keep draws off the bin edges so rounding cannot move a point into a
  // neighbouring bin.
  std::uniform_real_distribution<double> within(1e-9, 1.0 - 1e-9);

  std::vector<Vector> points(n, Vector(d));
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const double lo = domain.lower()[j];
    const double w = domain.width(j);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(perm[i]) + within(rng)) / static_cast<double>(n);
      points[i][j] = std::clamp(lo + u * w, lo, domain.upper()[j]);
    }
  }
  return points;
}

Vector clip_to_domain(std::span<const double> theta, const SearchDomain& domain) {
  if (theta.size() != domain.dim()) {
    throw std::invalid_argument(fmt::format("clip_to_domain: point has {} coordinates, domain {}",
                                            theta.size(), domain.dim()));
  }
  Vector out(theta.begin(), theta.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::clamp(out[j], domain.lower()[j], domain.upper()[j]);
  }
  return out;
}

SearchDomain sub_box(std::span<const double> center, double half_width,
                     const SearchDomain& domain) {
  if (!(half_width > 0.0)) throw std::invalid_argument("sub_box: half_width must be positive");
  const Vector c = clip_to_domain(center, domain);
  Vector lo(c.size());
  Vector hi(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    lo[j] = std::max(domain.lower()[j], c[j] - half_width);
    hi[j] = std::min(domain.upper()[j], c[j] + half_width);
  }
  return SearchDomain(std::move(lo), std::move(hi));
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(acc);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 finalizer over a combined key
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream) ^ (index * 0xd1b54a32d192ed03ULL));
}

}  // namespace nso
