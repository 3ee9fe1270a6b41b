#include "nso/objectives/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/core.h>

namespace nso {
namespace {

void require_dim(SyntheticKind kind, std::size_t d, std::size_t lo, std::size_t hi) {
  if (d < lo || d > hi) {
    throw std::invalid_argument(fmt::format("{} supports dimensions {}..{}, got {}",
                                            synthetic_name(kind), lo, hi, d));
  }
}

double sq_dist(std::span<const double> x, const Vector& c) {
  double acc = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) acc += (x[j] - c[j]) * (x[j] - c[j]);
  return acc;
}

void check_arity(std::span<const double> x, std::size_t d) {
  if (x.size() != d) {
    throw std::invalid_argument(fmt::format("objective expects {} parameters, got {}", d, x.size()));
  }
}

}  // namespace

std::string_view synthetic_name(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::Sphere:
      return "Sphere";
    case SyntheticKind::Rastrigin2:
      return "Rastrigin2";
    case SyntheticKind::ShiftedAckley:
      return "ShiftedAckley";
    case SyntheticKind::TwoWells:
      return "TwoWells";
  }
  return "?";
}

SyntheticFunction synthetic_suite(SyntheticKind kind, std::size_t d) {
  switch (kind) {
    case SyntheticKind::Sphere: {
      require_dim(kind, d, 1, 64);
      Vector c(d);
      for (std::size_t j = 0; j < d; ++j) {
        const double phi = static_cast<double>(j + 1) * 0.6180339887498949;
        c[j] = 0.35 + 0.3 * (phi - std::floor(phi));
      }
      return {kind, SearchDomain::cube(d, 0.0, 1.0), {c}, 0.0, std::nullopt, std::nullopt,
              [c](std::span<const double> x) {
                check_arity(x, c.size());
                return sq_dist(x, c);
              }};
    }
    case SyntheticKind::Rastrigin2: {
      require_dim(kind, d, 2, 2);
      return {kind, SearchDomain::cube(2, -2.0, 2.0), {Vector{0.0, 0.0}}, 0.0, std::nullopt,
              std::nullopt, [](std::span<const double> x) {
                check_arity(x, 2);
                double acc = 20.0;
                for (double v : x) acc += v * v - 10.0 * std::cos(2.0 * std::numbers::pi * v);
                return acc;
              }};
    }
    case SyntheticKind::ShiftedAckley: {
      require_dim(kind, d, 1, 32);
      Vector s(d);
      for (std::size_t j = 0; j < d; ++j) s[j] = 1.5 * std::sin(1.7 * static_cast<double>(j + 1));
      return {kind, SearchDomain::cube(d, -5.0, 5.0), {s}, 0.0, std::nullopt, std::nullopt,
              [s](std::span<const double> x) {
                check_arity(x, s.size());
                const double n = static_cast<double>(s.size());
                double sq = 0.0;
                double cs = 0.0;
                for (std::size_t j = 0; j < s.size(); ++j) {
                  const double z = x[j] - s[j];
                  sq += z * z;
                  cs += std::cos(2.0 * std::numbers::pi * z);
                }
                const double v = -20.0 * std::exp(-0.2 * std::sqrt(sq / n)) - std::exp(cs / n) +
                                 20.0 + std::numbers::e;
                return std::max(0.0, v);
              }};
    }
    case SyntheticKind::TwoWells: {
      require_dim(kind, d, 2, 64);
      const Vector a(d, 0.2);
      const Vector b(d, 0.62);
      const double two_s2 = 2.0 * 0.0625 * static_cast<double>(d);
      return {kind, SearchDomain::cube(d, 0.0, 1.0), {a}, -1.0, b, -0.8,
              [a, b, two_s2](std::span<const double> x) {
                check_arity(x, a.size());
                return std::min(-std::exp(-sq_dist(x, a) / two_s2),
                                -0.8 * std::exp(-sq_dist(x, b) / two_s2));
              }};
    }
  }
  throw std::invalid_argument("synthetic_suite: unknown kind");
}

}  // namespace nso
