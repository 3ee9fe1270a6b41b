#pragma once
// Data-parallel inner loops shared by the surrogate and the seed selector.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is picked once at runtime from the CPU's
// feature flags; NOISY_SEED_OPT_SIMD=scalar forces the reference path.
// Point sets are stored column-major ("structure of arrays"): coordinate j of
// point i lives at cols[j * stride + i], so the vector lanes run over points.

#include <cstddef>
#include <span>
#include <string_view>

namespace nso::simd {

enum class Isa { Scalar, Avx2 };

/// Kernel table for one instruction set.
struct KernelTable {
  /// out[i] = sum_j w[j] * (x[j] - cols[j*stride + i])^2 for i < out.size().
  void (*weighted_sq_dist)(std::span<const double> x, const double* cols, std::size_t stride,
                           std::span<const double> w, std::span<double> out);
  /// out[i] = exp(-out[i]) in place.
  void (*exp_neg)(std::span<double> values);
  double (*dot)(std::span<const double> a, std::span<const double> b);
  /// out[i] = min(out[i], sqrt(sum_j (x[j] - cols[j*stride + i])^2)).
  void (*min_dist_update)(std::span<const double> x, const double* cols, std::size_t stride,
                          std::span<double> out);
  /// Solves L X = B in place for the row-major k x n matrix B, where L is
  /// lower triangular and stored as packed rows (row i starts at i(i+1)/2,
  /// diagonal last). Then out[c] = sum_i X[i][c]^2 for c < n.
  void (*lower_solve_sqnorm)(const double* l_rows, std::size_t k, double* b, std::size_t n,
                             std::span<double> out);
};

namespace scalar {
void weighted_sq_dist(std::span<const double> x, const double* cols, std::size_t stride,
                      std::span<const double> w, std::span<double> out);
void exp_neg(std::span<double> values);
double dot(std::span<const double> a, std::span<const double> b);
void min_dist_update(std::span<const double> x, const double* cols, std::size_t stride,
                     std::span<double> out);
void lower_solve_sqnorm(const double* l_rows, std::size_t k, double* b, std::size_t n,
                        std::span<double> out);
}  // namespace scalar

namespace avx2 {
bool compiled();
void weighted_sq_dist(std::span<const double> x, const double* cols, std::size_t stride,
                      std::span<const double> w, std::span<double> out);
void exp_neg(std::span<double> values);
double dot(std::span<const double> a, std::span<const double> b);
void min_dist_update(std::span<const double> x, const double* cols, std::size_t stride,
                     std::span<double> out);
void lower_solve_sqnorm(const double* l_rows, std::size_t k, double* b, std::size_t n,
                        std::span<double> out);
}  // namespace avx2

/// True when the AVX2 variant is compiled in and the CPU supports AVX2+FMA.
bool avx2_available();

const KernelTable& table_for(Isa isa);

/// The kernel table in use by the library.
const KernelTable& active();
Isa active_isa();
std::string_view isa_name(Isa isa);

/// Overrides the runtime choice (tests and benchmarks). Requesting Avx2 on a
/// machine without it falls back to Scalar.
void force_isa(Isa isa);

}  // namespace nso::simd
