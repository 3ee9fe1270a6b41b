#include <atomic>
#include <cstdlib>
#include <cstring>

#include "nso/simd/kernels.hpp"

namespace nso::simd {

#ifndef NSO_HAVE_AVX2
namespace avx2 {
bool compiled() { return false; }
void weighted_sq_dist(std::span<const double> x, const double* cols, std::size_t stride,
                      std::span<const double> w, std::span<double> out) {
  scalar::weighted_sq_dist(x, cols, stride, w, out);
}
void exp_neg(std::span<double> values) { scalar::exp_neg(values); }
double dot(std::span<const double> a, std::span<const double> b) { return scalar::dot(a, b); }
void min_dist_update(std::span<const double> x, const double* cols, std::size_t stride,
                     std::span<double> out) {
  scalar::min_dist_update(x, cols, stride, out);
}
void lower_solve_sqnorm(const double* l_rows, std::size_t k, double* b, std::size_t n,
                        std::span<double> out) {
  scalar::lower_solve_sqnorm(l_rows, k, b, n, out);
}
}  // namespace avx2
#endif

namespace {

constexpr KernelTable kScalarTable{&scalar::weighted_sq_dist, &scalar::exp_neg, &scalar::dot,
                                   &scalar::min_dist_update, &scalar::lower_solve_sqnorm};
constexpr KernelTable kAvx2Table{&avx2::weighted_sq_dist, &avx2::exp_neg, &avx2::dot,
                                 &avx2::min_dist_update, &avx2::lower_solve_sqnorm};

Isa detect() {
  if (const char* env = std::getenv("NOISY_SEED_OPT_SIMD");
      env != nullptr && std::strcmp(env, "scalar") == 0) {
    return Isa::Scalar;
  }
  return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool avx2_available() {
#if defined(NSO_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

const KernelTable& table_for(Isa isa) {
  return (isa == Isa::Avx2 && avx2_available()) ? kAvx2Table : kScalarTable;
}

const KernelTable& active() { return table_for(current().load(std::memory_order_relaxed)); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
  current().store(isa == Isa::Avx2 && avx2_available() ? Isa::Avx2 : Isa::Scalar,
                  std::memory_order_relaxed);
}

}  // namespace nso::simd
