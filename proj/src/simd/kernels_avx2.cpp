// AVX2/FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after a runtime CPU check (see dispatch.cpp).
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "nso/simd/kernels.hpp"

namespace nso::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// exp(y) for y <= 0, Cephes rational approximation on [-ln2/2, ln2/2] and an
// exponent-field scale. Results below ~1e-308 flush to zero.
inline __m256d exp_nonpositive(__m256d y) {
  const __m256d min_arg = _mm256_set1_pd(-708.0);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125E-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212E-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878E-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300E-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910E-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042E-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192E-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766E-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000009E0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);

  const __m256d underflow = _mm256_cmp_pd(y, min_arg, _CMP_LT_OQ);
  y = _mm256_max_pd(y, min_arg);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(y, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, c1, y);
  r = _mm256_fnmadd_pd(n, c2, r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d px = _mm256_fmadd_pd(p0, rr, p1);
  px = _mm256_fmadd_pd(px, rr, p2);
  px = _mm256_mul_pd(px, r);
  __m256d qx = _mm256_fmadd_pd(q0, rr, q1);
  qx = _mm256_fmadd_pd(qx, rr, q2);
  qx = _mm256_fmadd_pd(qx, rr, q3);
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(two, e, one);

  // 2^n through the exponent field; n >= -1022 after the clamp above.
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  n64 = _mm256_slli_epi64(n64, 52);
  e = _mm256_mul_pd(e, _mm256_castsi256_pd(n64));
  return _mm256_blendv_pd(e, _mm256_setzero_pd(), underflow);
}

}  // namespace

bool compiled() { return true; }

void weighted_sq_dist(std::span<const double> x, const double* cols, std::size_t stride,
                      std::span<const double> w, std::span<double> out) {
  const std::size_t n = out.size();
  const std::size_t nv = n - n % 4;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double* col = cols + j * stride;
    const __m256d xj = _mm256_set1_pd(x[j]);
    const __m256d wj = _mm256_set1_pd(w[j]);
    std::size_t i = 0;
    for (; i < nv; i += 4) {
      const __m256d diff = _mm256_sub_pd(xj, _mm256_loadu_pd(col + i));
      const __m256d acc = _mm256_loadu_pd(out.data() + i);
      _mm256_storeu_pd(out.data() + i, _mm256_fmadd_pd(_mm256_mul_pd(wj, diff), diff, acc));
    }
    for (; i < n; ++i) {
      const double diff = x[j] - col[i];
      out[i] = std::fma(w[j] * diff, diff, out[i]);
    }
  }
}

void exp_neg(std::span<double> values) {
  const std::size_t n = values.size();
  const std::size_t nv = n - n % 4;
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i < nv; i += 4) {
    const __m256d v = _mm256_xor_pd(_mm256_loadu_pd(values.data() + i), sign);
    _mm256_storeu_pd(values.data() + i, exp_nonpositive(v));
  }
  if (i < n) {
    alignas(32) double tail[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t t = 0; i + t < n; ++t) tail[t] = -values[i + t];
    _mm256_store_pd(tail, exp_nonpositive(_mm256_load_pd(tail)));
    for (std::size_t t = 0; i + t < n; ++t) values[i + t] = tail[t];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t nv = n - n % 8;
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < nv; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4),
                           acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void min_dist_update(std::span<const double> x, const double* cols, std::size_t stride,
                     std::span<double> out) {
  const std::size_t n = out.size();
  const std::size_t nv = n - n % 4;
  std::size_t i = 0;
  for (; i < nv; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_set1_pd(x[j]), _mm256_loadu_pd(cols + j * stride + i));
      acc = _mm256_fmadd_pd(diff, diff, acc);
    }
    const __m256d dist = _mm256_sqrt_pd(acc);
    _mm256_storeu_pd(out.data() + i, _mm256_min_pd(_mm256_loadu_pd(out.data() + i), dist));
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - cols[j * stride + i];
      acc = std::fma(diff, diff, acc);
    }
    out[i] = std::min(out[i], std::sqrt(acc));
  }
}

namespace {

// Columns [c0, c1) of lower_solve_sqnorm, V vectors of 4 at a time, two rows
// per pass so each loaded row of X feeds both.
template <int V>
void solve_block(const double* l_rows, std::size_t k, double* b, std::size_t n, std::size_t c0,
                 double* out) {
  __m256d sum[V];
  for (int q = 0; q < V; ++q) sum[q] = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 1 < k; i += 2) {
    const double* l0 = l_rows + i * (i + 1) / 2;
    const double* l1 = l0 + i + 1;
    double* x0 = b + i * n + c0;
    double* x1 = x0 + n;
    __m256d a0[V];
    __m256d a1[V];
#pragma GCC unroll 4
    for (int q = 0; q < V; ++q) {
      a0[q] = _mm256_loadu_pd(x0 + 4 * q);
      a1[q] = _mm256_loadu_pd(x1 + 4 * q);
    }
    for (std::size_t j = 0; j < i; ++j) {
      const double* xj = b + j * n + c0;
      const __m256d w0 = _mm256_set1_pd(l0[j]);
      const __m256d w1 = _mm256_set1_pd(l1[j]);
#pragma GCC unroll 4
      for (int q = 0; q < V; ++q) {
        const __m256d v = _mm256_loadu_pd(xj + 4 * q);
        a0[q] = _mm256_fnmadd_pd(w0, v, a0[q]);
        a1[q] = _mm256_fnmadd_pd(w1, v, a1[q]);
      }
    }
    const __m256d inv0 = _mm256_set1_pd(1.0 / l0[i]);
    const __m256d w = _mm256_set1_pd(l1[i]);
    const __m256d inv1 = _mm256_set1_pd(1.0 / l1[i + 1]);
#pragma GCC unroll 4
    for (int q = 0; q < V; ++q) {
      a0[q] = _mm256_mul_pd(a0[q], inv0);
      a1[q] = _mm256_mul_pd(_mm256_fnmadd_pd(w, a0[q], a1[q]), inv1);
      _mm256_storeu_pd(x0 + 4 * q, a0[q]);
      _mm256_storeu_pd(x1 + 4 * q, a1[q]);
      sum[q] = _mm256_fmadd_pd(a0[q], a0[q], sum[q]);
      sum[q] = _mm256_fmadd_pd(a1[q], a1[q], sum[q]);
    }
  }
  if (i < k) {
    const double* l0 = l_rows + i * (i + 1) / 2;
    double* x0 = b + i * n + c0;
    __m256d a0[V];
    for (int q = 0; q < V; ++q) a0[q] = _mm256_loadu_pd(x0 + 4 * q);
    for (std::size_t j = 0; j < i; ++j) {
      const double* xj = b + j * n + c0;
      const __m256d w0 = _mm256_set1_pd(l0[j]);
      for (int q = 0; q < V; ++q) a0[q] = _mm256_fnmadd_pd(w0, _mm256_loadu_pd(xj + 4 * q), a0[q]);
    }
    const __m256d inv0 = _mm256_set1_pd(1.0 / l0[i]);
    for (int q = 0; q < V; ++q) {
      a0[q] = _mm256_mul_pd(a0[q], inv0);
      _mm256_storeu_pd(x0 + 4 * q, a0[q]);
      sum[q] = _mm256_fmadd_pd(a0[q], a0[q], sum[q]);
    }
  }
  for (int q = 0; q < V; ++q) _mm256_storeu_pd(out + c0 + 4 * q, sum[q]);
}

}  // namespace

void lower_solve_sqnorm(const double* l_rows, std::size_t k, double* b, std::size_t n,
                        std::span<double> out) {
  std::size_t c = 0;
  for (; c + 16 <= n; c += 16) solve_block<4>(l_rows, k, b, n, c, out.data());
  for (; c + 4 <= n; c += 4) solve_block<1>(l_rows, k, b, n, c, out.data());
  for (std::size_t t = c; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double* li = l_rows + i * (i + 1) / 2;
      double x = b[i * n + t];
      for (std::size_t j = 0; j < i; ++j) x = std::fma(-li[j], b[j * n + t], x);
      x *= 1.0 / li[i];
      b[i * n + t] = x;
      acc = std::fma(x, x, acc);
    }
    out[t] = acc;
  }
}

}  // namespace nso::simd::avx2
