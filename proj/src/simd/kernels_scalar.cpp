// Scalar reference kernels. The AVX2 variants are tested against these.
#include <algorithm>
#include <cmath>

#include "nso/simd/kernels.hpp"

namespace nso::simd::scalar {

void weighted_sq_dist(std::span<const double> x, const double* cols, std::size_t stride,
                      std::span<const double> w, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double* col = cols + j * stride;
    const double xj = x[j];
    const double wj = w[j];
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double diff = xj - col[i];
      out[i] += wj * diff * diff;
    }
  }
}

void exp_neg(std::span<double> values) {
  for (double& v : values) v = std::exp(-v);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void min_dist_update(std::span<const double> x, const double* cols, std::size_t stride,
                     std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = x[j] - cols[j * stride + i];
      acc += diff * diff;
    }
    out[i] = std::min(out[i], std::sqrt(acc));
  }
}

void lower_solve_sqnorm(const double* l_rows, std::size_t k, double* b, std::size_t n,
                        std::span<double> out) {
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double* li = l_rows + i * (i + 1) / 2;
    double* xi = b + i * n;
    for (std::size_t j = 0; j < i; ++j) {
      const double lij = li[j];
      const double* xj = b + j * n;
      for (std::size_t c = 0; c < n; ++c) xi[c] -= lij * xj[c];
    }
    const double inv = 1.0 / li[i];
    for (std::size_t c = 0; c < n; ++c) {
      xi[c] *= inv;
      out[c] += xi[c] * xi[c];
    }
  }
}

}  // namespace nso::simd::scalar
