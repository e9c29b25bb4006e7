// AVX2 kernels. Built with -mavx2 and only reached after a runtime CPU check.
// Eight floats per iteration widened into two 4-lane double accumulators;
// reduction order is (acc0 + acc1), then lanes ((0 + 1) + (2 + 3)), then the
// scalar tail.

#include <immintrin.h>

#include <cmath>

#include "kgtopo/simd/kernels.hpp"

namespace kgtopo::simd {
namespace {

inline double hsum(__m256d a, __m256d b) {
  const __m256d s = _mm256_add_pd(a, b);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, s);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

inline __m256d abs_pd(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

inline void load8(const float* t, __m256d& lo, __m256d& hi) {
  const __m256 f = _mm256_loadu_ps(t);
  lo = _mm256_cvtps_pd(_mm256_castps256_ps128(f));
  hi = _mm256_cvtps_pd(_mm256_extractf128_ps(f, 1));
}

double dot(const double* q, const float* t, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d tlo, thi;
    load8(t + i, tlo, thi);
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(q + i), tlo));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(q + i + 4), thi));
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += q[i] * static_cast<double>(t[i]);
  return hsum(acc0, acc1) + tail;
}

double l1_diff(const double* q, const float* t, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d tlo, thi;
    load8(t + i, tlo, thi);
    acc0 = _mm256_add_pd(acc0, abs_pd(_mm256_sub_pd(_mm256_loadu_pd(q + i), tlo)));
    acc1 = _mm256_add_pd(acc1, abs_pd(_mm256_sub_pd(_mm256_loadu_pd(q + i + 4), thi)));
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += std::abs(q[i] - static_cast<double>(t[i]));
  return hsum(acc0, acc1) + tail;
}

double l2sq_diff(const double* q, const float* t, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d tlo, thi;
    load8(t + i, tlo, thi);
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(q + i), tlo);
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(q + i + 4), thi);
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(d0, d0));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(d1, d1));
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = q[i] - static_cast<double>(t[i]);
    tail += d * d;
  }
  return hsum(acc0, acc1) + tail;
}

double l1_diff_scaled(const double* q, const float* t, const double* w, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d tlo, thi;
    load8(t + i, tlo, thi);
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(q + i), _mm256_mul_pd(_mm256_loadu_pd(w + i), tlo));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(q + i + 4), _mm256_mul_pd(_mm256_loadu_pd(w + i + 4), thi));
    acc0 = _mm256_add_pd(acc0, abs_pd(d0));
    acc1 = _mm256_add_pd(acc1, abs_pd(d1));
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += std::abs(q[i] - w[i] * static_cast<double>(t[i]));
  return hsum(acc0, acc1) + tail;
}

double l2sq_diff_scaled(const double* q, const float* t, const double* w, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d tlo, thi;
    load8(t + i, tlo, thi);
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(q + i), _mm256_mul_pd(_mm256_loadu_pd(w + i), tlo));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(q + i + 4), _mm256_mul_pd(_mm256_loadu_pd(w + i + 4), thi));
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(d0, d0));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(d1, d1));
  }
  double tail = 0.0;
  for (; i < n; ++i) {
    const double d = q[i] - w[i] * static_cast<double>(t[i]);
    tail += d * d;
  }
  return hsum(acc0, acc1) + tail;
}

double complex_abs_diff(const double* q_re, const double* q_im, const float* t_re,
                        const float* t_im, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    __m256d rlo, rhi, ilo, ihi;
    load8(t_re + k, rlo, rhi);
    load8(t_im + k, ilo, ihi);
    const __m256d dr0 = _mm256_sub_pd(_mm256_loadu_pd(q_re + k), rlo);
    const __m256d dr1 = _mm256_sub_pd(_mm256_loadu_pd(q_re + k + 4), rhi);
    const __m256d di0 = _mm256_sub_pd(_mm256_loadu_pd(q_im + k), ilo);
    const __m256d di1 = _mm256_sub_pd(_mm256_loadu_pd(q_im + k + 4), ihi);
    acc0 = _mm256_add_pd(acc0, _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(dr0, dr0), _mm256_mul_pd(di0, di0))));
    acc1 = _mm256_add_pd(acc1, _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(dr1, dr1), _mm256_mul_pd(di1, di1))));
  }
  double tail = 0.0;
  for (; k < n; ++k) {
    const double dr = q_re[k] - static_cast<double>(t_re[k]);
    const double di = q_im[k] - static_cast<double>(t_im[k]);
    tail += std::sqrt(dr * dr + di * di);
  }
  return hsum(acc0, acc1) + tail;
}

constexpr KernelTable kAvx2{Isa::kAvx2, dot, l1_diff, l2sq_diff, l1_diff_scaled,
                            l2sq_diff_scaled, complex_abs_diff};

}  // namespace

const KernelTable& avx2_kernel_table() { return kAvx2; }

}  // namespace kgtopo::simd
