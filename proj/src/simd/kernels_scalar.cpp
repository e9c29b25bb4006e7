// Reference kernels: one sequential 64-bit accumulator, index order.

#include <cmath>

#include "kgtopo/simd/kernels.hpp"

namespace kgtopo::simd {
namespace {

double dot(const double* q, const float* t, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += q[i] * static_cast<double>(t[i]);
  return acc;
}

double l1_diff(const double* q, const float* t, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(q[i] - static_cast<double>(t[i]));
  return acc;
}

double l2sq_diff(const double* q, const float* t, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = q[i] - static_cast<double>(t[i]);
    acc += d * d;
  }
  return acc;
}

double l1_diff_scaled(const double* q, const float* t, const double* w, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(q[i] - w[i] * static_cast<double>(t[i]));
  return acc;
}

double l2sq_diff_scaled(const double* q, const float* t, const double* w, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = q[i] - w[i] * static_cast<double>(t[i]);
    acc += d * d;
  }
  return acc;
}

double complex_abs_diff(const double* q_re, const double* q_im, const float* t_re,
                        const float* t_im, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dr = q_re[k] - static_cast<double>(t_re[k]);
    const double di = q_im[k] - static_cast<double>(t_im[k]);
    acc += std::sqrt(dr * dr + di * di);
  }
  return acc;
}

constexpr KernelTable kScalar{Isa::kScalar, dot, l1_diff, l2sq_diff, l1_diff_scaled,
                              l2sq_diff_scaled, complex_abs_diff};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace kgtopo::simd
