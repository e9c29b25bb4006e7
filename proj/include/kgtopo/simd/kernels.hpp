#pragma once

#include <cstddef>
#include <string_view>

namespace kgtopo::simd {

enum class Isa { kScalar, kAvx2 };
std::string_view to_string(Isa isa);
Isa parse_isa(std::string_view name);

/// Reduction kernels behind every scoring function. Queries are 64-bit,
/// tables 32-bit; every kernel accumulates in 64-bit. The lane layout and
/// final reduction order of each ISA are fixed, so results are reproducible
/// for a given ISA but may differ in the last bits between ISAs.
struct KernelTable {
  Isa isa;
  /// sum q[i] * t[i]
  double (*dot)(const double* q, const float* t, std::size_t n);
  /// sum |q[i] - t[i]|
  double (*l1_diff)(const double* q, const float* t, std::size_t n);
  /// sum (q[i] - t[i])^2
  double (*l2sq_diff)(const double* q, const float* t, std::size_t n);
  /// sum |q[i] - w[i] * t[i]|
  double (*l1_diff_scaled)(const double* q, const float* t, const double* w, std::size_t n);
  /// sum (q[i] - w[i] * t[i])^2
  double (*l2sq_diff_scaled)(const double* q, const float* t, const double* w, std::size_t n);
  /// sum_k |(q_re[k] - t_re[k]) + i (q_im[k] - t_im[k])|
  double (*complex_abs_diff)(const double* q_re, const double* q_im, const float* t_re,
                             const float* t_im, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Kernels used by the scoring code. Defaults to the widest supported ISA;
/// the KGTOPO_KERNEL environment variable ("scalar" or "avx2") overrides.
const KernelTable& active_kernels();
/// Throws InvalidArgument if the ISA is unavailable.
void select_kernels(Isa isa);

}  // namespace kgtopo::simd
