#include <atomic>
#include <cstdlib>
#include <string>

#include "kgtopo/ids.hpp"
#include "kgtopo/simd/kernels.hpp"

namespace kgtopo::simd {

#ifdef KGTOPO_HAVE_AVX2
const KernelTable& avx2_kernel_table();
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "?";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  throw InvalidArgument("unknown kernel ISA '" + std::string(name) + "' (expected scalar or avx2)");
}

const KernelTable* avx2_kernels() {
#if defined(KGTOPO_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_kernels() {
  if (const char* env = std::getenv("KGTOPO_KERNEL")) {
    const Isa isa = parse_isa(env);
    if (isa == Isa::kScalar) return &scalar_kernels();
    if (auto* k = avx2_kernels()) return k;
    throw InvalidArgument("KGTOPO_KERNEL=avx2 but AVX2 is unavailable");
  }
  if (auto* k = avx2_kernels()) return k;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_kernels()};
  return table;
}

}  // namespace

const KernelTable& active_kernels() { return *current().load(std::memory_order_acquire); }

void select_kernels(Isa isa) {
  if (isa == Isa::kScalar) {
    current().store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  auto* k = avx2_kernels();
  if (k == nullptr) throw InvalidArgument("AVX2 kernels are unavailable on this build or CPU");
  current().store(k, std::memory_order_release);
}

}  // namespace kgtopo::simd
