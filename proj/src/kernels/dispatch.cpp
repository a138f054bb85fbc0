#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "mihst/kernels.hpp"

namespace mihst::kernels {

bool compiled(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(MIHST_WITH_AVX2)
      return true;
#else
      return false;
#endif
    case Isa::neon:
#if defined(MIHST_WITH_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

bool supported(Isa isa) {
  if (!compiled(isa)) return false;
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(MIHST_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
      // Advanced SIMD is mandatory on aarch64.
      return true;
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw std::runtime_error("kernel ISA not available on this build/CPU");
  }
  switch (isa) {
#if defined(MIHST_WITH_AVX2)
    case Isa::avx2:
      return detail::avx2_table();
#endif
#if defined(MIHST_WITH_NEON)
    case Isa::neon:
      return detail::neon_table();
#endif
    default:
      return detail::scalar_table();
  }
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  throw std::invalid_argument("unknown kernel ISA '" + std::string(name) + "'");
}

namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("MIHST_ISA"); env != nullptr && *env != '\0') {
    return &table(parse_isa(env));
  }
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (supported(isa)) return &table(isa);
  }
  return &detail::scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> s{pick_default()};
  return s;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void set_active(Isa isa) { slot().store(&table(isa), std::memory_order_relaxed); }

}  // namespace mihst::kernels
