#pragma once

// Dense double-precision inner loops used by the tensor ops and the L1
// solver. Every routine has a scalar reference implementation; vector
// variants (AVX2 on x86-64, NEON on aarch64) are chosen once at startup.
//
// Contract shared by all variants of gemm/gemm_tn/axpy and the elementwise
// routines: each output element is accumulated in the same order as the
// scalar reference (k = 0, 1, ..., K-1) with separate multiply and add, so
// results are bitwise identical across ISAs. Only `dot` and `sum_squares`
// use lane-parallel partial sums and may differ in the last bits.

#include <cstddef>
#include <string_view>

namespace mihst::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  const char* name;

  // c[m x n] (+)= a[m x k] * b[k x n], row-major.
  void (*gemm)(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate);
  // c[m x n] (+)= a^T * b with a stored [k x m], b stored [k x n].
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n, bool accumulate);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = x + y
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  // out = x * y (elementwise)
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  // out = alpha * x
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
};

// Table for a specific ISA. Throws if that ISA was not compiled in or the
// CPU does not support it.
const KernelTable& table(Isa isa);

bool compiled(Isa isa);
bool supported(Isa isa);

// Process-wide active table. Chosen on first use: the MIHST_ISA environment
// variable (scalar|avx2|neon) if set, otherwise the widest supported ISA.
const KernelTable& active();
void set_active(Isa isa);

Isa parse_isa(std::string_view name);

namespace detail {
const KernelTable& scalar_table();
#if defined(MIHST_WITH_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(MIHST_WITH_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

}  // namespace mihst::kernels
