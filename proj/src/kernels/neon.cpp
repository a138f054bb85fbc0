#include <arm_neon.h>

#include "mihst/kernels.hpp"

namespace mihst::kernels::detail {
namespace {

template <typename Coef>
inline void gemm_row(Coef coef, const double* b, double* crow, std::size_t k,
                     std::size_t n, bool accumulate) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    float64x2_t c0, c1, c2, c3;
    if (accumulate) {
      c0 = vld1q_f64(crow + j);
      c1 = vld1q_f64(crow + j + 2);
      c2 = vld1q_f64(crow + j + 4);
      c3 = vld1q_f64(crow + j + 6);
    } else {
      c0 = c1 = c2 = c3 = vdupq_n_f64(0.0);
    }
    for (std::size_t p = 0; p < k; ++p) {
      const float64x2_t av = vdupq_n_f64(coef(p));
      const double* brow = b + p * n + j;
      // vmulq + vaddq rather than vfmaq: keeps the scalar rounding sequence.
      c0 = vaddq_f64(c0, vmulq_f64(av, vld1q_f64(brow)));
      c1 = vaddq_f64(c1, vmulq_f64(av, vld1q_f64(brow + 2)));
      c2 = vaddq_f64(c2, vmulq_f64(av, vld1q_f64(brow + 4)));
      c3 = vaddq_f64(c3, vmulq_f64(av, vld1q_f64(brow + 6)));
    }
    vst1q_f64(crow + j, c0);
    vst1q_f64(crow + j + 2, c1);
    vst1q_f64(crow + j + 4, c2);
    vst1q_f64(crow + j + 6, c3);
  }
  for (; j + 2 <= n; j += 2) {
    float64x2_t c0 = accumulate ? vld1q_f64(crow + j) : vdupq_n_f64(0.0);
    for (std::size_t p = 0; p < k; ++p) {
      c0 = vaddq_f64(c0, vmulq_f64(vdupq_n_f64(coef(p)), vld1q_f64(b + p * n + j)));
    }
    vst1q_f64(crow + j, c0);
  }
  for (; j < n; ++j) {
    double s = accumulate ? crow[j] : 0.0;
    for (std::size_t p = 0; p < k; ++p) s += coef(p) * b[p * n + j];
    crow[j] = s;
  }
}

void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    gemm_row([arow](std::size_t p) { return arow[p]; }, b, c + i * n, k, n,
             accumulate);
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    gemm_row([a, m, i](std::size_t p) { return a[p * m + i]; }, b, c + i * n,
             k, n, accumulate);
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(av, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(av, vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_squares(const double* x, std::size_t n) { return dot(x, x, n); }

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable t{Isa::neon, "neon", gemm,  gemm_tn, axpy,
                             add,       mul,    scale, dot,     sum_squares};
  return t;
}

}  // namespace mihst::kernels::detail
