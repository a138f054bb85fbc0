#include "mihst/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mihst/kernels.hpp"

namespace mihst {
namespace {

Shape mat(std::size_t r, std::size_t c) { return {r, c}; }

std::string dims(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + dims(a) + " and " +
                         dims(b) + " differ");
  }
}

std::vector<double> transposed(std::span<const double> x, std::size_t r,
                               std::size_t c) {
  std::vector<double> t(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = x[i * c + j];
  return t;
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D dfdx) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xd[i]);
  return make_result(mat(x.rows(), x.cols()), std::move(out), {x},
                     [x, dfdx](const Tensor& y) {
                       if (!x.requires_grad()) return;
                       auto g = y.grad();
                       auto xd = x.data();
                       auto yd = y.data();
                       auto gx = x.grad_mut();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gx[i] += g[i] * dfdx(xd[i], yd[i]);
                     });
}

}  // namespace

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols,
                             std::vector<bool> allow)
    : rows_(rows), cols_(cols), allow_(std::move(allow)) {
  if (allow_.size() != rows_ * cols_) {
    throw DimensionError("attention mask size does not match its shape");
  }
}

AttentionMask AttentionMask::keys(std::vector<bool> allow) {
  const std::size_t n = allow.size();
  return AttentionMask(1, n, std::move(allow));
}

AttentionMask AttentionMask::causal(std::size_t n) {
  std::vector<bool> allow(n * n, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) allow[i * n + j] = true;
  return AttentionMask(n, n, std::move(allow));
}

AttentionMask AttentionMask::prefix(std::size_t n, std::size_t visible) {
  std::vector<bool> allow(n, false);
  for (std::size_t j = 0; j < std::min(n, visible); ++j) allow[j] = true;
  return AttentionMask(1, n, std::move(allow));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ for " + dims(a) +
                         " and " + dims(b));
  }
  std::vector<double> c(m * n);
  kernels::active().gemm(a.data().data(), b.data().data(), c.data(), m, k, n, false);
  return make_result(mat(m, n), std::move(c), {a, b},
                     [a, b, m, k, n](const Tensor& out) {
                       const auto& kt = kernels::active();
                       auto g = out.grad();
                       if (a.requires_grad()) {
                         // dA[m x k] += dC[m x n] * B^T
                         auto bt = transposed(b.data(), k, n);
                         kt.gemm(g.data(), bt.data(), a.grad_mut().data(), m, n, k, true);
                       }
                       if (b.requires_grad()) {
                         // dB[k x n] += A^T * dC
                         kt.gemm_tn(a.data().data(), g.data(), b.grad_mut().data(), k, m,
                                    n, true);
                       }
                     });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ for " + dims(a) +
                         " and " + dims(b) + "^T");
  }
  auto bt = transposed(b.data(), n, k);
  std::vector<double> c(m * n);
  kernels::active().gemm(a.data().data(), bt.data(), c.data(), m, k, n, false);
  return make_result(mat(m, n), std::move(c), {a, b},
                     [a, b, m, k, n](const Tensor& out) {
                       const auto& kt = kernels::active();
                       auto g = out.grad();
                       if (a.requires_grad()) {
                         // dA[m x k] += dC[m x n] * B[n x k]
                         kt.gemm(g.data(), b.data().data(), a.grad_mut().data(), m, n, k,
                                 true);
                       }
                       if (b.requires_grad()) {
                         // dB[n x k] += dC^T * A
                         kt.gemm_tn(g.data(), a.data().data(), b.grad_mut().data(), n, m,
                                    k, true);
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  return make_result(mat(c, r), transposed(a.data(), r, c), {a},
                     [a, r, c](const Tensor& out) {
                       if (!a.requires_grad()) return;
                       auto g = out.grad();
                       auto ga = a.grad_mut();
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  kernels::active().add(a.data().data(), b.data().data(), out.data(), out.size());
  return make_result(mat(a.rows(), a.cols()), std::move(out), {a, b},
                     [a, b](const Tensor& y) {
                       const auto& kt = kernels::active();
                       auto g = y.grad();
                       if (a.requires_grad()) kt.axpy(1.0, g.data(), a.grad_mut().data(), g.size());
                       if (b.requires_grad()) kt.axpy(1.0, g.data(), b.grad_mut().data(), g.size());
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  return make_result(mat(a.rows(), a.cols()), std::move(out), {a, b},
                     [a, b](const Tensor& y) {
                       const auto& kt = kernels::active();
                       auto g = y.grad();
                       if (a.requires_grad()) kt.axpy(1.0, g.data(), a.grad_mut().data(), g.size());
                       if (b.requires_grad()) kt.axpy(-1.0, g.data(), b.grad_mut().data(), g.size());
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  kernels::active().mul(a.data().data(), b.data().data(), out.data(), out.size());
  return make_result(mat(a.rows(), a.cols()), std::move(out), {a, b},
                     [a, b](const Tensor& y) {
                       auto g = y.grad();
                       if (a.requires_grad()) {
                         auto ga = a.grad_mut();
                         auto bd = b.data();
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
                       }
                       if (b.requires_grad()) {
                         auto gb = b.grad_mut();
                         auto ad = a.data();
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
                       }
                     });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  kernels::active().scale(s, a.data().data(), out.data(), out.size());
  return make_result(mat(a.rows(), a.cols()), std::move(out), {a},
                     [a, s](const Tensor& y) {
                       if (!a.requires_grad()) return;
                       auto g = y.grad();
                       kernels::active().axpy(s, g.data(), a.grad_mut().data(), g.size());
                     });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.size() != c) {
    throw DimensionError("add_row: bias " + dims(bias) + " does not fit " + dims(x));
  }
  std::vector<double> out(x.size());
  const auto& kt = kernels::active();
  for (std::size_t i = 0; i < r; ++i)
    kt.add(x.data().data() + i * c, bias.data().data(), out.data() + i * c, c);
  return make_result(mat(r, c), std::move(out), {x, bias},
                     [x, bias, r, c](const Tensor& y) {
                       const auto& kt = kernels::active();
                       auto g = y.grad();
                       if (x.requires_grad()) kt.axpy(1.0, g.data(), x.grad_mut().data(), g.size());
                       if (bias.requires_grad()) {
                         auto gb = bias.grad_mut();
                         for (std::size_t i = 0; i < r; ++i)
                           kt.axpy(1.0, g.data() + i * c, gb.data(), c);
                       }
                     });
}

Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "rowwise_dot");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += ad[i * c + j] * bd[i * c + j];
    out[i] = s;
  }
  return make_result(mat(r, 1), std::move(out), {a, b},
                     [a, b, r, c](const Tensor& y) {
                       auto g = y.grad();
                       const auto& kt = kernels::active();
                       for (std::size_t i = 0; i < r; ++i) {
                         if (a.requires_grad())
                           kt.axpy(g[i], b.data().data() + i * c, a.grad_mut().data() + i * c, c);
                         if (b.requires_grad())
                           kt.axpy(g[i], a.data().data() + i * c, b.grad_mut().data() + i * c, c);
                       }
                     });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  if (!(negative_slope >= 0.0)) throw ConfigError("leaky_relu: negative_slope must be >= 0");
  return unary(
      x, [negative_slope](double v) { return v >= 0.0 ? v : negative_slope * v; },
      [negative_slope](double v, double) { return v >= 0.0 ? 1.0 : negative_slope; });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  return unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v))); },
      [](double v, double) {
        const double th = std::tanh(c * (v + k * v * v * v));
        return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * c * (1.0 + 3.0 * k * v * v);
      });
}

Tensor masked_softmax(const Tensor& scores, const AttentionMask& mask) {
  const std::size_t r = scores.rows(), c = scores.cols();
  if (mask.cols() != c || (mask.rows() != 1 && mask.rows() != r)) {
    throw DimensionError("masked_softmax: mask [" + std::to_string(mask.rows()) + "x" +
                         std::to_string(mask.cols()) + "] does not fit scores " +
                         dims(scores));
  }
  std::vector<double> out(r * c, 0.0);
  auto s = scores.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask.allowed(i, j)) {
        mx = std::max(mx, s[i * c + j]);
        any = true;
      }
    }
    if (!any) throw Error("empty attention context");
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask.allowed(i, j)) {
        const double e = std::exp(s[i * c + j] - mx);
        out[i * c + j] = e;
        z += e;
      }
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  return make_result(mat(r, c), std::move(out), {scores},
                     [scores, r, c](const Tensor& y) {
                       if (!scores.requires_grad()) return;
                       auto g = y.grad();
                       auto yd = y.data();
                       auto gs = scores.grad_mut();
                       for (std::size_t i = 0; i < r; ++i) {
                         double inner = 0.0;
                         for (std::size_t j = 0; j < c; ++j) inner += yd[i * c + j] * g[i * c + j];
                         for (std::size_t j = 0; j < c; ++j)
                           gs[i * c + j] += yd[i * c + j] * (g[i * c + j] - inner);
                       }
                     });
}

Tensor masked_softmax(const Tensor& scores, const std::vector<bool>& mask) {
  return masked_softmax(scores, AttentionMask::keys(mask));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gamma.size() != c || beta.size() != c) {
    throw DimensionError("layer_norm: affine parameters do not fit " + dims(x));
  }
  std::vector<double> out(r * c);
  std::vector<double> xhat(r * c);
  std::vector<double> inv_std(r);
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xd[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xd[i * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xd[i * c + j] - mu) * inv_std[i];
      out[i * c + j] = gd[j] * xhat[i * c + j] + bd[j];
    }
  }
  return make_result(
      mat(r, c), std::move(out), {x, gamma, beta},
      [x, gamma, beta, r, c, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](const Tensor& y) {
        auto g = y.grad();
        auto gd = gamma.data();
        if (gamma.requires_grad()) {
          auto gg = gamma.grad_mut();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat[i * c + j];
        }
        if (beta.requires_grad()) {
          auto gb = beta.grad_mut();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
        if (x.requires_grad()) {
          auto gx = x.grad_mut();
          const double n = static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = g[i * c + j] * gd[j];
              s1 += dxh;
              s2 += dxh * xhat[i * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = g[i * c + j] * gd[j];
              gx[i * c + j] += inv_std[i] / n * (n * dxh - s1 - xhat[i * c + j] * s2);
            }
          }
        }
      });
}

Tensor rowgroup_max(const Tensor& rows) {
  if (rows.size() == 0 || rows.rows() == 0) throw Error("empty pooling group");
  const std::size_t g = rows.rows(), d = rows.cols();
  std::vector<double> out(d);
  std::vector<std::size_t> arg(d, 0);
  auto x = rows.data();
  for (std::size_t j = 0; j < d; ++j) {
    double best = x[j];
    for (std::size_t i = 1; i < g; ++i) {
      if (x[i * d + j] > best) {  // strict: ties stay on the first row
        best = x[i * d + j];
        arg[j] = i;
      }
    }
    out[j] = best;
  }
  return make_result(mat(1, d), std::move(out), {rows},
                     [rows, d, arg = std::move(arg)](const Tensor& y) {
                       if (!rows.requires_grad()) return;
                       auto gy = y.grad();
                       auto gx = rows.grad_mut();
                       for (std::size_t j = 0; j < d; ++j) gx[arg[j] * d + j] += gy[j];
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  const std::size_t n = table.rows(), c = table.cols();
  std::vector<double> out(ids.size() * c);
  auto td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(ids[i]) +
                           " out of range for " + dims(table));
    }
    std::copy_n(td.begin() + static_cast<std::ptrdiff_t>(ids[i] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return make_result(mat(ids.size(), c), std::move(out), {table},
                     [table, c, idx = std::vector<std::size_t>(ids.begin(), ids.end())](
                         const Tensor& y) {
                       if (!table.requires_grad()) return;
                       auto g = y.grad();
                       auto gt = table.grad_mut();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) gt[idx[i] * c + j] += g[i * c + j];
                     });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  const std::size_t c = x.cols();
  if (begin + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + dims(x));
  }
  auto xd = x.data();
  std::vector<double> out(xd.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          xd.begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  return make_result(mat(count, c), std::move(out), {x},
                     [x, begin, c](const Tensor& y) {
                       if (!x.requires_grad()) return;
                       auto g = y.grad();
                       kernels::active().axpy(1.0, g.data(), x.grad_mut().data() + begin * c,
                                              g.size());
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  const std::size_t r = x.rows(), c = x.cols();
  if (begin + count > c) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + dims(x));
  }
  std::vector<double> out(r * count);
  auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = xd[i * c + begin + j];
  return make_result(mat(r, count), std::move(out), {x},
                     [x, begin, count, r, c](const Tensor& y) {
                       if (!x.requires_grad()) return;
                       auto g = y.grad();
                       auto gx = x.grad_mut();
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < count; ++j)
                           gx[i * c + begin + j] += g[i * count + j];
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) {
      throw DimensionError("concat_rows: column counts differ (" + dims(parts[0]) +
                           " vs " + dims(p) + ")");
    }
    r += p.rows();
  }
  std::vector<double> out;
  out.reserve(r * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor> saved(parts.begin(), parts.end());
  return make_result(mat(r, c), std::move(out), parts, [saved](const Tensor& y) {
    auto g = y.grad();
    std::size_t off = 0;
    for (const auto& p : saved) {
      if (p.requires_grad())
        kernels::active().axpy(1.0, g.data() + off, p.grad_mut().data(), p.size());
      off += p.size();
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) {
      throw DimensionError("concat_cols: row counts differ (" + dims(parts[0]) + " vs " +
                           dims(p) + ")");
    }
    c += p.cols();
  }
  std::vector<double> out(r * c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.cols();
    auto pd = p.data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pc; ++j) out[i * c + off + j] = pd[i * pc + j];
    off += pc;
  }
  std::vector<Tensor> saved(parts.begin(), parts.end());
  return make_result(mat(r, c), std::move(out), parts, [saved, r, c](const Tensor& y) {
    auto g = y.grad();
    std::size_t off = 0;
    for (const auto& p : saved) {
      const std::size_t pc = p.cols();
      if (p.requires_grad()) {
        auto gp = p.grad_mut();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += g[i * c + off + j];
      }
      off += pc;
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  return make_result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()),
                     {x}, [x](const Tensor& y) {
                       if (!x.requires_grad()) return;
                       auto g = y.grad();
                       kernels::active().axpy(1.0, g.data(), x.grad_mut().data(), g.size());
                     });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result(mat(1, 1), {s}, {x}, [x](const Tensor& y) {
    if (!x.requires_grad()) return;
    const double g = y.grad()[0];
    for (double& v : x.grad_mut()) v += g;
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace mihst
