#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "mihst/kernels.hpp"

using namespace mihst::kernels;

namespace {

std::vector<double> randv(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (Isa i : {Isa::avx2, Isa::neon})
    if (supported(i)) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("scalar gemm against a naive triple loop") {
  std::mt19937_64 rng(1);
  const auto& s = table(Isa::scalar);
  for (std::size_t m : {1u, 3u, 7u})
    for (std::size_t k : {1u, 4u, 9u})
      for (std::size_t n : {1u, 5u, 13u}) {
        auto a = randv(m * k, rng), b = randv(k * n, rng);
        std::vector<double> c(m * n, 0.0), ref(m * n, 0.0);
        s.gemm(a.data(), b.data(), c.data(), m, k, n, false);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            ref[i * n + j] = acc;
          }
        CHECK(same_bits(c, ref));
      }
}

TEST_CASE("gemm accumulate adds onto the output") {
  const auto& s = table(Isa::scalar);
  std::vector<double> a = {1, 2}, b = {3, 4}, c = {10};
  s.gemm(a.data(), b.data(), c.data(), 1, 2, 1, true);
  CHECK(c[0] == 21.0);
  s.gemm_tn(a.data(), b.data(), c.data(), 1, 2, 1, false);
  CHECK(c[0] == 11.0);
}

TEST_CASE("vector kernels match the scalar reference") {
  const auto isas = vector_isas();
  if (isas.empty()) {
    MESSAGE("no vector ISA available; only the scalar table is exercised");
    return;
  }
  std::mt19937_64 rng(7);
  const auto& s = table(Isa::scalar);
  for (Isa isa : isas) {
    const auto& v = table(isa);
    CAPTURE(v.name);
    for (std::size_t m : {1u, 2u, 5u})
      for (std::size_t k : {1u, 3u, 8u, 17u})
        for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 8u, 11u, 16u, 33u}) {
          auto a = randv(m * k, rng), b = randv(k * n, rng), at = randv(k * m, rng);
          for (bool acc : {false, true}) {
            auto c0 = randv(m * n, rng);
            auto c1 = c0;
            s.gemm(a.data(), b.data(), c0.data(), m, k, n, acc);
            v.gemm(a.data(), b.data(), c1.data(), m, k, n, acc);
            CHECK(same_bits(c0, c1));
            auto d0 = randv(m * n, rng);
            auto d1 = d0;
            s.gemm_tn(at.data(), b.data(), d0.data(), m, k, n, acc);
            v.gemm_tn(at.data(), b.data(), d1.data(), m, k, n, acc);
            CHECK(same_bits(d0, d1));
          }
        }
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 31u, 64u, 101u}) {
      auto x = randv(n, rng), y = randv(n, rng);
      auto y0 = y, y1 = y;
      s.axpy(0.37, x.data(), y0.data(), n);
      v.axpy(0.37, x.data(), y1.data(), n);
      CHECK(same_bits(y0, y1));
      std::vector<double> o0(n), o1(n);
      s.add(x.data(), y.data(), o0.data(), n);
      v.add(x.data(), y.data(), o1.data(), n);
      CHECK(same_bits(o0, o1));
      s.mul(x.data(), y.data(), o0.data(), n);
      v.mul(x.data(), y.data(), o1.data(), n);
      CHECK(same_bits(o0, o1));
      s.scale(-1.5, x.data(), o0.data(), n);
      v.scale(-1.5, x.data(), o1.data(), n);
      CHECK(same_bits(o0, o1));

      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::fabs(x[i] * y[i]);
      CHECK(std::fabs(s.dot(x.data(), y.data(), n) - v.dot(x.data(), y.data(), n)) <= 1e-14 * (mag + 1.0));
      const double sq = s.sum_squares(x.data(), n);
      CHECK(std::fabs(sq - v.sum_squares(x.data(), n)) <= 1e-14 * (sq + 1.0));
    }
  }
}

TEST_CASE("ISA names parse and the active table can be switched") {
  CHECK(parse_isa("scalar") == Isa::scalar);
  CHECK(parse_isa("avx2") == Isa::avx2);
  CHECK(parse_isa("neon") == Isa::neon);
  CHECK_THROWS(parse_isa("sse9"));

  const Isa before = active().isa;
  set_active(Isa::scalar);
  CHECK(active().isa == Isa::scalar);
  set_active(before);
  CHECK(active().isa == before);

  if (!compiled(Isa::neon)) CHECK_THROWS(table(Isa::neon));
}
