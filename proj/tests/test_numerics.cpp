#include <algorithm>
#include <limits>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mihst/grad_check.hpp"
#include "mihst/ops.hpp"
#include "support.hpp"

using namespace mihst;
using testing::random_tensor;

namespace {

// Contract an op output with fixed random weights so every output entry
// carries a distinct gradient.
Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, random_tensor(y.rows(), y.cols(), rng)));
}

double check(const std::function<Tensor()>& f, std::vector<Tensor> params) {
  return grad_check(f, std::move(params), 1e-5).max_rel_error;
}

}  // namespace

TEST_CASE("tensor construction and shape contracts") {
  Tensor z = Tensor::zeros({2, 3}, true);
  CHECK(z.size() == 6);
  CHECK(z.rows() == 2);
  CHECK(z.cols() == 3);
  CHECK(z.grad().size() == z.size());
  CHECK(Tensor::zeros({2, 3}).grad().empty());
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), DimensionError);
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(m(1, 0) == 3.0);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  CHECK_THROWS(m.item());
}

TEST_CASE("matmul") {
  Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor c = matmul(eye, a);
  CHECK(std::vector<double>(c.data().begin(), c.data().end()) == std::vector<double>{1, 2, 3, 4});
  CHECK(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})).item() == 11.0);

  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }

  std::mt19937_64 rng(3);
  Tensor x = random_tensor(3, 4, rng, true), w = random_tensor(4, 2, rng, true);
  CHECK(check([&] { return probe(matmul(x, w)); }, {x, w}) < 1e-6);
  Tensor y = random_tensor(2, 4, rng, true);
  CHECK(check([&] { return probe(matmul_nt(x, y)); }, {x, y}) < 1e-6);
  CHECK(check([&] { return probe(transpose(x)); }, {x}) < 1e-6);
}

TEST_CASE("elementwise op gradients") {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor(3, 4, rng, true), b = random_tensor(3, 4, rng, true);
  Tensor bias = random_tensor(1, 4, rng, true);
  CHECK(check([&] { return probe(add(a, b)); }, {a, b}) < 1e-6);
  CHECK(check([&] { return probe(sub(a, b)); }, {a, b}) < 1e-6);
  CHECK(check([&] { return probe(mul(a, b)); }, {a, b}) < 1e-6);
  CHECK(check([&] { return probe(scale(a, -1.7)); }, {a}) < 1e-6);
  CHECK(check([&] { return probe(add_row(a, bias)); }, {a, bias}) < 1e-6);
  CHECK(check([&] { return probe(rowwise_dot(a, b)); }, {a, b}) < 1e-6);
  CHECK(check([&] { return probe(sigmoid(a)); }, {a}) < 1e-6);
  CHECK(check([&] { return probe(gelu(a)); }, {a}) < 1e-6);
  CHECK(check([&] { return mean(a); }, {a}) < 1e-6);
}

TEST_CASE("leaky_relu values and gradient away from the kink") {
  CHECK(leaky_relu(Tensor::scalar(3.0), 0.01).item() == 3.0);
  CHECK(leaky_relu(Tensor::scalar(-2.0), 0.01).item() == doctest::Approx(-0.02).epsilon(1e-15));
  for (double s : {0.0, 0.01, 0.3}) CHECK(leaky_relu(Tensor::scalar(0.0), s).item() == 0.0);
  CHECK_THROWS(leaky_relu(Tensor::scalar(1.0), -0.1));

  // entries at least 1e-3 from zero so the finite difference never straddles the kink
  std::mt19937_64 rng(11);
  Tensor x = random_tensor(4, 5, rng, true);
  for (auto& v : x.data_mut())
    if (std::fabs(v) < 1e-3) v = 0.5;
  CHECK(check([&] { return probe(leaky_relu(x, 0.01)); }, {x}) < 1e-6);

  // subgradient 1 at exactly zero
  Tensor z = Tensor::scalar(0.0, true);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = leaky_relu(z, 0.01);
  }
  tape.backward(y);
  CHECK(z.grad()[0] == 1.0);
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  const double tiny = sigmoid(Tensor::scalar(-50.0)).item();
  CHECK(tiny > 0.0);
  CHECK(tiny <= 1e-21);
  CHECK(std::fabs(sigmoid(Tensor::scalar(1.0)).item() - 1.0 / (1.0 + std::exp(-1.0))) < 1e-12);
  for (double x : {-700.0, 700.0}) CHECK(std::isfinite(sigmoid(Tensor::scalar(x)).item()));
}

TEST_CASE("masked_softmax") {
  Tensor p = masked_softmax(Tensor::matrix({{0, 0, 0}}), std::vector<bool>{true, true, true});
  for (double v : p.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  p = masked_softmax(Tensor::matrix({{5, 5}}), std::vector<bool>{true, false});
  CHECK(p(0, 0) == 1.0);
  CHECK(p(0, 1) == 0.0);

  p = masked_softmax(Tensor::matrix({{1, 2, 3}}), std::vector<bool>{true, true, true});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) CHECK(std::fabs(p(0, i) - std::exp(i + 1.0) / z) < 1e-12);

  CHECK_THROWS_WITH(masked_softmax(Tensor::matrix({{1, 2}}), std::vector<bool>{false, false}),
                    doctest::Contains("empty attention context"));

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor s = random_tensor(6, 6, rng, false, -30.0, 30.0);
    AttentionMask m = AttentionMask::causal(6);
    Tensor q = masked_softmax(s, m);
    for (std::size_t r = 0; r < 6; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 6; ++c) {
        if (c > r) CHECK(q(r, c) == 0.0);
        total += q(r, c);
      }
      CHECK(std::fabs(total - 1.0) < 1e-12);
    }
  }

  Tensor s = random_tensor(3, 5, rng, true);
  AttentionMask m(3, 5, {true, false, true, true, false, true, true, true, true, true, false, false, true, false, true});
  CHECK(check([&] { return probe(masked_softmax(s, m)); }, {s}) < 1e-6);
}

TEST_CASE("layer_norm") {
  std::mt19937_64 rng(17);
  Tensor x = random_tensor(3, 6, rng, true);
  Tensor g = random_tensor(1, 6, rng, true, 0.5, 1.5), b = random_tensor(1, 6, rng, true);
  Tensor y = layer_norm(x, Tensor::from_data({1, 6}, std::vector<double>(6, 1.0)),
                        Tensor::zeros({1, 6}));
  for (std::size_t r = 0; r < 3; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 6; ++c) m += y(r, c);
    m /= 6.0;
    for (std::size_t c = 0; c < 6; ++c) v += (y(r, c) - m) * (y(r, c) - m);
    CHECK(std::fabs(m) < 1e-12);
    CHECK(v / 6.0 == doctest::Approx(1.0).epsilon(1e-3));
  }
  CHECK(check([&] { return probe(layer_norm(x, g, b)); }, {x, g, b}) < 1e-6);
}

TEST_CASE("rowgroup_max") {
  Tensor y = rowgroup_max(Tensor::matrix({{1, 2}, {3, 0}}));
  CHECK(y(0, 0) == 3.0);
  CHECK(y(0, 1) == 2.0);
  Tensor single = Tensor::matrix({{4, -1, 2}});
  y = rowgroup_max(single);
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{4, -1, 2});
  CHECK_THROWS_WITH(rowgroup_max(Tensor::zeros({0, 2})), doctest::Contains("empty pooling group"));

  Tensor ties = Tensor::matrix({{1, 1}, {1, 1}}, true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum(rowgroup_max(ties));
  }
  tape.backward(loss);
  CHECK(std::vector<double>(ties.grad().begin(), ties.grad().end()) == std::vector<double>{1, 1, 0, 0});

  std::mt19937_64 rng(19);
  Tensor x = random_tensor(4, 3, rng, true);
  CHECK(check([&] { return probe(rowgroup_max(x)); }, {x}) < 1e-6);

  // row permutation leaves the values unchanged
  for (int trial = 0; trial < 20; ++trial) {
    Tensor r = random_tensor(5, 4, rng);
    std::vector<std::size_t> perm = {0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor a = rowgroup_max(r), b = rowgroup_max(gather_rows(r, perm));
    CHECK(std::vector<double>(a.data().begin(), a.data().end()) ==
          std::vector<double>(b.data().begin(), b.data().end()));
  }
}

TEST_CASE("structural op gradients") {
  std::mt19937_64 rng(23);
  Tensor table = random_tensor(5, 3, rng, true);
  const std::size_t ids[] = {4, 0, 4, 2};
  CHECK(check([&] { return probe(gather_rows(table, ids)); }, {table}) < 1e-6);
  Tensor x = random_tensor(4, 6, rng, true), y = random_tensor(2, 6, rng, true),
         w = random_tensor(4, 2, rng, true);
  CHECK(check([&] { return probe(slice_rows(x, 1, 2)); }, {x}) < 1e-6);
  CHECK(check([&] { return probe(slice_cols(x, 2, 3)); }, {x}) < 1e-6);
  CHECK(check([&] { const Tensor p[] = {x, y}; return probe(concat_rows(p)); }, {x, y}) < 1e-6);
  CHECK(check([&] { const Tensor p[] = {x, w}; return probe(concat_cols(p)); }, {x, w}) < 1e-6);
  CHECK(check([&] { return probe(reshape(x, {3, 8})); }, {x}) < 1e-6);
  CHECK_THROWS_AS(reshape(x, {5, 5}), DimensionError);
  CHECK_THROWS_AS(slice_rows(x, 3, 2), DimensionError);
}

TEST_CASE("tape semantics") {
  std::mt19937_64 rng(29);
  Tensor a = random_tensor(2, 3, rng, true), b = random_tensor(3, 2, rng, true);
  Tensor c = random_tensor(2, 2, rng, false);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum(mul(matmul(a, b), c));
  }
  CHECK(tape.size() == 3);
  tape.backward(loss);
  CHECK(tape.visits() == tape.size());
  bool any_a = false, any_b = false;
  for (double v : a.grad()) any_a |= v != 0.0;
  for (double v : b.grad()) any_b |= v != 0.0;
  CHECK(any_a);
  CHECK(any_b);
  CHECK(c.grad().empty());

  CHECK_THROWS_WITH(tape.backward(loss), doctest::Contains("twice"));
  tape.reset();
  CHECK(tape.size() == 0);

  // nothing is recorded without an active tape
  Tape idle;
  Tensor outside = matmul(a, b);
  CHECK(idle.size() == 0);
  CHECK_FALSE(outside.requires_grad());
}

TEST_CASE("grad_check contract") {
  Tensor v = Tensor::row({0.3, -1.2, 2.0}, true);
  auto r = grad_check([&] { return sum(mul(v, v)); }, {v}, 1e-5);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.coordinates == 3);

  Tensor w = Tensor::row({1.0, 2.0}, true);
  r = grad_check([&] { return Tensor::scalar(4.0); }, {w}, 1e-5);
  CHECK(r.max_rel_error == 0.0);
  CHECK(r.analytic == 0.0);
  CHECK(r.numeric == 0.0);

  Tensor u = Tensor::row({1.0}, true);
  CHECK_THROWS(grad_check([&] { return scale(sum(u), std::numeric_limits<double>::infinity()); }, {u}));
}

TEST_CASE("forward ops keep finite inputs finite") {
  std::mt19937_64 rng(31);
  Tensor x = random_tensor(4, 4, rng, false, -300.0, 300.0);
  for (const Tensor& y : {sigmoid(x), gelu(x), leaky_relu(x),
                          masked_softmax(x, AttentionMask::causal(4)),
                          layer_norm(x, Tensor::from_data({1, 4}, std::vector<double>(4, 1.0)), Tensor::zeros({1, 4}))})
    for (double v : y.data()) CHECK(std::isfinite(v));
}
