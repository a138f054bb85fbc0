#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mihst/error.hpp"
#include "mihst/fusion.hpp"
#include "mihst/model.hpp"
#include "mihst/ops.hpp"
#include "support.hpp"

using namespace mihst;
using testing::random_tensor;

namespace {

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  return {t.data().begin() + r * t.cols(), t.data().begin() + (r + 1) * t.cols()};
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

FusionParams fusion_params(std::uint64_t seed, std::size_t layers = 2, std::size_t labels = 3) {
  FusionConfig cfg;
  cfg.dim = 16;
  cfg.heads = 4;
  cfg.layers = layers;
  cfg.labels = labels;
  cfg.ffn_dim = 32;
  ParamInit init(seed);
  return FusionParams::init(cfg, init);
}

}  // namespace

TEST_CASE("pool_by_timestamp") {
  SUBCASE("one group") {
    const double t[] = {2, 2};
    const auto p = pool_by_timestamp(Tensor::matrix({{1, 5}, {4, 0}}), t);
    REQUIRE(p.rows.rows() == 1);
    CHECK(row_of(p.rows, 0) == std::vector<double>{4, 5});
    CHECK(p.times == std::vector<double>{2});
  }
  SUBCASE("distinct times sort the rows") {
    const double t[] = {3, 1, 2};
    const auto p = pool_by_timestamp(Tensor::matrix({{3, 3}, {1, 1}, {2, 2}}), t);
    CHECK(p.times == std::vector<double>{1, 2, 3});
    for (std::size_t r = 0; r < 3; ++r) CHECK(row_of(p.rows, r) == std::vector<double>(2, r + 1.0));
  }
  SUBCASE("empty input") {
    const auto p = pool_by_timestamp(Tensor::zeros({0, 4}), {});
    CHECK(p.times.empty());
    CHECK(p.groups.empty());
  }
  SUBCASE("within-group permutation") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t m = 1 + rng() % 8;
      std::vector<double> times(m);
      for (auto& x : times) x = static_cast<double>(rng() % 3);
      Tensor e = random_tensor(m, 5, rng);
      // shuffle rows while keeping each row's timestamp
      std::vector<std::size_t> perm(m);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<double> t2(m);
      for (std::size_t i = 0; i < m; ++i) t2[i] = times[perm[i]];
      const auto a = pool_by_timestamp(e, times);
      const auto b = pool_by_timestamp(gather_rows(e, perm), t2);
      CHECK(a.times == b.times);
      CHECK(same_bits({a.rows.data().begin(), a.rows.data().end()}, {b.rows.data().begin(), b.rows.data().end()}));
    }
  }
}

TEST_CASE("causal_encode") {
  std::mt19937_64 rng(5);
  const auto p = fusion_params(1);
  Tensor e = random_tensor(6, 16, rng);
  const Tensor h = causal_encode(p, e);
  CHECK(h.rows() == 6);
  for (std::size_t j = 1; j < 6; ++j) {
    Tensor e2 = Tensor::from_data(e.shape(), {e.data().begin(), e.data().end()});
    for (std::size_t c = 0; c < 16; ++c) e2.data_mut()[j * 16 + c] += 3.0;
    const Tensor h2 = causal_encode(p, e2);
    for (std::size_t i = 0; i < j; ++i) CHECK(same_bits(row_of(h, i), row_of(h2, i)));
    CHECK_FALSE(same_bits(row_of(h, j), row_of(h2, j)));
  }
  const Tensor h1 = causal_encode(p, slice_rows(e, 0, 1));
  CHECK(same_bits(row_of(h1, 0), row_of(h, 0)));

  const auto none = fusion_params(1, 0);
  const Tensor id = causal_encode(none, e);
  CHECK(same_bits({id.data().begin(), id.data().end()}, {e.data().begin(), e.data().end()}));
  CHECK_THROWS(causal_encode(p, Tensor::zeros({0, 16})));
  CHECK_THROWS_AS(causal_encode(p, Tensor::zeros({2, 8})), DimensionError);
}

TEST_CASE("labelwise_attend") {
  std::mt19937_64 rng(7);
  const auto p = fusion_params(2, 2, 4);
  Tensor h = random_tensor(5, 16, rng);

  SUBCASE("t = 1 sees only the first position") {
    const Tensor d = labelwise_attend(p, h, 1);
    const Tensor v = matmul(matmul(slice_rows(h, 0, 1), p.label_attn.wv), p.label_attn.wo);
    for (std::size_t l = 0; l < 4; ++l)
      for (std::size_t c = 0; c < 16; ++c) CHECK(std::fabs(d(l, c) - v(0, c)) < 1e-12);
  }
  SUBCASE("identical positions give identical label contexts") {
    std::vector<double> rows;
    for (int r = 0; r < 5; ++r) rows.insert(rows.end(), h.data().begin(), h.data().begin() + 16);
    const Tensor same = Tensor::from_data({5, 16}, rows);
    const Tensor d = labelwise_attend(p, same, 5);
    for (std::size_t l = 1; l < 4; ++l)
      for (std::size_t c = 0; c < 16; ++c) CHECK(std::fabs(d(l, c) - d(0, c)) < 1e-12);
  }
  SUBCASE("later positions do not leak") {
    for (std::size_t t = 1; t < 5; ++t) {
      Tensor h2 = Tensor::from_data(h.shape(), {h.data().begin(), h.data().end()});
      for (std::size_t i = t * 16; i < 80; ++i) h2.data_mut()[i] = -h2.data()[i] * 7.0;
      const Tensor a = labelwise_attend(p, h, t), b = labelwise_attend(p, h2, t);
      CHECK(same_bits({a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()}));
    }
  }
  SUBCASE("range") {
    CHECK_THROWS(labelwise_attend(p, h, 0));
    CHECK_THROWS(labelwise_attend(p, h, 6));
  }
  SUBCASE("rows of temporal_logits match per-step attention") {
    const Tensor logits = temporal_logits(p, h);
    for (std::size_t t = 1; t <= 5; ++t) {
      const Tensor d = labelwise_attend(p, h, t);
      for (std::size_t l = 0; l < 4; ++l) {
        double z = 0.0;
        for (std::size_t c = 0; c < 16; ++c) z += p.label_proj(l, c) * d(l, c);
        CHECK(std::fabs(logits(t - 1, l) - z) < 1e-12);
      }
    }
  }
}

TEST_CASE("predict_temporal") {
  std::mt19937_64 rng(11);
  auto p = fusion_params(3, 2, 3);
  Tensor h = random_tensor(4, 16, rng);
  const Tensor probs = predict_temporal(p, h);
  CHECK(probs.rows() == 4);
  CHECK(probs.cols() == 3);
  for (double v : probs.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  std::fill(p.label_proj.data_mut().begin(), p.label_proj.data_mut().end(), 0.0);
  const Tensor half = predict_temporal(p, h);
  for (double v : half.data()) CHECK(v == 0.5);
}

TEST_CASE("swapping two labels permutes the predictions") {
  std::mt19937_64 rng(13);
  const auto p = fusion_params(4, 1, 4);
  Tensor h = random_tensor(5, 16, rng);
  FusionParams q = p;
  auto swap_rows = [](const Tensor& t, std::size_t a, std::size_t b) {
    std::vector<double> v(t.data().begin(), t.data().end());
    for (std::size_t c = 0; c < t.cols(); ++c) std::swap(v[a * t.cols() + c], v[b * t.cols() + c]);
    return Tensor::from_data(t.shape(), v);
  };
  q.label_queries = swap_rows(p.label_queries, 0, 2);
  q.label_proj = swap_rows(p.label_proj, 0, 2);
  const Tensor a = predict_temporal(p, h), b = predict_temporal(q, h);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(a(t, 0) == b(t, 2));
    CHECK(a(t, 2) == b(t, 0));
    CHECK(a(t, 1) == b(t, 1));
    CHECK(a(t, 3) == b(t, 3));
  }
}

TEST_CASE("full model: prefix predictions equal full-sequence predictions") {
  std::mt19937_64 rng(17);
  const ModelConfig cfg = testing::small_config(3);
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const MihstModel m = MihstModel::init(cfg, 9, seed);
    const ModelInput in = testing::random_input(rng, cfg, 9);
    const TemporalPrediction full = m.forward(in);
    REQUIRE(full.positions() == in.sequence_length());
    CHECK(full.labels() == 3);
    for (std::size_t t = 1; t <= full.positions(); ++t) {
      const TemporalPrediction pre = m.forward(in.prefix(t));
      REQUIRE(pre.positions() == t);
      CHECK(same_bits(row_of(full.probs, t - 1), row_of(pre.probs, t - 1)));
      CHECK(pre.times[t - 1] == full.times[t - 1]);
    }
  }
}

TEST_CASE("a 4-event, 3-label admission gives a 4x3 prediction") {
  const ModelConfig cfg = testing::small_config(3);
  const MihstModel m = MihstModel::init(cfg, 6, 1);
  ModelInput in;
  in.notes = {{0.5, {1, 2, 3}}, {2.0, {4}}};
  in.labs = {{1.0, {2}, 10, 0.3}, {1.0, {3}, 200, 0.8}, {3.0, {4, 5}, 128, 0.5}};
  const auto pred = m.forward(in);
  CHECK(pred.probs.rows() == 4);
  CHECK(pred.probs.cols() == 3);
  CHECK(pred.times == std::vector<double>{0.5, 1.0, 2.0, 3.0});

  std::ostringstream csv;
  write_prediction_csv(csv, pred);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "time,label_0,label_1,label_2");
  std::size_t rows = 0;
  for (std::string l; std::getline(lines, l);) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("checkpoint round-trip reproduces predictions bitwise") {
  testing::TempDir dir("ckpt");
  std::vector<AdmissionRecord> train(3);
  for (std::size_t i = 0; i < 3; ++i) {
    train[i].admission_id = "a" + std::to_string(i);
    train[i].labels = {i % 2 ? "X" : "Y"};
    train[i].events = {ClinicalEvent::note(0.1, {1, 2, 3}), ClinicalEvent::lab(0.2, "blood urea", 10.0 + i),
                       ClinicalEvent::lab(0.2, "sodium", 140.0 - i), ClinicalEvent::lab(1.5, "sodium", 141.0)};
  }
  ModelConfig cfg = testing::small_config(2);
  Checkpoint ck;
  ck.prep = Preprocessor::fit(LabelVocabulary({"X", "Y"}), {"sodium", "blood urea"}, train);
  ck.model = MihstModel::init(cfg, ck.prep.names.size(), 4);
  ck.save(dir / "m.ckpt");
  const Checkpoint back = Checkpoint::load(dir / "m.ckpt");
  CHECK(back.prep.lab_features == ck.prep.lab_features);
  CHECK(back.prep.labels.codes() == ck.prep.labels.codes());
  for (const auto& adm : train) {
    const auto a = ck.model.forward(ck.prep.prepare(adm, cfg));
    const auto b = back.model.forward(back.prep.prepare(adm, back.model.cfg));
    CHECK(same_bits({a.probs.data().begin(), a.probs.data().end()}, {b.probs.data().begin(), b.probs.data().end()}));
  }
  testing::write_file(dir / "bad.ckpt", "{\"format\": \"something else\"}");
  CHECK_THROWS_AS(Checkpoint::load(dir / "bad.ckpt"), ParseError);
}

TEST_CASE("heads must divide the width") {
  FusionConfig cfg;
  cfg.dim = 10;
  cfg.heads = 4;
  ParamInit init(1);
  CHECK_THROWS_AS(FusionParams::init(cfg, init), ConfigError);
}
