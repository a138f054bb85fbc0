#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mihst/encoders.hpp"
#include "mihst/error.hpp"
#include "mihst/ops.hpp"

using namespace mihst;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

double norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

NoteEncoderParams note_params(std::uint64_t seed, bool pe = true) {
  NoteEncoderConfig cfg;
  cfg.vocab_size = 40;
  cfg.dim = 16;
  cfg.heads = 4;
  cfg.max_tokens = 8;
  cfg.ffn_dim = 32;
  cfg.position_encoding = pe;
  ParamInit init(seed);
  return NoteEncoderParams::init(cfg, init);
}

TabularEncoderParams tab_params(std::uint64_t seed) {
  TabularEncoderConfig cfg;
  cfg.name_vocab_size = 10;
  cfg.dim = 12;
  cfg.heads = 3;
  cfg.name_tokens = 4;
  cfg.ffn_dim = 24;
  ParamInit init(seed);
  return TabularEncoderParams::init(cfg, init);
}

bool row_nonzero(std::span<const double> g, std::size_t row, std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c)
    if (g[row * cols + c] != 0.0) return true;
  return false;
}

}  // namespace

TEST_CASE("note chunk encoder") {
  const auto p = note_params(1);
  const std::vector<std::size_t> toks = {3, 9, 27, 3, 11};
  const Tensor a = encode_note_chunk(p, toks);
  CHECK(a.rows() == 1);
  CHECK(a.cols() == 16);
  CHECK(values(a) == values(encode_note_chunk(p, toks)));

  const std::vector<std::size_t> one = {7};
  const Tensor s = encode_note_chunk(p, one);
  CHECK(s.cols() == 16);
  for (double v : s.data()) CHECK(std::isfinite(v));

  CHECK_THROWS(encode_note_chunk(p, std::vector<std::size_t>{}));
  CHECK_THROWS(encode_note_chunk(p, std::vector<std::size_t>{1, 40}));
  CHECK_THROWS(encode_note_chunk(p, std::vector<std::size_t>(9, 1)));
}

TEST_CASE("without position encoding the note encoder ignores token order") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = note_params(seed, false);
    std::vector<std::size_t> toks = {1, 5, 9, 13, 17, 21};
    const Tensor a = encode_note_chunk(p, toks);
    std::shuffle(toks.begin(), toks.end(), rng);
    const Tensor b = encode_note_chunk(p, toks);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a.data()[i] - b.data()[i]) < 1e-12);
  }
  // with positions the order matters
  const auto p = note_params(0, true);
  const Tensor a = encode_note_chunk(p, std::vector<std::size_t>{1, 5, 9});
  const Tensor b = encode_note_chunk(p, std::vector<std::size_t>{9, 5, 1});
  CHECK(values(a) != values(b));
}

TEST_CASE("select_chunks keeps the earliest chunks") {
  struct Chunk {
    double time;
    int id;
  };
  std::vector<Chunk> three = {{2, 0}, {1, 1}, {3, 2}};
  CHECK(select_chunks(three, 5).size() == 3);

  std::vector<Chunk> seven = {{5, 0}, {1, 1}, {4, 2}, {1, 3}, {7, 4}, {0.5, 5}, {2, 6}};
  const auto four = select_chunks(seven, 4);
  std::vector<int> ids;
  for (const auto& c : four) ids.push_back(c.id);
  CHECK(ids == std::vector<int>{5, 1, 3, 6});

  const auto first = select_chunks(seven, 1);
  REQUIRE(first.size() == 1);
  CHECK(first[0].id == 5);
}

TEST_CASE("name vocabulary") {
  const std::vector<std::string> names = {"Glucose", "white blood cells", "pH (arterial)"};
  const NameVocabulary v(names);
  CHECK(NameVocabulary::split("pH (arterial)") == std::vector<std::string>{"ph", "arterial"});
  const auto ids = v.encode("white blood cells", 4);
  CHECK(ids.size() == 3);
  CHECK(std::none_of(ids.begin(), ids.end(), [](auto i) { return i < 2; }));
  CHECK(v.encode("white blood cells", 2).size() == 2);
  CHECK(v.encode("mystery", 4) == std::vector<std::size_t>{NameVocabulary::kUnknown});
}

TEST_CASE("lab event encoder") {
  const auto p = tab_params(3);
  const std::vector<std::size_t> name = {2, 4};

  const LabTokens u = lab_token_matrix(p, name, 17, 0.0);
  CHECK(u.rows.rows() == 6);
  for (std::size_t c = 0; c < 12; ++c) CHECK(u.rows(5, c) == 0.0);
  CHECK(u.key_mask == std::vector<bool>{true, true, true, false, false, true});

  const Tensor a = encode_lab_event(p, name, 17, 0.2);
  CHECK(a.cols() == 12);
  CHECK(values(a) == values(encode_lab_event(p, name, 17, 0.2)));
  CHECK(values(a) != values(encode_lab_event(p, name, 17, 0.9)));

  CHECK_THROWS(encode_lab_event(p, name, 0, 0.5));
  CHECK_THROWS(encode_lab_event(p, name, 257, 0.5));
  CHECK_THROWS(encode_lab_event(p, name, 3, 1.5));
}

TEST_CASE("lab encoder output depends on the normalized value") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto p = tab_params(seed);
    const std::vector<std::size_t> name = {3};
    const double lo = norm(encode_lab_event(p, name, 100, 0.1));
    const double hi = norm(encode_lab_event(p, name, 100, 0.9));
    CHECK(std::fabs(lo - hi) > 0.0);
    CHECK(std::isfinite(lo));
  }
}

TEST_CASE("modality mapper") {
  ModalityMapperParams m;
  m.weight = Tensor::zeros({3, 3});
  m.bias = Tensor::zeros({1, 3});
  m.negative_slope = 0.01;
  const Tensor u = Tensor::row({0.5, 1.5, 2.5});
  CHECK(values(map_modality(m, u)) == std::vector<double>{0, 0, 0});

  m.weight = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(values(map_modality(m, u)) == values(u));

  m.weight = Tensor::matrix({{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const Tensor y = map_modality(m, u);
  CHECK(y(0, 0) == -0.5 * 0.01);
  CHECK(y(0, 1) == 1.5);

  CHECK_THROWS_AS(map_modality(m, Tensor::row({1.0, 2.0})), DimensionError);
}

TEST_CASE("gradients reach exactly the table rows that were used") {
  const auto np = note_params(9);
  const auto tp = tab_params(9);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    const Tensor parts[] = {encode_note_chunk(np, std::vector<std::size_t>{4, 12, 4}),
                            slice_cols(encode_lab_event(tp, std::vector<std::size_t>{2, 5}, 200, 0.7), 0, 12)};
    loss = add(sum(mul(parts[0], parts[0])), sum(parts[1]));
  }
  tape.backward(loss);
  const auto tg = np.token_embedding.grad();
  for (std::size_t r = 0; r < 40; ++r) CHECK(row_nonzero(tg, r, 16) == (r == 4 || r == 12));
  const auto bg = tp.bin_embedding.grad();
  for (std::size_t r = 0; r < 256; ++r) CHECK(row_nonzero(bg, r, 12) == (r == 199));
  const auto ng = tp.name_embedding.grad();
  for (std::size_t r = 0; r < 10; ++r) CHECK(row_nonzero(ng, r, 12) == (r == 2 || r == 5));
}
