#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fcmf/errors.hpp"
#include "fcmf/textenc/textenc.hpp"
#include "oracles.hpp"

using namespace fcmf;
using namespace fcmf::textenc;
using data::AspectCategory;
using data::Vocabulary;
using num::Shape;

namespace {

Vocabulary small_vocab() {
  Vocabulary v;
  for (const char* t : {"phòng", "sạch_sẽ", "rất", "và", "nhân_viên"}) v.add(t);
  return v;
}

oracle::Matrix to_matrix(const Tensor& t) {
  oracle::Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

oracle::Matrix lin(const oracle::Matrix& x, const num::LinearParams& p) {
  return oracle::linear(x, to_matrix(p.weight), {p.bias.data().begin(), p.bias.data().end()});
}

oracle::Matrix ln(const oracle::Matrix& x, const num::LayerNormParams& p) {
  auto y = oracle::layernorm(x, p.eps);
  for (auto& r : y)
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = r[c] * p.gamma[c] + p.beta[c];
  return y;
}

oracle::Matrix add(oracle::Matrix a, const oracle::Matrix& b) {
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) a[r][c] += b[r][c];
  return a;
}

void randomize(Tensor t, std::mt19937_64& gen, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& x : t.data()) x = u(gen);
}

EncoderParams make_encoder(std::size_t vocab, std::size_t d, std::size_t heads, std::size_t layers,
                           std::size_t max_len, std::uint64_t seed, double stddev = 0.5) {
  EncoderConfig c;
  c.vocab_size = vocab;
  c.dim = d;
  c.heads = heads;
  c.layers = layers;
  c.max_len = max_len;
  c.init_std = stddev;
  num::Rng rng(seed);
  return EncoderParams::init(c, rng);
}

}  // namespace

TEST_CASE("degenerate auxiliary sequence", "[textenc][aux]") {
  const Vocabulary v;
  const auto seq = build_auxiliary_sequence(AspectCategory::Room, {}, {}, {}, v);
  const std::vector<std::int32_t> head{Vocabulary::kBos, Vocabulary::aspect_id(AspectCategory::Room), 2, 2, 2, 2, 2, 2, 2};
  REQUIRE(seq.ids.size() == 170);
  CHECK(seq.length == 9);
  CHECK(std::vector<std::int32_t>(seq.ids.begin(), seq.ids.begin() + 9) == head);
  for (std::size_t i = 9; i < 170; ++i) CHECK(seq.ids[i] == Vocabulary::kPad);
  CHECK(v.token(seq.ids[1]) == "room");
}

TEST_CASE("auxiliary sequence layout and canonical category order", "[textenc][aux]") {
  const auto v = small_vocab();
  const std::vector<std::string> text{"phòng", "rất", "sạch_sẽ", "lạ"};
  const auto a = build_auxiliary_sequence(AspectCategory::Service, text, {AspectCategory::Service, AspectCategory::Room},
                                          {AspectCategory::Food, AspectCategory::Food}, v);
  const auto b = build_auxiliary_sequence(AspectCategory::Service, text,
                                          {AspectCategory::Room, AspectCategory::Service, AspectCategory::Room},
                                          {AspectCategory::Food}, v);
  CHECK(a.ids == b.ids);
  const std::int32_t s = Vocabulary::kSep;
  const std::vector<std::int32_t> expect{Vocabulary::kBos,
                                         Vocabulary::aspect_id(AspectCategory::Service),
                                         s, s,
                                         v.id("phòng"), v.id("rất"), v.id("sạch_sẽ"), Vocabulary::kUnk,
                                         s, s,
                                         Vocabulary::aspect_id(AspectCategory::Room),
                                         Vocabulary::aspect_id(AspectCategory::Service),
                                         s, s,
                                         Vocabulary::aspect_id(AspectCategory::Food),
                                         s};
  CHECK(a.length == expect.size());
  CHECK(std::vector<std::int32_t>(a.ids.begin(), a.ids.begin() + a.length) == expect);
  CHECK(a.text_tokens == 4);
}

TEST_CASE("long context is truncated to fit exactly", "[textenc][aux]") {
  const auto v = small_vocab();
  std::mt19937_64 gen(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 150 + gen() % 100;
    std::vector<std::string> text(n, "và");
    std::vector<AspectCategory> img, roi;
    for (auto a : data::kAspects) {
      if (gen() % 2) img.push_back(a);
      if (gen() % 2) roi.push_back(a);
    }
    const auto seq = build_auxiliary_sequence(AspectCategory::Food, text, img, roi, v);
    const std::size_t budget = 170 - kFixedOverhead - img.size() - roi.size();
    CHECK(seq.text_tokens == std::min(n, budget));
    CHECK(seq.length == std::min<std::size_t>(170, kFixedOverhead + img.size() + roi.size() + n));
    CHECK(seq.ids[0] == Vocabulary::kBos);
    // Tail segments survive: the last real id is </s> and the category ids precede it.
    CHECK(seq.ids[seq.length - 1] == Vocabulary::kSep);
    std::size_t seps = 0;
    for (std::size_t i = 0; i < seq.length; ++i) seps += seq.ids[i] == Vocabulary::kSep;
    CHECK(seps == 7);
    CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocabulary::aspect_id(AspectCategory::Food)) >= 1);
  }
  std::vector<std::string> text(200, "phòng");
  const auto seq = build_auxiliary_sequence(AspectCategory::Room, text, {}, {}, v);
  CHECK(seq.length == 170);
  CHECK(seq.text_tokens == 161);
  CHECK_THROWS_AS(build_auxiliary_sequence(AspectCategory::Room, {}, {}, {}, v, 8), ConfigError);
}

TEST_CASE("encoder shapes, errors and determinism", "[textenc][encoder]") {
  const auto v = small_vocab();
  const auto params = make_encoder(v.size(), 8, 2, 2, 170, 2, 0.02);
  const auto seq = build_auxiliary_sequence(AspectCategory::Food, {"phòng", "rất"}, {}, {}, v);
  const auto full = encode_text(seq, params, {}, false);
  CHECK(full.hidden.shape() == Shape{170, 8});
  CHECK(full.first.shape() == Shape{1, 8});
  const auto trimmed = encode_text(seq, params, {}, true);
  CHECK(trimmed.hidden.rows() == seq.length);
  const auto again = encode_text(seq, params, {}, true);
  for (std::size_t i = 0; i < trimmed.hidden.size(); ++i) CHECK(trimmed.hidden[i] == again.hidden[i]);

  auto bad = seq;
  bad.ids[4] = static_cast<std::int32_t>(v.size()) + 3;
  CHECK_THROWS_AS(encode_text(bad, params, {}), DataError);

  EncoderConfig c;
  c.vocab_size = 20;
  c.dim = 64;
  c.heads = 12;
  num::Rng rng(1);
  CHECK_THROWS_AS(EncoderParams::init(c, rng), ConfigError);
}

TEST_CASE("padding tail does not affect real positions", "[textenc][encoder][property]") {
  const auto v = small_vocab();
  const auto params = make_encoder(v.size(), 8, 2, 2, 40, 3, 0.3);
  std::mt19937_64 gen(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::string> text;
    const std::size_t n = gen() % 12;
    for (std::size_t i = 0; i < n; ++i) text.push_back(v.token(static_cast<std::int32_t>(10 + gen() % 5)));
    const auto seq = build_auxiliary_sequence(AspectCategory::Location, text, {AspectCategory::Room}, {}, v, 40);
    const auto full = encode_text(seq, params, {}, false);
    const auto trimmed = encode_text(seq, params, {}, true);
    for (std::size_t r = 0; r < seq.length; ++r)
      for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(full.hidden.at(r, c) - trimmed.hidden.at(r, c)) < 1e-9);
    // A longer padded sequence with the same prefix gives the same summary.
    const auto longer = build_auxiliary_sequence(AspectCategory::Location, text, {AspectCategory::Room}, {}, v, 30);
    const auto other = encode_text(longer, params, {}, false);
    for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(other.first[c] - full.first[c]) < 1e-9);
  }
}

TEST_CASE("toy encoder matches a naive forward", "[textenc][encoder][oracle]") {
  const auto v = small_vocab();
  auto params = make_encoder(v.size(), 4, 1, 1, 20, 5, 0.5);
  std::mt19937_64 gen(6);
  randomize(params.embedding_norm.gamma, gen, 0.5, 1.5);
  randomize(params.embedding_norm.beta, gen, -0.5, 0.5);
  randomize(params.layers[0].attention_norm.gamma, gen, 0.5, 1.5);
  randomize(params.layers[0].ffn_norm.beta, gen, -0.5, 0.5);
  randomize(params.layers[0].ffn_in.bias, gen, -0.5, 0.5);

  const auto seq = build_auxiliary_sequence(AspectCategory::Room, {"phòng", "sạch_sẽ"}, {AspectCategory::Room}, {}, v, 20);
  const auto out = encode_text(seq, params, {}, false);

  const std::size_t n = 20;
  oracle::Matrix x(n, std::vector<double>(4));
  std::vector<int> mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 4; ++c)
      x[i][c] = params.token_embedding.at(static_cast<std::size_t>(seq.ids[i]), c) + params.position_embedding.at(i, c);
    mask[i] = seq.ids[i] == Vocabulary::kPad;
  }
  x = ln(x, params.embedding_norm);
  const auto& layer = params.layers[0];
  const auto& att = layer.attention;
  const auto a = lin(oracle::attention(lin(x, att.query), lin(x, att.key), lin(x, att.value), mask, 1), att.output);
  x = ln(add(x, a), layer.attention_norm);
  auto h = lin(x, layer.ffn_in);
  for (auto& r : h)
    for (auto& e : r) e = 0.5 * e * (1.0 + std::erf(e / std::sqrt(2.0)));
  x = ln(add(x, lin(h, layer.ffn_out)), layer.ffn_norm);

  // Padded rows attend to real keys as well, so every row is comparable.
  CHECK(oracle::max_abs_diff(oracle::flatten(to_matrix(out.hidden)), oracle::flatten(x)) < 1e-12);
  CHECK(oracle::max_abs_diff({out.first.data().begin(), out.first.data().end()}, x[0]) < 1e-12);
}

TEST_CASE("encoder parameter collection order", "[textenc]") {
  const auto params = make_encoder(12, 8, 2, 2, 16, 7);
  num::ParamList list;
  params.collect(list, "enc");
  REQUIRE(list.size() == 4 + 2 * (8 + 2 + 2 + 2 + 2));
  CHECK(list[0].first == "enc.token_embedding");
  CHECK(list[1].first == "enc.position_embedding");
  CHECK(list.back().first == "enc.layer1.ffn_norm.beta");
}
