#include "fcmf/textenc/textenc.hpp"

#include <algorithm>

#include "fcmf/errors.hpp"

namespace fcmf::textenc {

using data::Vocabulary;

namespace {

std::vector<AspectCategory> canonical(std::vector<AspectCategory> cats) {
  std::sort(cats.begin(), cats.end());
  cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
  return cats;
}

}  // namespace

AuxiliarySequence build_auxiliary_sequence(AspectCategory aspect, const std::vector<std::string>& tokens,
                                           const std::vector<AspectCategory>& image_categories,
                                           const std::vector<AspectCategory>& roi_categories,
                                           const Vocabulary& vocab, std::size_t max_len) {
  const auto img = canonical(image_categories);
  const auto roi = canonical(roi_categories);
  const std::size_t overhead = kFixedOverhead + img.size() + roi.size();
  if (overhead > max_len) {
    throw ConfigError("max_len " + std::to_string(max_len) + " cannot hold the fixed segments (" +
                      std::to_string(overhead) + " tokens)");
  }
  const std::size_t keep = std::min(tokens.size(), max_len - overhead);

  AuxiliarySequence seq;
  auto& ids = seq.ids;
  ids.reserve(max_len);
  ids.push_back(Vocabulary::kBos);
  ids.push_back(Vocabulary::aspect_id(aspect));
  ids.push_back(Vocabulary::kSep);
  ids.push_back(Vocabulary::kSep);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(vocab.id(tokens[i]));
  ids.push_back(Vocabulary::kSep);
  ids.push_back(Vocabulary::kSep);
  for (auto a : img) ids.push_back(Vocabulary::aspect_id(a));
  ids.push_back(Vocabulary::kSep);
  ids.push_back(Vocabulary::kSep);
  for (auto a : roi) ids.push_back(Vocabulary::aspect_id(a));
  ids.push_back(Vocabulary::kSep);
  seq.length = ids.size();
  seq.text_tokens = keep;
  ids.resize(max_len, Vocabulary::kPad);
  return seq;
}

EncoderParams EncoderParams::init(const EncoderConfig& c, num::Rng& rng) {
  if (c.vocab_size == 0) throw ConfigError("vocabulary is empty");
  if (c.heads == 0 || c.dim % c.heads != 0) {
    throw ConfigError("hidden size " + std::to_string(c.dim) + " is not divisible by " + std::to_string(c.heads) +
                      " attention heads");
  }
  EncoderParams p;
  p.heads = c.heads;
  p.token_embedding = num::normal_param(num::Shape{c.vocab_size, c.dim}, c.init_std, rng);
  p.position_embedding = num::normal_param(num::Shape{c.max_len, c.dim}, c.init_std, rng);
  p.embedding_norm = num::LayerNormParams::init(c.dim);
  for (std::size_t l = 0; l < c.layers; ++l) {
    EncoderLayer layer;
    layer.attention = num::MultiHeadAttentionParams::init(c.dim, c.heads, c.init_std, rng);
    layer.attention_norm = num::LayerNormParams::init(c.dim);
    layer.ffn_in = num::LinearParams::init(c.dim, c.ffn_mult * c.dim, c.init_std, rng);
    layer.ffn_out = num::LinearParams::init(c.ffn_mult * c.dim, c.dim, c.init_std, rng);
    layer.ffn_norm = num::LayerNormParams::init(c.dim);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void EncoderParams::collect(num::ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".token_embedding", token_embedding);
  out.emplace_back(prefix + ".position_embedding", position_embedding);
  embedding_norm.collect(out, prefix + ".embedding_norm");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    layers[l].attention.collect(out, p + ".attention");
    layers[l].attention_norm.collect(out, p + ".attention_norm");
    layers[l].ffn_in.collect(out, p + ".ffn_in");
    layers[l].ffn_out.collect(out, p + ".ffn_out");
    layers[l].ffn_norm.collect(out, p + ".ffn_norm");
  }
}

EncoderOutput encode_text(const AuxiliarySequence& seq, const EncoderParams& params, const num::RunContext& ctx,
                          bool trim) {
  if (seq.ids.size() > params.max_len()) {
    throw DimensionError("sequence of " + std::to_string(seq.ids.size()) + " ids exceeds position table of " +
                         std::to_string(params.max_len()));
  }
  const std::size_t n = trim ? seq.length : seq.ids.size();
  if (n == 0) throw DimensionError("empty sequence");
  std::span<const std::int32_t> ids(seq.ids.data(), n);

  num::KeyMask mask;
  if (!trim) {
    mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = seq.ids[i] == data::Vocabulary::kPad ? 1 : 0;
  }

  Tensor x = num::add(num::embedding(params.token_embedding, ids), num::slice_rows(params.position_embedding, 0, n));
  x = params.embedding_norm(x);
  x = num::dropout(x, ctx.dropout, ctx.training, ctx.rng);
  for (const auto& layer : params.layers) {
    Tensor a = layer.attention(x, x, mask);
    a = num::dropout(a, ctx.dropout, ctx.training, ctx.rng);
    x = layer.attention_norm(num::add(x, a));
    Tensor f = layer.ffn_out(num::gelu(layer.ffn_in(x)));
    f = num::dropout(f, ctx.dropout, ctx.training, ctx.rng);
    x = layer.ffn_norm(num::add(x, f));
  }
  return EncoderOutput{x, num::slice_rows(x, 0, 1)};
}

}  // namespace fcmf::textenc
