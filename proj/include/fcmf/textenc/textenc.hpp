#pragma once

#include <cstdint>
#include <vector>

#include "fcmf/datamodel/types.hpp"
#include "fcmf/datamodel/vocab.hpp"
#include "fcmf/numerics/layers.hpp"

namespace fcmf::textenc {

using data::AspectCategory;
using num::Tensor;

inline constexpr std::size_t kDefaultMaxLen = 170;

// <s> A^n </s></s> T </s></s> A^I </s></s> A^R </s>, then padding to max_len.
struct AuxiliarySequence {
  std::vector<std::int32_t> ids;  // exactly max_len entries
  std::size_t length = 0;         // non-padding prefix
  std::size_t text_tokens = 0;    // context tokens kept after truncation
};

// Tokens outside T that every sequence carries: <s>, aspect, 6 separators, final </s>.
inline constexpr std::size_t kFixedOverhead = 9;

AuxiliarySequence build_auxiliary_sequence(AspectCategory aspect, const std::vector<std::string>& tokens,
                                           const std::vector<AspectCategory>& image_categories,
                                           const std::vector<AspectCategory>& roi_categories,
                                           const data::Vocabulary& vocab, std::size_t max_len = kDefaultMaxLen);

struct EncoderLayer {
  num::MultiHeadAttentionParams attention;
  num::LayerNormParams attention_norm;
  num::LinearParams ffn_in;
  num::LinearParams ffn_out;
  num::LayerNormParams ffn_norm;
};

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t dim = 72;
  std::size_t heads = 12;
  std::size_t layers = 2;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t ffn_mult = 4;
  double init_std = 0.02;
};

// Post-LN transformer encoder with learned absolute positions.
struct EncoderParams {
  Tensor token_embedding;     // |V| × d
  Tensor position_embedding;  // max_len × d
  num::LayerNormParams embedding_norm;
  std::vector<EncoderLayer> layers;
  std::size_t heads = 1;

  static EncoderParams init(const EncoderConfig& config, num::Rng& rng);
  std::size_t dim() const { return token_embedding.cols(); }
  std::size_t max_len() const { return position_embedding.rows(); }
  void collect(num::ParamList& out, const std::string& prefix) const;
};

struct EncoderOutput {
  Tensor hidden;  // rows × d (max_len rows, or the real prefix when trimmed)
  Tensor first;   // 1 × d, row 0
};

// With trim = true only the non-padding prefix is computed; padding is a suffix, so
// those rows match the full masked computation.
EncoderOutput encode_text(const AuxiliarySequence& seq, const EncoderParams& params, const num::RunContext& ctx,
                          bool trim = true);

}  // namespace fcmf::textenc
