#pragma once

#include <array>
#include <vector>

#include "fcmf/datamodel/types.hpp"
#include "fcmf/numerics/layers.hpp"

namespace fcmf::fusion {

using num::KeyMask;
using num::Tensor;

inline constexpr double kGeometryEps = 1e-3;
inline constexpr double kGeometryWeightFloor = 1e-6;

struct FusionConfig {
  std::size_t dim = 72;
  std::size_t heads = 12;
  std::size_t geo_dim = 64;       // sinusoidal embedding width, multiple of 8
  std::size_t max_images = data::kMaxImages;
  bool share_cm = true;           // one CM-attention block for every image slot
  std::size_t num_classes = data::kNumLabels;
  double init_std = 0.02;
};

// Appearance projections plus the per-head geometric weight W_G.
struct RelationParams {
  num::LinearParams query, key, value;
  num::LinearParams geometry;  // geo_dim -> heads
  std::size_t heads = 1;
  std::size_t geo_dim = 64;
  void collect(num::ParamList& out, const std::string& prefix) const;
};

struct FusionParams {
  std::vector<num::MultiHeadAttentionParams> cm;  // 1 when shared, else one per image slot
  RelationParams relation;
  num::MultiHeadAttentionParams text_object;  // self-attention over H_T ⊕ H_O
  num::MultiHeadAttentionParams multimodal;   // self-attention over H^M
  num::LinearParams classifier;               // d -> 4

  static FusionParams init(const FusionConfig& config, num::Rng& rng);
  std::size_t dim() const { return classifier.in(); }
  const num::MultiHeadAttentionParams& cm_for(std::size_t slot) const { return cm.size() == 1 ? cm[0] : cm.at(slot); }
  void collect(num::ParamList& out, const std::string& prefix) const;
};

// Relative geometry of the ordered pair (i, j), box centers, ε-clamped offsets.
std::array<double, 4> pair_geometry(const data::Box& bi, const data::Box& bj, double eps = kGeometryEps);
// (J·J) × geo_dim sinusoidal embedding, row i·J + j for the pair (i, j). Not differentiable.
Tensor geometric_embedding(const std::vector<data::Box>& boxes, std::size_t geo_dim, double eps = kGeometryEps);
// heads × (J·J) additive logits log(max(relu(W_G·E + b), 1e-6)).
Tensor relation_bias(const RelationParams& params, const std::vector<data::Box>& boxes);

// H_O = v_R + relation attention over the j real RoIs (v_R: j × d).
Tensor object_relation(const Tensor& v_r, const std::vector<data::Box>& boxes, const RelationParams& params,
                       const num::RunContext& ctx);
// Attention weights of object_relation as heads blocks of j × j (rows sum to 1), for inspection.
std::vector<std::vector<std::vector<double>>> object_relation_weights(const Tensor& v_r,
                                                                      const std::vector<data::Box>& boxes,
                                                                      const RelationParams& params);

// K stacked rows plus mask; masked rows are zero.
struct SlotRows {
  Tensor rows;  // K × d
  KeyMask mask;
};

// Row 0 of CM-Attention(H_T, v_I_k, v_I_k) per unmasked image.
SlotRows image_guided_attention(const Tensor& h_t, const std::vector<Tensor>& grids, const KeyMask& image_mask,
                                const FusionParams& params, const num::RunContext& ctx);

// Row 0 of self-attention over H_T ⊕ H_O (H_O may be undefined when the image has no RoIs).
Tensor geometric_roi_attention(const Tensor& h_t, const Tensor& h_o, const FusionParams& params,
                               const num::RunContext& ctx);
// One geometric_roi_attention row per unmasked image.
SlotRows geometric_rows(const Tensor& h_t, const std::vector<Tensor>& h_o, const KeyMask& image_mask,
                        const FusionParams& params, const num::RunContext& ctx);

// Logits (1 × 4) from row 0 of MM-Attention over H_<s> ⊕ H_I ⊕ H_R.
Tensor fuse_logits(const Tensor& h_s, const SlotRows& h_i, const SlotRows& h_r, const FusionParams& params,
                   const num::RunContext& ctx);
std::array<double, data::kNumLabels> fuse_and_classify(const Tensor& h_s, const SlotRows& h_i, const SlotRows& h_r,
                                                       const FusionParams& params);

// All slots masked, K × d zeros.
SlotRows masked_rows(std::size_t slots, std::size_t dim);

}  // namespace fcmf::fusion
