#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fcmf/numerics/rng.hpp"
#include "fcmf/numerics/tensor.hpp"

namespace fcmf::num {

// Additive logit applied to masked attention keys.
inline constexpr double kMaskLogit = -1e30;

// Key mask convention everywhere: 1 = padded (masked), 0 = real.
using KeyMask = std::vector<std::uint8_t>;

Tensor matmul(const Tensor& a, const Tensor& b);
// a · bᵀ
Tensor matmul_bt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x · wᵀ + b, w is (out × in); bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
// Adds a length-cols vector to every row.
Tensor add_row(const Tensor& x, const Tensor& row);
Tensor scale(const Tensor& x, double s);

Tensor relu(const Tensor& x);
// Exact (erf) GELU.
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// log(max(x, floor)); zero gradient in the clamped region.
Tensor log_clamped(const Tensor& x, double floor);

// axis in {0, 1} for rank 2, {0} (or -1) for rank 1; -1 means last axis.
Tensor softmax(const Tensor& x, int axis = -1);
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
// Inverted dropout. Identity (same handle) when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng* rng);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
// Mean over rows: (n × c) -> (1 × c).
Tensor mean_rows(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);

// Multi-head scaled dot-product attention.
//   q: n_q × d, k: n_k × d, v: n_k × dv; heads must divide d and dv.
//   key_mask: empty or n_k entries (1 = masked, receives zero weight).
//   bias: undefined or (heads × n_q·n_k), added to the scaled logits.
// Output n_q × dv with heads concatenated along columns.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const KeyMask& key_mask,
                 std::size_t heads, const Tensor& bias = Tensor());

// Mean negative log-likelihood of integer targets under softmax(logits).
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);
// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.
Tensor binary_cross_entropy(const Tensor& logits, std::span<const double> targets);

}  // namespace fcmf::num
