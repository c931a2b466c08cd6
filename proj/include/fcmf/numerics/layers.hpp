#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fcmf/numerics/ops.hpp"

namespace fcmf::num {

// Ordered (name, tensor) list. Order is the serialization and optimizer order.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

// Forward-pass mode shared by every layer.
struct RunContext {
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;  // dropout stream; required when training && dropout > 0
};

Tensor normal_param(Shape shape, double stddev, Rng& rng);
Tensor constant_param(Shape shape, double value);

struct LinearParams {
  Tensor weight;  // out × in
  Tensor bias;    // out (may be undefined)

  static LinearParams init(std::size_t in, std::size_t out, double stddev, Rng& rng,
                           bool with_bias = true);
  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
  double eps = 1e-12;

  static LayerNormParams init(std::size_t dim, double eps = 1e-12);
  Tensor operator()(const Tensor& x) const { return layernorm(x, gamma, beta, eps); }
  void collect(ParamList& out, const std::string& prefix) const;
};

// Query/key/value/output projections around `attention`.
struct MultiHeadAttentionParams {
  LinearParams query, key, value, output;
  std::size_t heads = 1;

  static MultiHeadAttentionParams init(std::size_t dim, std::size_t heads, double stddev, Rng& rng);
  std::size_t dim() const { return query.out(); }

  // Rows of `queries` attend over rows of `keys_values`.
  Tensor operator()(const Tensor& queries, const Tensor& keys_values, const KeyMask& mask) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

std::size_t param_count(const ParamList& params);
void zero_grads(const ParamList& params);

}  // namespace fcmf::num
