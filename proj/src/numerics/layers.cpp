#include "fcmf/numerics/layers.hpp"

#include "fcmf/errors.hpp"

namespace fcmf::num {

Tensor normal_param(Shape shape, double stddev, Rng& rng) {
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = stddev * rng.normal();
  return Tensor::param(std::move(shape), std::move(values));
}

Tensor constant_param(Shape shape, double value) {
  std::vector<double> values(shape_numel(shape), value);
  return Tensor::param(std::move(shape), std::move(values));
}

LinearParams LinearParams::init(std::size_t in, std::size_t out, double stddev, Rng& rng, bool with_bias) {
  LinearParams p;
  p.weight = normal_param(Shape{out, in}, stddev, rng);
  if (with_bias) p.bias = constant_param(Shape{out}, 0.0);
  return p;
}

void LinearParams::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

LayerNormParams LayerNormParams::init(std::size_t dim, double eps) {
  LayerNormParams p;
  p.gamma = constant_param(Shape{dim}, 1.0);
  p.beta = constant_param(Shape{dim}, 0.0);
  p.eps = eps;
  return p;
}

void LayerNormParams::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

MultiHeadAttentionParams MultiHeadAttentionParams::init(std::size_t dim, std::size_t heads, double stddev,
                                                        Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) +
                      " attention heads");
  }
  MultiHeadAttentionParams p;
  p.query = LinearParams::init(dim, dim, stddev, rng);
  p.key = LinearParams::init(dim, dim, stddev, rng);
  p.value = LinearParams::init(dim, dim, stddev, rng);
  p.output = LinearParams::init(dim, dim, stddev, rng);
  p.heads = heads;
  return p;
}

Tensor MultiHeadAttentionParams::operator()(const Tensor& queries, const Tensor& keys_values,
                                            const KeyMask& mask) const {
  const Tensor q = query(queries);
  const Tensor k = key(keys_values);
  const Tensor v = value(keys_values);
  return output(attention(q, k, v, mask, heads));
}

void MultiHeadAttentionParams::collect(ParamList& out, const std::string& prefix) const {
  query.collect(out, prefix + ".query");
  key.collect(out, prefix + ".key");
  value.collect(out, prefix + ".value");
  output.collect(out, prefix + ".output");
}

std::size_t param_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

void zero_grads(const ParamList& params) {
  for (const auto& [name, t] : params) {
    Tensor handle = t;
    handle.zero_grad();
  }
}

}  // namespace fcmf::num
