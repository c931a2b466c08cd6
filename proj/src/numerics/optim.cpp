#include "fcmf/numerics/optim.hpp"

#include <cmath>

#include "fcmf/errors.hpp"

namespace fcmf::num {

Adam::Adam(ParamList params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0) || !(options_.beta1 >= 0 && options_.beta1 < 1) ||
      !(options_.beta2 >= 0 && options_.beta2 < 1) || !(options_.eps > 0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = params_[p].second;
    auto data = t.data();
    const bool has = t.has_grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = has ? t.grad()[i] : 0.0;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      data[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void Adam::restore(std::uint64_t steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) throw DataError("optimizer state size mismatch");
  for (std::size_t p = 0; p < params_.size(); ++p) {
    if (m[p].size() != params_[p].second.size() || v[p].size() != params_[p].second.size()) {
      throw DataError("optimizer state shape mismatch for " + params_[p].first);
    }
  }
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

double grad_norm(const ParamList& params) {
  double total = 0.0;
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) total += g * g;
  }
  return std::sqrt(total);
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0) {
    const double s = max_norm / norm;
    for (const auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      Tensor handle = t;
      for (double& g : handle.grad()) g *= s;
    }
  }
  return norm;
}

}  // namespace fcmf::num
