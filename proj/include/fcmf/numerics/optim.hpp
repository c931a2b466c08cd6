#pragma once

#include <cstdint>
#include <vector>

#include "fcmf/numerics/layers.hpp"

namespace fcmf::num {

struct AdamOptions {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. A parameter without a gradient is stepped with a zero gradient.
class Adam {
 public:
  Adam(ParamList params, AdamOptions options);

  void step();
  std::uint64_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }
  const ParamList& params() const { return params_; }

  // Moment buffers in parameter order, for checkpointing.
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::uint64_t steps, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

 private:
  ParamList params_;
  AdamOptions options_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Rescales all gradients so their joint L2 norm is at most max_norm. Returns the norm before clipping.
double clip_grad_norm(const ParamList& params, double max_norm);
double grad_norm(const ParamList& params);

}  // namespace fcmf::num
