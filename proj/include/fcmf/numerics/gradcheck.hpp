#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fcmf/numerics/layers.hpp"

namespace fcmf::num {

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
  std::string diagnostic;  // set when the loss is non-finite
};

// Central-difference check of d(loss)/d(params) at sampled coordinates.
// `loss_fn` must be deterministic (dropout off) and return a scalar tensor;
// it is invoked once under a tape and 2× per sampled coordinate without one.
// Every parameter tensor gets at least one coordinate; the remainder pick a
// tensor uniformly, then a coordinate uniformly within it.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParamList& params,
                           const GradCheckOptions& options = {});

}  // namespace fcmf::num
