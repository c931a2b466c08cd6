#include "fcmf/numerics/tape.hpp"

#include "fcmf/errors.hpp"

namespace fcmf::num {

namespace {
thread_local Tape* g_active = nullptr;
}

Tape* Tape::active() { return g_active; }

Tape::Scope::Scope(Tape& tape) : previous_(g_active) { g_active = &tape; }
Tape::Scope::~Scope() { g_active = previous_; }

Tape::Pause::Pause() : previous_(g_active) { g_active = nullptr; }
Tape::Pause::~Pause() { g_active = previous_; }

void Tape::record(const char* kernel, std::vector<std::shared_ptr<TensorImpl>> inputs,
                  std::shared_ptr<TensorImpl> output, std::function<void()> backward) {
  output->requires_grad = true;
  nodes_.push_back(Node{kernel, std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  }
  auto impl = loss.impl();
  if (impl->grad.empty()) impl->grad.assign(1, 0.0);
  impl->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

const char* Tape::first_nonfinite_kernel() const {
  for (const auto& node : nodes_) {
    if (!all_finite(node.output->data)) return node.kernel;
  }
  return nullptr;
}

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (g_active == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

}  // namespace fcmf::num
