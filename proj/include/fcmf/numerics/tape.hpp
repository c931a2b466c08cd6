#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "fcmf/numerics/tensor.hpp"

namespace fcmf::num {

// Define-by-run reverse-mode graph. Kernels append a node when a tape is
// active on the calling thread and at least one input requires a gradient.
// Nodes are stored in execution order, which is a valid topological order.
class Tape {
 public:
  struct Node {
    const char* kernel;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const char* kernel, std::vector<std::shared_ptr<TensorImpl>> inputs,
              std::shared_ptr<TensorImpl> output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every node once, newest first.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

  // Kernel name of the first recorded node whose output holds NaN/Inf.
  const char* first_nonfinite_kernel() const;

  static Tape* active();

  // Makes `tape` the active tape of this thread for the scope's lifetime.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Temporarily deactivates recording (evaluation passes inside a tape scope).
  class Pause {
   public:
    Pause();
    ~Pause();
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<Node> nodes_;
};

// True when a tape is active and any of `inputs` requires a gradient.
bool recording(std::initializer_list<const Tensor*> inputs);

}  // namespace fcmf::num
