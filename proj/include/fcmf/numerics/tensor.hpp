#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fcmf::num {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Lazily allocated; empty means "no gradient has reached this tensor".
  std::vector<double> grad;
  bool requires_grad = false;
};

// Dense row-major float64 array with an optional gradient buffer.
//
// Tensor is a cheap handle: copies share storage. Use clone() for a deep copy.
// Rank-1 tensors behave as a single row where a matrix is expected.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }
  // Learnable leaf.
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double* ptr() { return impl_->data.data(); }
  const double* ptr() const { return impl_->data.data(); }
  double& operator[](std::size_t i) { return impl_->data[i]; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::span<double> grad();
  std::span<const double> grad() const;
  // Allocates a zero gradient buffer if absent and returns it.
  std::span<double> ensure_grad();
  void zero_grad();

  Tensor clone() const;
  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

bool all_finite(std::span<const double> values);

}  // namespace fcmf::num
