#include "fcmf/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fcmf/errors.hpp"

namespace fcmf::num {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : impl_(std::make_shared<TensorImpl>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.set_requires_grad(true);
  return t;
}

std::size_t Tensor::rows() const {
  const auto& s = impl_->shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("expected rank 1 or 2, got " + shape_str(s));
}

std::size_t Tensor::cols() const {
  const auto& s = impl_->shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw DimensionError("expected rank 1 or 2, got " + shape_str(s));
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

std::span<double> Tensor::grad() { return impl_->grad; }
std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::ensure_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t(impl_->shape, impl_->data);
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace fcmf::num
