#include "fcmf/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fcmf/errors.hpp"
#include "fcmf/numerics/tape.hpp"

namespace fcmf::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap view(const TensorImpl* t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t->data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Gradient buffer of `t`, or nullptr when `t` does not take gradients.
double* grad_of(TensorImpl* t) {
  if (!t->requires_grad) return nullptr;
  if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
  return t->grad.data();
}

MatMap grad_view(double* g, std::size_t rows, std::size_t cols) {
  return MatMap(g, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatMap out_grad(const TensorImpl* t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t->grad.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_matrix(const Tensor& t, const char* what) {
  if (!t.defined()) throw DimensionError(std::string(what) + ": undefined tensor");
  if (t.rank() != 1 && t.rank() != 2) {
    throw DimensionError(std::string(what) + ": expected rank 1 or 2, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = fwd(in[i]);
  if (recording({&x})) {
    auto* xi = x.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record(name, {x.impl()}, out.impl(), [xi, oi, deriv] {
      double* gx = grad_of(xi);
      if (!gx) return;
      for (std::size_t i = 0; i < xi->data.size(); ++i) {
        gx[i] += oi->grad[i] * deriv(xi->data[i], oi->data[i]);
      }
    });
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  MatMap(out.ptr(), m, n).noalias() = view(a.impl().get(), m, k) * view(b.impl().get(), k, n);
  if (recording({&a, &b})) {
    auto* ai = a.impl().get();
    auto* bi = b.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("matmul", {a.impl(), b.impl()}, out.impl(), [=] {
      auto dc = out_grad(oi, m, n);
      if (double* ga = grad_of(ai)) grad_view(ga, m, k).noalias() += dc * view(bi, k, n).transpose();
      if (double* gb = grad_of(bi)) grad_view(gb, k, n).noalias() += view(ai, m, k).transpose() * dc;
    });
  }
  return out;
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_bt");
  require_matrix(b, "matmul_bt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_bt: inner dimensions differ for " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + "ᵀ");
  }
  Tensor out(Shape{m, n});
  MatMap(out.ptr(), m, n).noalias() = view(a.impl().get(), m, k) * view(b.impl().get(), n, k).transpose();
  if (recording({&a, &b})) {
    auto* ai = a.impl().get();
    auto* bi = b.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("matmul_bt", {a.impl(), b.impl()}, out.impl(), [=] {
      auto dc = out_grad(oi, m, n);
      if (double* ga = grad_of(ai)) grad_view(ga, m, k).noalias() += dc * view(bi, n, k);
      if (double* gb = grad_of(bi)) grad_view(gb, n, k).noalias() += dc.transpose() * view(ai, m, k);
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(Shape{n, m});
  MatMap(out.ptr(), n, m) = view(a.impl().get(), m, n).transpose();
  if (recording({&a})) {
    auto* ai = a.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("transpose", {a.impl()}, out.impl(), [=] {
      if (double* ga = grad_of(ai)) grad_view(ga, m, n) += out_grad(oi, n, m).transpose();
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_matrix(x, "linear");
  require_matrix(w, "linear");
  const std::size_t n = x.rows(), in = x.cols(), out_dim = w.rows();
  if (w.cols() != in) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  if (b.defined() && b.size() != out_dim) {
    throw DimensionError("linear: bias " + shape_str(b.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  Tensor out(x.rank() == 1 ? Shape{out_dim} : Shape{n, out_dim});
  auto y = MatMap(out.ptr(), n, out_dim);
  y.noalias() = view(x.impl().get(), n, in) * view(w.impl().get(), out_dim, in).transpose();
  if (b.defined()) y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.ptr(), static_cast<Eigen::Index>(out_dim));
  if (recording({&x, &w, &b})) {
    auto* xi = x.impl().get();
    auto* wi = w.impl().get();
    auto* bi = b.defined() ? b.impl().get() : nullptr;
    auto* oi = out.impl().get();
    std::vector<std::shared_ptr<TensorImpl>> inputs{x.impl(), w.impl()};
    if (b.defined()) inputs.push_back(b.impl());
    Tape::active()->record("linear", std::move(inputs), out.impl(), [=] {
      auto dy = out_grad(oi, n, out_dim);
      if (double* gx = grad_of(xi)) grad_view(gx, n, in).noalias() += dy * view(wi, out_dim, in);
      if (double* gw = grad_of(wi)) grad_view(gw, out_dim, in).noalias() += dy.transpose() * view(xi, n, in);
      if (bi != nullptr) {
        if (double* gb = grad_of(bi)) grad_view(gb, 1, out_dim) += dy.colwise().sum();
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  if (recording({&a, &b})) {
    auto* ai = a.impl().get();
    auto* bi = b.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("add", {a.impl(), b.impl()}, out.impl(), [=] {
      if (double* ga = grad_of(ai)) {
        for (std::size_t i = 0; i < oi->grad.size(); ++i) ga[i] += oi->grad[i];
      }
      if (double* gb = grad_of(bi)) {
        for (std::size_t i = 0; i < oi->grad.size(); ++i) gb[i] += oi->grad[i];
      }
    });
  }
  return out;
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_matrix(x, "add_row");
  const std::size_t n = x.rows(), c = x.cols();
  if (row.size() != c) {
    throw DimensionError("add_row: row " + shape_str(row.shape()) + " vs matrix " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + row[j];
  }
  if (recording({&x, &row})) {
    auto* xi = x.impl().get();
    auto* ri = row.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("add_row", {x.impl(), row.impl()}, out.impl(), [=] {
      if (double* gx = grad_of(xi)) {
        for (std::size_t i = 0; i < n * c; ++i) gx[i] += oi->grad[i];
      }
      if (double* gr = grad_of(ri)) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) gr[j] += oi->grad[i * c + j];
        }
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double s) {
  return unary("scale", x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  return unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [](double v, double) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log_clamped(const Tensor& x, double floor) {
  return unary(
      "log_clamped", x, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor softmax(const Tensor& x, int axis) {
  require_matrix(x, "softmax");
  const int last = static_cast<int>(x.rank()) - 1;
  if (axis < 0) axis = last;
  if (axis > last) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  // Iterate slices: along columns when axis is last, else along rows.
  const bool along_cols = axis == last;
  const std::size_t slices = along_cols ? rows : cols;
  const std::size_t len = along_cols ? cols : rows;
  const std::size_t stride = along_cols ? 1 : cols;
  auto offset = [=](std::size_t s) { return along_cols ? s * cols : s; };

  Tensor out(x.shape());
  for (std::size_t s = 0; s < slices; ++s) {
    const double* in = x.ptr() + offset(s);
    double* o = out.ptr() + offset(s);
    double mx = in[0];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, in[i * stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      o[i * stride] = std::exp(in[i * stride] - mx);
      total += o[i * stride];
    }
    for (std::size_t i = 0; i < len; ++i) o[i * stride] /= total;
  }
  if (recording({&x})) {
    auto* xi = x.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("softmax", {x.impl()}, out.impl(), [=] {
      double* gx = grad_of(xi);
      if (!gx) return;
      for (std::size_t s = 0; s < slices; ++s) {
        const double* y = oi->data.data() + offset(s);
        const double* dy = oi->grad.data() + offset(s);
        double* g = gx + offset(s);
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += dy[i * stride] * y[i * stride];
        for (std::size_t i = 0; i < len; ++i) g[i * stride] += y[i * stride] * (dy[i * stride] - dot);
      }
    });
  }
  return out;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "layernorm");
  const std::size_t n = x.rows(), c = x.cols();
  if (gamma.size() != c || beta.size() != c) {
    throw DimensionError("layernorm: affine parameters " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " vs input " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(n * c);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* in = x.ptr() + r * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += in[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (in[j] - mean) * is;
      (*xhat)[r * c + j] = h;
      out[r * c + j] = h * gamma[j] + beta[j];
    }
  }
  if (recording({&x, &gamma, &beta})) {
    auto* xi = x.impl().get();
    auto* gi = gamma.impl().get();
    auto* bi = beta.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("layernorm", {x.impl(), gamma.impl(), beta.impl()}, out.impl(), [=] {
      const double* dy = oi->grad.data();
      if (double* gg = grad_of(gi)) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < c; ++j) gg[j] += dy[r * c + j] * (*xhat)[r * c + j];
        }
      }
      if (double* gb = grad_of(bi)) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < c; ++j) gb[j] += dy[r * c + j];
        }
      }
      if (double* gx = grad_of(xi)) {
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t r = 0; r < n; ++r) {
          double sum_d = 0.0, sum_dh = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = dy[r * c + j] * gi->data[j];
            sum_d += d;
            sum_dh += d * (*xhat)[r * c + j];
          }
          for (std::size_t j = 0; j < c; ++j) {
            const double d = dy[r * c + j] * gi->data[j];
            gx[r * c + j] += (*inv_std)[r] * (d - inv_c * sum_d - (*xhat)[r * c + j] * inv_c * sum_dh);
          }
        }
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, bool training, Rng* rng) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout rate must be < 1");
  if (rng == nullptr) throw ConfigError("dropout in training mode needs an RNG stream");
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    (*mask)[i] = rng->uniform() < p ? 0.0 : keep_scale;
    out[i] = x[i] * (*mask)[i];
  }
  if (recording({&x})) {
    auto* xi = x.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("dropout", {x.impl()}, out.impl(), [=] {
      if (double* gx = grad_of(xi)) {
        for (std::size_t i = 0; i < mask->size(); ++i) gx[i] += oi->grad[i] * (*mask)[i];
      }
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != c) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.rows();
  }
  Tensor out(Shape{total, c});
  std::size_t at = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.ptr() + at);
    at += p.size();
    any_grad = any_grad || recording({&p});
  }
  if (any_grad) {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    for (const auto& p : parts) inputs.push_back(p.impl());
    auto* oi = out.impl().get();
    std::vector<TensorImpl*> raw;
    for (const auto& p : parts) raw.push_back(p.impl().get());
    Tape::active()->record("concat_rows", std::move(inputs), out.impl(), [oi, raw] {
      std::size_t offset = 0;
      for (TensorImpl* p : raw) {
        if (double* g = grad_of(p)) {
          for (std::size_t i = 0; i < p->data.size(); ++i) g[i] += oi->grad[offset + i];
        }
        offset += p->data.size();
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const std::size_t c = x.cols();
  if (count == 0 || begin + count > x.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + shape_str(x.shape()));
  }
  Tensor out(Shape{count, c});
  std::copy(x.ptr() + begin * c, x.ptr() + (begin + count) * c, out.ptr());
  if (recording({&x})) {
    auto* xi = x.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("slice_rows", {x.impl()}, out.impl(), [=] {
      if (double* g = grad_of(xi)) {
        for (std::size_t i = 0; i < count * c; ++i) g[begin * c + i] += oi->grad[i];
      }
    });
  }
  return out;
}

Tensor mean_rows(const Tensor& x) {
  require_matrix(x, "mean_rows");
  const std::size_t n = x.rows(), c = x.cols();
  Tensor out(Shape{1, c});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < c; ++j) out[j] += x[r * c + j];
  }
  for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(n);
  if (recording({&x})) {
    auto* xi = x.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("mean_rows", {x.impl()}, out.impl(), [=] {
      if (double* g = grad_of(xi)) {
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < c; ++j) g[r * c + j] += oi->grad[j] * inv;
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (recording({&x})) {
    auto* xi = x.impl().get();
    auto* oi = out.impl().get();
    Tape::active()->record("sum", {x.impl()}, out.impl(), [=] {
      if (double* g = grad_of(xi)) {
        for (std::size_t i = 0; i < xi->data.size(); ++i) g[i] += oi->grad[0];
      }
    });
  }
  return out;
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
  if (table.rank() != 2) throw DimensionError("embedding: table must be rank 2, got " + shape_str(table.shape()));
  if (ids.empty()) throw DimensionError("embedding: empty id sequence");
  const std::size_t vocab = table.rows(), d = table.cols();
  Tensor out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw DataError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                      std::to_string(vocab));
    }
    std::copy(table.ptr() + ids[i] * d, table.ptr() + (ids[i] + 1) * d, out.ptr() + i * d);
  }
  if (recording({&table})) {
    auto* ti = table.impl().get();
    auto* oi = out.impl().get();
    std::vector<std::int32_t> idx(ids.begin(), ids.end());
    Tape::active()->record("embedding", {table.impl()}, out.impl(), [=] {
      if (double* g = grad_of(ti)) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < d; ++j) g[idx[i] * d + j] += oi->grad[i * d + j];
        }
      }
    });
  }
  return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const KeyMask& key_mask,
                 std::size_t heads, const Tensor& bias) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  require_matrix(v, "attention");
  const std::size_t nq = q.rows(), nk = k.rows(), d = q.cols(), dv = v.cols();
  if (heads == 0 || d % heads != 0 || dv % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (k.cols() != d || v.rows() != nk) {
    throw DimensionError("attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) + ", v " +
                         shape_str(v.shape()) + " are inconsistent");
  }
  if (!key_mask.empty() && key_mask.size() != nk) {
    throw DimensionError("attention: mask length " + std::to_string(key_mask.size()) + " vs " +
                         std::to_string(nk) + " keys");
  }
  if (bias.defined() && bias.size() != heads * nq * nk) {
    throw DimensionError("attention: bias " + shape_str(bias.shape()) + " vs heads×nq×nk = " +
                         std::to_string(heads * nq * nk));
  }
  const std::size_t dh = d / heads, dvh = dv / heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(dh));

  auto probs = std::make_shared<std::vector<double>>(heads * nq * nk);
  Tensor out(Shape{nq, dv});
  std::vector<double> logits(nk);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < nq; ++i) {
      const double* qi = q.ptr() + i * d + h * dh;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < nk; ++j) {
        const double* kj = k.ptr() + j * d + h * dh;
        double s = 0.0;
        for (std::size_t t = 0; t < dh; ++t) s += qi[t] * kj[t];
        s *= scl;
        if (bias.defined()) s += bias[(h * nq + i) * nk + j];
        if (!key_mask.empty() && key_mask[j]) s += kMaskLogit;
        logits[j] = s;
        mx = std::max(mx, s);
      }
      double* p = probs->data() + (h * nq + i) * nk;
      double total = 0.0;
      for (std::size_t j = 0; j < nk; ++j) {
        p[j] = std::exp(logits[j] - mx);
        total += p[j];
      }
      for (std::size_t j = 0; j < nk; ++j) p[j] /= total;
      double* oi = out.ptr() + i * dv + h * dvh;
      for (std::size_t j = 0; j < nk; ++j) {
        if (p[j] == 0.0) continue;
        const double* vj = v.ptr() + j * dv + h * dvh;
        for (std::size_t t = 0; t < dvh; ++t) oi[t] += p[j] * vj[t];
      }
    }
  }

  if (recording({&q, &k, &v, &bias})) {
    auto* qi = q.impl().get();
    auto* ki = k.impl().get();
    auto* vi = v.impl().get();
    auto* bi = bias.defined() ? bias.impl().get() : nullptr;
    auto* oi = out.impl().get();
    std::vector<std::shared_ptr<TensorImpl>> inputs{q.impl(), k.impl(), v.impl()};
    if (bias.defined()) inputs.push_back(bias.impl());
    Tape::active()->record("attention", std::move(inputs), out.impl(), [=] {
      double* gq = grad_of(qi);
      double* gk = grad_of(ki);
      double* gv = grad_of(vi);
      double* gb = bi ? grad_of(bi) : nullptr;
      std::vector<double> dp(nk), ds(nk);
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < nq; ++i) {
          const double* p = probs->data() + (h * nq + i) * nk;
          const double* dout = oi->grad.data() + i * dv + h * dvh;
          double dot = 0.0;
          for (std::size_t j = 0; j < nk; ++j) {
            const double* vj = vi->data.data() + j * dv + h * dvh;
            double s = 0.0;
            for (std::size_t t = 0; t < dvh; ++t) s += dout[t] * vj[t];
            dp[j] = s;
            dot += p[j] * s;
            if (gv && p[j] != 0.0) {
              double* gvj = gv + j * dv + h * dvh;
              for (std::size_t t = 0; t < dvh; ++t) gvj[t] += p[j] * dout[t];
            }
          }
          for (std::size_t j = 0; j < nk; ++j) ds[j] = p[j] * (dp[j] - dot);
          if (gb) {
            for (std::size_t j = 0; j < nk; ++j) gb[(h * nq + i) * nk + j] += ds[j];
          }
          const double* qrow = qi->data.data() + i * d + h * dh;
          for (std::size_t j = 0; j < nk; ++j) {
            if (ds[j] == 0.0) continue;
            const double* krow = ki->data.data() + j * d + h * dh;
            if (gq) {
              double* g = gq + i * d + h * dh;
              for (std::size_t t = 0; t < dh; ++t) g[t] += scl * ds[j] * krow[t];
            }
            if (gk) {
              double* g = gk + j * d + h * dh;
              for (std::size_t t = 0; t < dh; ++t) g[t] += scl * ds[j] * qrow[t];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require_matrix(logits, "cross_entropy");
  const std::size_t n = logits.rows(), c = logits.cols();
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
  }
  auto probs = std::make_shared<std::vector<double>>(n * c);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int y = targets[r];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw DataError("cross_entropy: target " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    }
    const double* x = logits.ptr() + r * c;
    double mx = x[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) (*probs)[r * c + j] = std::exp(x[j] - lse);
    total += lse - x[y];
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (recording({&logits})) {
    auto* li = logits.impl().get();
    auto* oi = out.impl().get();
    std::vector<int> ys(targets.begin(), targets.end());
    Tape::active()->record("cross_entropy", {logits.impl()}, out.impl(), [=] {
      if (double* g = grad_of(li)) {
        const double s = oi->grad[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            const double onehot = static_cast<int>(j) == ys[r] ? 1.0 : 0.0;
            g[r * c + j] += s * ((*probs)[r * c + j] - onehot);
          }
        }
      }
    });
  }
  return out;
}

Tensor binary_cross_entropy(const Tensor& logits, std::span<const double> targets) {
  if (targets.size() != logits.size()) {
    throw DimensionError("binary_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         shape_str(logits.shape()));
  }
  const std::size_t n = logits.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = logits[i];
    total += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(n));
  if (recording({&logits})) {
    auto* li = logits.impl().get();
    auto* oi = out.impl().get();
    std::vector<double> ts(targets.begin(), targets.end());
    Tape::active()->record("binary_cross_entropy", {logits.impl()}, out.impl(), [=] {
      if (double* g = grad_of(li)) {
        const double s = oi->grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = li->data[i];
          const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
          g[i] += s * (sig - ts[i]);
        }
      }
    });
  }
  return out;
}

}  // namespace fcmf::num
