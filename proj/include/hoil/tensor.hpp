#pragma once

// Dense double-precision tensor with a dynamic reverse-mode gradient tape.
// Covers what the models and losses need: MLPs, normalization, softmax,
// segment (per-cell) reductions, and scaled dot-product attention, plus a
// central finite-difference harness used to verify every differentiable path.
//
// Broadcasting is restricted to leading axes (a [C] bias against an [N,C]
// activation); anything else requires an explicit expand.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace hoil::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on demand
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad, accumulates into parents' grad. Captures raw `this`
  // and shared parents only, so the graph stays acyclic for ownership.
  std::function<void()> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return make(std::move(shape), {}, requires_grad, /*fill*/ 0.0);
  }
  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    return make(std::move(shape), {}, requires_grad, v);
  }
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false) {
    if (numel(shape) != data.size())
      throw std::invalid_argument("Tensor::from: data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return from({}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t ndim() const { return node_->shape.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& data() const { return node_->value; }
  std::vector<double>& mutable_data() { return node_->value; }

  double item() const {
    if (size() != 1)
      throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(size()) +
                                  " elements");
    return node_->value[0];
  }

  const std::vector<double>& grad() const {
    const_cast<detail::Node*>(node_.get())->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }
  void accumulate_grad(const std::vector<double>& g) {
    node_->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
  }

  detail::Node* node() const { return node_.get(); }
  std::shared_ptr<detail::Node> shared_node() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  static Tensor make(Shape shape, std::vector<double> data, bool requires_grad, double fill) {
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->value.assign(numel(shape), fill);
    t.node_->shape = std::move(shape);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline std::shared_ptr<Node> op_node(Shape shape, std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->value.resize(numel(shape));
  n->shape = std::move(shape);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) n->requires_grad = n->requires_grad || p->requires_grad;
  return n;
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

// True when b's shape is a strict suffix of a's (leading-axis broadcast).
inline bool is_suffix_shape(const Shape& a, const Shape& b) {
  if (b.size() >= a.size()) return false;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b[i] != a[a.size() - b.size() + i]) return false;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic (same shape, or leading-axis broadcast of b)
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, BwdA bwd_a,
                 BwdB bwd_b) {
  const bool broadcast = a.shape() != b.shape();
  if (broadcast && !is_suffix_shape(a.shape(), b.shape()))
    throw std::invalid_argument(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()) +
                                " (only leading-axis broadcast is supported)");
  auto out = op_node(a.shape(), {a.shared_node(), b.shared_node()});
  const std::size_t bn = b.size();
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = fwd(av[i], bv[i % bn]);
  if (out->requires_grad) {
    Node* self = out.get();
    auto pa = a.shared_node();
    auto pb = b.shared_node();
    out->backward = [self, pa, pb, bn, fwd, bwd_a, bwd_b] {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < pa->value.size(); ++i)
          pa->grad[i] += self->grad[i] * bwd_a(pa->value[i], pb->value[i % bn]);
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t i = 0; i < pa->value.size(); ++i)
          pb->grad[i % bn] += self->grad[i] * bwd_b(pa->value[i], pb->value[i % bn]);
      }
    };
  }
  return Tensor::wrap(out);
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
  auto out = op_node(a.shape(), {a.shared_node()});
  const auto& av = a.data();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = fwd(av[i]);
  if (out->requires_grad) {
    Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, bwd] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < pa->value.size(); ++i)
        pa->grad[i] += self->grad[i] * bwd(pa->value[i], self->value[i]);
    };
  }
  return Tensor::wrap(out);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}
inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

inline Tensor scale(const Tensor& a, double c) {
  return detail::unary_op(
      a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}
inline Tensor add_scalar(const Tensor& a, double c) {
  return detail::unary_op(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}
inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor relu(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}
inline Tensor sigmoid(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}
inline Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  return detail::unary_op(
      a, [=](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [=](double x, double) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}
inline Tensor log(const Tensor& a) {
  for (double v : a.data())
    if (!(v > 0.0)) throw std::invalid_argument("log: non-positive input " + std::to_string(v));
  return detail::unary_op(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
inline Tensor exp(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
inline Tensor sqrt(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}
/// max(a, c); gradient flows only where a > c.
inline Tensor clamp_min(const Tensor& a, double c) {
  return detail::unary_op(
      a, [c](double x) { return x > c ? x : c; },
      [c](double x, double) { return x > c ? 1.0 : 0.0; });
}
/// log(1 + exp(x)), evaluated in the overflow-safe form.
inline Tensor softplus(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}
/// Elementwise Huber penalty of (a - b): quadratic within beta, linear beyond.
inline Tensor smooth_l1(const Tensor& a, const Tensor& b, double beta = 1.0) {
  if (beta <= 0) throw std::invalid_argument("smooth_l1: beta must be > 0");
  return detail::binary_op(
      "smooth_l1", a, b,
      [beta](double x, double y) {
        const double d = std::abs(x - y);
        return d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
      },
      [beta](double x, double y) {
        const double d = x - y;
        return std::clamp(d / beta, -1.0, 1.0);
      },
      [beta](double x, double y) {
        const double d = x - y;
        return -std::clamp(d / beta, -1.0, 1.0);
      });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  auto out = detail::op_node({m, n}, {a.shared_node(), b.shared_node()});
  {
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out->value.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t l = 0; l < k; ++l) {
        const double av = pa[i * k + l];
        if (av == 0.0) continue;
        const double* brow = pb + l * n;
        double* crow = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  }
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    auto pb = b.shared_node();
    out->backward = [self, pa, pb, m, k, n] {
      const double* g = self->grad.data();
      if (pa->requires_grad) {
        pa->ensure_grad();
        // dA = G * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double gv = g[i * n + j];
            if (gv == 0.0) continue;
            for (std::size_t l = 0; l < k; ++l) pa->grad[i * k + l] += gv * pb->value[l * n + j];
          }
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        // dB = A^T * G
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t l = 0; l < k; ++l) {
            const double av = pa->value[i * k + l];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) pb->grad[l * n + j] += av * g[i * n + j];
          }
      }
    };
  }
  return Tensor::wrap(out);
}

inline Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) throw std::invalid_argument("transpose: expected 2D, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  auto out = detail::op_node({n, m}, {a.shared_node()});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[j * m + i] = a.data()[i * n + j];
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, m, n] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pa->grad[i * n + j] += self->grad[j * m + i];
    };
  }
  return Tensor::wrap(out);
}

inline Tensor reshape(const Tensor& a, Shape new_shape) {
  if (numel(new_shape) != a.size())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(new_shape));
  auto out = detail::op_node(std::move(new_shape), {a.shared_node()});
  out->value = a.data();
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < pa->value.size(); ++i) pa->grad[i] += self->grad[i];
    };
  }
  return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// Axis reductions and normalizations
// ---------------------------------------------------------------------------

namespace detail {

struct AxisSplit {
  std::size_t outer, len, inner;
};

inline AxisSplit split_axis(const Shape& s, int axis, const char* op) {
  const int nd = static_cast<int>(s.size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd)
    throw std::invalid_argument(std::string(op) + ": axis out of range for " + shape_str(s));
  AxisSplit r{1, s[axis], 1};
  for (int i = 0; i < axis; ++i) r.outer *= s[i];
  for (int i = axis + 1; i < nd; ++i) r.inner *= s[i];
  return r;
}

inline Shape drop_axis(const Shape& s, int axis) {
  const int nd = static_cast<int>(s.size());
  if (axis < 0) axis += nd;
  Shape out;
  for (int i = 0; i < nd; ++i)
    if (i != axis) out.push_back(s[i]);
  return out;
}

}  // namespace detail

inline Tensor sum(const Tensor& a, int axis) {
  const auto sp = detail::split_axis(a.shape(), axis, "sum");
  auto out = detail::op_node(detail::drop_axis(a.shape(), axis), {a.shared_node()});
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t l = 0; l < sp.len; ++l)
      for (std::size_t in = 0; in < sp.inner; ++in)
        out->value[o * sp.inner + in] += a.data()[(o * sp.len + l) * sp.inner + in];
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, sp] {
      pa->ensure_grad();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t l = 0; l < sp.len; ++l)
          for (std::size_t in = 0; in < sp.inner; ++in)
            pa->grad[(o * sp.len + l) * sp.inner + in] += self->grad[o * sp.inner + in];
    };
  }
  return Tensor::wrap(out);
}

inline Tensor mean(const Tensor& a, int axis) {
  const auto sp = detail::split_axis(a.shape(), axis, "mean");
  return scale(sum(a, axis), 1.0 / static_cast<double>(sp.len));
}

inline Tensor sum_all(const Tensor& a) {
  auto out = detail::op_node({}, {a.shared_node()});
  out->value[0] = std::accumulate(a.data().begin(), a.data().end(), 0.0);
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa] {
      pa->ensure_grad();
      for (double& g : pa->grad) g += self->grad[0];
    };
  }
  return Tensor::wrap(out);
}

inline Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

inline Tensor softmax(const Tensor& a, int axis = -1) {
  const auto sp = detail::split_axis(a.shape(), axis, "softmax");
  auto out = detail::op_node(a.shape(), {a.shared_node()});
  const auto& av = a.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < sp.len; ++l)
        mx = std::max(mx, av[(o * sp.len + l) * sp.inner + in]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        const std::size_t idx = (o * sp.len + l) * sp.inner + in;
        out->value[idx] = std::exp(av[idx] - mx);
        z += out->value[idx];
      }
      for (std::size_t l = 0; l < sp.len; ++l) out->value[(o * sp.len + l) * sp.inner + in] /= z;
    }
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, sp] {
      pa->ensure_grad();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
          double dotp = 0.0;
          for (std::size_t l = 0; l < sp.len; ++l) {
            const std::size_t idx = (o * sp.len + l) * sp.inner + in;
            dotp += self->grad[idx] * self->value[idx];
          }
          for (std::size_t l = 0; l < sp.len; ++l) {
            const std::size_t idx = (o * sp.len + l) * sp.inner + in;
            pa->grad[idx] += self->value[idx] * (self->grad[idx] - dotp);
          }
        }
    };
  }
  return Tensor::wrap(out);
}

inline Tensor log_softmax(const Tensor& a, int axis = -1) {
  const auto sp = detail::split_axis(a.shape(), axis, "log_softmax");
  auto out = detail::op_node(a.shape(), {a.shared_node()});
  const auto& av = a.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < sp.len; ++l)
        mx = std::max(mx, av[(o * sp.len + l) * sp.inner + in]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l)
        z += std::exp(av[(o * sp.len + l) * sp.inner + in] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t l = 0; l < sp.len; ++l) {
        const std::size_t idx = (o * sp.len + l) * sp.inner + in;
        out->value[idx] = av[idx] - lse;
      }
    }
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, sp] {
      pa->ensure_grad();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
          double gsum = 0.0;
          for (std::size_t l = 0; l < sp.len; ++l)
            gsum += self->grad[(o * sp.len + l) * sp.inner + in];
          for (std::size_t l = 0; l < sp.len; ++l) {
            const std::size_t idx = (o * sp.len + l) * sp.inner + in;
            pa->grad[idx] += self->grad[idx] - std::exp(self->value[idx]) * gsum;
          }
        }
    };
  }
  return Tensor::wrap(out);
}

/// Normalizes the last axis to zero mean and unit variance.
inline Tensor layer_norm(const Tensor& a, double eps = 1e-5) {
  if (a.ndim() == 0) throw std::invalid_argument("layer_norm: scalar input");
  const auto sp = detail::split_axis(a.shape(), -1, "layer_norm");
  auto out = detail::op_node(a.shape(), {a.shared_node()});
  std::vector<double> inv_std(sp.outer);
  const auto& av = a.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const double* x = av.data() + o * sp.len;
    double mu = 0.0;
    for (std::size_t l = 0; l < sp.len; ++l) mu += x[l];
    mu /= static_cast<double>(sp.len);
    double var = 0.0;
    for (std::size_t l = 0; l < sp.len; ++l) var += (x[l] - mu) * (x[l] - mu);
    var /= static_cast<double>(sp.len);
    inv_std[o] = 1.0 / std::sqrt(var + eps);
    for (std::size_t l = 0; l < sp.len; ++l) out->value[o * sp.len + l] = (x[l] - mu) * inv_std[o];
  }
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, sp, inv_std] {
      pa->ensure_grad();
      const double inv_len = 1.0 / static_cast<double>(sp.len);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const double* g = self->grad.data() + o * sp.len;
        const double* y = self->value.data() + o * sp.len;
        double gmean = 0.0, gymean = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) {
          gmean += g[l];
          gymean += g[l] * y[l];
        }
        gmean *= inv_len;
        gymean *= inv_len;
        for (std::size_t l = 0; l < sp.len; ++l)
          pa->grad[o * sp.len + l] += inv_std[o] * (g[l] - gmean - y[l] * gymean);
      }
    };
  }
  return Tensor::wrap(out);
}

/// Row-wise L2 normalization of a 2D tensor.
inline Tensor normalize_rows(const Tensor& a, double eps = 1e-12) {
  if (a.ndim() != 2) throw std::invalid_argument("normalize_rows: expected 2D, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  auto out = detail::op_node({m, n}, {a.shared_node()});
  std::vector<double> inv_norm(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a.data()[i * n + j] * a.data()[i * n + j];
    inv_norm[i] = 1.0 / std::sqrt(s + eps);
    for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = a.data()[i * n + j] * inv_norm[i];
  }
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, m, n, inv_norm] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const double* g = self->grad.data() + i * n;
        const double* y = self->value.data() + i * n;
        double yg = 0.0;
        for (std::size_t j = 0; j < n; ++j) yg += y[j] * g[j];
        for (std::size_t j = 0; j < n; ++j)
          pa->grad[i * n + j] += inv_norm[i] * (g[j] - y[j] * yg);
      }
    };
  }
  return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  const int nd = static_cast<int>(s0.size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw std::invalid_argument("concat: axis out of range");
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (static_cast<int>(p.ndim()) != nd)
      throw std::invalid_argument("concat: rank mismatch");
    for (int i = 0; i < nd; ++i)
      if (i != axis && p.shape()[i] != s0[i])
        throw std::invalid_argument("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                    shape_str(s0));
    out_shape[axis] += p.shape()[axis];
  }
  std::vector<std::shared_ptr<detail::Node>> parents;
  for (const auto& p : parts) parents.push_back(p.shared_node());
  auto out = detail::op_node(out_shape, std::move(parents));

  const auto sp = detail::split_axis(out_shape, axis, "concat");
  std::vector<std::size_t> lens, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    lens.push_back(p.shape()[axis]);
    offsets.push_back(off);
    off += p.shape()[axis];
  }
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t l = 0; l < lens[k]; ++l)
        for (std::size_t in = 0; in < sp.inner; ++in)
          out->value[(o * sp.len + offsets[k] + l) * sp.inner + in] =
              pv[(o * lens[k] + l) * sp.inner + in];
  }
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto parent_nodes = out->parents;
    out->backward = [self, parent_nodes, sp, lens, offsets] {
      for (std::size_t k = 0; k < parent_nodes.size(); ++k) {
        auto& p = parent_nodes[k];
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t l = 0; l < lens[k]; ++l)
            for (std::size_t in = 0; in < sp.inner; ++in)
              p->grad[(o * lens[k] + l) * sp.inner + in] +=
                  self->grad[(o * sp.len + offsets[k] + l) * sp.inner + in];
      }
    };
  }
  return Tensor::wrap(out);
}

/// Selects rows of a 2D tensor (duplicates allowed). Backward scatter-adds.
inline Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
  if (a.ndim() != 2) throw std::invalid_argument("gather_rows: expected 2D, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  for (std::size_t r : rows)
    if (r >= m) throw std::invalid_argument("gather_rows: row index out of range");
  auto out = detail::op_node({rows.size(), n}, {a.shared_node()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(a.data().data() + rows[i] * n, n, out->value.data() + i * n);
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, rows, n] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) pa->grad[rows[i] * n + j] += self->grad[i * n + j];
    };
  }
  return Tensor::wrap(out);
}

/// Slice along the last axis: out[..., j] = a[..., start + j].
inline Tensor slice_last(const Tensor& a, std::size_t start, std::size_t end) {
  if (a.ndim() == 0) throw std::invalid_argument("slice_last: scalar input");
  const auto sp = detail::split_axis(a.shape(), -1, "slice_last");
  if (start > end || end > sp.len)
    throw std::invalid_argument("slice_last: bad range [" + std::to_string(start) + "," +
                                std::to_string(end) + ") for axis length " + std::to_string(sp.len));
  Shape out_shape = a.shape();
  out_shape.back() = end - start;
  auto out = detail::op_node(out_shape, {a.shared_node()});
  const std::size_t w = end - start;
  for (std::size_t o = 0; o < sp.outer; ++o)
    std::copy_n(a.data().data() + o * sp.len + start, w, out->value.data() + o * w);
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, sp, start, w] {
      pa->ensure_grad();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < w; ++j)
          pa->grad[o * sp.len + start + j] += self->grad[o * w + j];
    };
  }
  return Tensor::wrap(out);
}

/// Tiles `a` along a new leading axis of length n. Backward sums over it.
inline Tensor expand_leading(const Tensor& a, std::size_t n) {
  Shape out_shape;
  out_shape.push_back(n);
  for (std::size_t d : a.shape()) out_shape.push_back(d);
  auto out = detail::op_node(out_shape, {a.shared_node()});
  for (std::size_t i = 0; i < n; ++i)
    std::copy(a.data().begin(), a.data().end(), out->value.begin() + i * a.size());
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    const std::size_t sz = a.size();
    out->backward = [self, pa, n, sz] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < sz; ++j) pa->grad[j] += self->grad[i * sz + j];
    };
  }
  return Tensor::wrap(out);
}

/// Scales row i of a 2D tensor by w[i].
inline Tensor scale_rows(const Tensor& a, const Tensor& w) {
  if (a.ndim() != 2 || w.ndim() != 1 || w.shape()[0] != a.shape()[0])
    throw std::invalid_argument("scale_rows: shapes " + shape_str(a.shape()) + " and " +
                                shape_str(w.shape()) + " are incompatible");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  auto out = detail::op_node({m, n}, {a.shared_node(), w.shared_node()});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = a.data()[i * n + j] * w.data()[i];
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    auto pw = w.shared_node();
    out->backward = [self, pa, pw, m, n] {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j)
            pa->grad[i * n + j] += self->grad[i * n + j] * pw->value[i];
      }
      if (pw->requires_grad) {
        pw->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += self->grad[i * n + j] * pa->value[i * n + j];
          pw->grad[i] += s;
        }
      }
    };
  }
  return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// Segment (per-cell) ops
// ---------------------------------------------------------------------------

namespace detail {
inline void check_segments(const char* op, std::size_t rows, const std::vector<int>& seg,
                           int n_seg) {
  if (seg.size() != rows)
    throw std::invalid_argument(std::string(op) + ": segment id count " +
                                std::to_string(seg.size()) + " != row count " +
                                std::to_string(rows));
  for (int s : seg)
    if (s < 0 || s >= n_seg) throw std::invalid_argument(std::string(op) + ": segment id out of range");
}
}  // namespace detail

/// out[s] = sum of rows with segment id s.
inline Tensor segment_sum(const Tensor& a, const std::vector<int>& seg, int n_seg) {
  if (a.ndim() != 2) throw std::invalid_argument("segment_sum: expected 2D input");
  detail::check_segments("segment_sum", a.shape()[0], seg, n_seg);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  auto out = detail::op_node({static_cast<std::size_t>(n_seg), n}, {a.shared_node()});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->value[seg[i] * n + j] += a.data()[i * n + j];
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, seg, m, n] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          pa->grad[i * n + j] += self->grad[seg[i] * n + j];
    };
  }
  return Tensor::wrap(out);
}

/// Per-segment, per-channel maximum. Every segment must be non-empty.
inline Tensor segment_max(const Tensor& a, const std::vector<int>& seg, int n_seg) {
  if (a.ndim() != 2) throw std::invalid_argument("segment_max: expected 2D input");
  detail::check_segments("segment_max", a.shape()[0], seg, n_seg);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  auto out = detail::op_node({static_cast<std::size_t>(n_seg), n}, {a.shared_node()});
  std::vector<std::size_t> argmax(static_cast<std::size_t>(n_seg) * n, SIZE_MAX);
  std::fill(out->value.begin(), out->value.end(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t oj = seg[i] * n + j;
      if (a.data()[i * n + j] > out->value[oj]) {
        out->value[oj] = a.data()[i * n + j];
        argmax[oj] = i;
      }
    }
  for (std::size_t k = 0; k < argmax.size(); ++k)
    if (argmax[k] == SIZE_MAX)
      throw std::invalid_argument("segment_max: empty segment " + std::to_string(k / n));
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pa = a.shared_node();
    out->backward = [self, pa, argmax, n, n_seg] {
      pa->ensure_grad();
      for (std::size_t s = 0; s < static_cast<std::size_t>(n_seg); ++s)
        for (std::size_t j = 0; j < n; ++j)
          pa->grad[argmax[s * n + j] * n + j] += self->grad[s * n + j];
    };
  }
  return Tensor::wrap(out);
}

/// Softmax of a 1D logit vector within each segment; weights sum to one per
/// segment. Every segment must be non-empty.
inline Tensor segment_softmax(const Tensor& logits, const std::vector<int>& seg, int n_seg) {
  if (logits.ndim() != 1) throw std::invalid_argument("segment_softmax: expected 1D logits");
  detail::check_segments("segment_softmax", logits.shape()[0], seg, n_seg);
  const std::size_t m = logits.shape()[0];
  std::vector<double> mx(n_seg, -std::numeric_limits<double>::infinity());
  std::vector<char> seen(n_seg, 0);
  for (std::size_t i = 0; i < m; ++i) {
    mx[seg[i]] = std::max(mx[seg[i]], logits.data()[i]);
    seen[seg[i]] = 1;
  }
  for (int s = 0; s < n_seg; ++s)
    if (!seen[s]) throw std::invalid_argument("segment_softmax: empty segment " + std::to_string(s));
  auto out = detail::op_node({m}, {logits.shared_node()});
  std::vector<double> z(n_seg, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    out->value[i] = std::exp(logits.data()[i] - mx[seg[i]]);
    z[seg[i]] += out->value[i];
  }
  for (std::size_t i = 0; i < m; ++i) out->value[i] /= z[seg[i]];
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pl = logits.shared_node();
    out->backward = [self, pl, seg, m, n_seg] {
      pl->ensure_grad();
      std::vector<double> dotp(n_seg, 0.0);
      for (std::size_t i = 0; i < m; ++i) dotp[seg[i]] += self->grad[i] * self->value[i];
      for (std::size_t i = 0; i < m; ++i)
        pl->grad[i] += self->value[i] * (self->grad[i] - dotp[seg[i]]);
    };
  }
  return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// Attention and small composites
// ---------------------------------------------------------------------------

/// Fused multi-head attention over already-projected q/k/v [rows, C] with C
/// split into `heads` contiguous column blocks. When `window` > 0, q and k/v
/// rows must coincide and attention is restricted to consecutive row windows
/// of that size; window 0 attends across everything (the cross-attention
/// case). One tape node; the backward recomputes from the saved softmax.
inline Tensor multihead_attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                                       std::size_t heads, std::size_t window = 0) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2 || q.shape()[1] != k.shape()[1] ||
      k.shape() != v.shape())
    throw std::invalid_argument("multihead_attention_core: incompatible shapes " +
                                shape_str(q.shape()) + ", " + shape_str(k.shape()) + ", " +
                                shape_str(v.shape()));
  const std::size_t nq = q.shape()[0], nk = k.shape()[0], c = q.shape()[1];
  if (heads == 0 || c % heads != 0)
    throw std::invalid_argument("multihead_attention_core: channel width not divisible by heads");
  if (window > 0 && nq != nk)
    throw std::invalid_argument("multihead_attention_core: windowed attention needs matching rows");
  const std::size_t dh = c / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  struct Block {
    std::size_t q0, q1, k0, k1;
  };
  std::vector<Block> blocks;
  if (window == 0) {
    blocks.push_back({0, nq, 0, nk});
  } else {
    for (std::size_t start = 0; start < nq; start += window) {
      const std::size_t end = std::min(start + window, nq);
      blocks.push_back({start, end, start, end});
    }
  }

  auto out = detail::op_node({nq, c}, {q.shared_node(), k.shared_node(), v.shared_node()});
  // softmax probabilities saved per (block, head), consumed by the backward
  auto probs = std::make_shared<std::vector<std::vector<double>>>();
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  for (const Block& b : blocks) {
    const std::size_t m = b.q1 - b.q0, n = b.k1 - b.k0;
    for (std::size_t h = 0; h < heads; ++h) {
      std::vector<double> s(m * n);
      for (std::size_t i = 0; i < m; ++i) {
        const double* qr = qd + (b.q0 + i) * c + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
          const double* kr = kd + (b.k0 + j) * c + h * dh;
          double dot = 0.0;
          for (std::size_t l = 0; l < dh; ++l) dot += qr[l] * kr[l];
          s[i * n + j] = dot * inv_sqrt;
          mx = std::max(mx, s[i * n + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          s[i * n + j] = std::exp(s[i * n + j] - mx);
          z += s[i * n + j];
        }
        double* orow = out->value.data() + (b.q0 + i) * c + h * dh;
        for (std::size_t j = 0; j < n; ++j) {
          s[i * n + j] /= z;
          const double* vr = vd + (b.k0 + j) * c + h * dh;
          const double w = s[i * n + j];
          for (std::size_t l = 0; l < dh; ++l) orow[l] += w * vr[l];
        }
      }
      probs->push_back(std::move(s));
    }
  }
  if (out->requires_grad) {
    detail::Node* self = out.get();
    auto pq = q.shared_node();
    auto pk = k.shared_node();
    auto pv = v.shared_node();
    out->backward = [self, pq, pk, pv, probs, blocks, heads, dh, c, inv_sqrt] {
      pq->ensure_grad();
      pk->ensure_grad();
      pv->ensure_grad();
      std::size_t slot = 0;
      for (const Block& b : blocks) {
        const std::size_t m = b.q1 - b.q0, n = b.k1 - b.k0;
        for (std::size_t h = 0; h < heads; ++h) {
          const std::vector<double>& s = (*probs)[slot++];
          std::vector<double> ds(n);
          for (std::size_t i = 0; i < m; ++i) {
            const double* go = self->grad.data() + (b.q0 + i) * c + h * dh;
            double rowdot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double* vr = pv->value.data() + (b.k0 + j) * c + h * dh;
              double acc = 0.0;
              for (std::size_t l = 0; l < dh; ++l) acc += go[l] * vr[l];
              ds[j] = acc;
              rowdot += acc * s[i * n + j];
              double* gv = pv->grad.data() + (b.k0 + j) * c + h * dh;
              const double w = s[i * n + j];
              for (std::size_t l = 0; l < dh; ++l) gv[l] += w * go[l];
            }
            const double* qr = pq->value.data() + (b.q0 + i) * c + h * dh;
            double* gq = pq->grad.data() + (b.q0 + i) * c + h * dh;
            for (std::size_t j = 0; j < n; ++j) {
              const double dz = s[i * n + j] * (ds[j] - rowdot) * inv_sqrt;
              if (dz == 0.0) continue;
              const double* kr = pk->value.data() + (b.k0 + j) * c + h * dh;
              double* gk = pk->grad.data() + (b.k0 + j) * c + h * dh;
              for (std::size_t l = 0; l < dh; ++l) {
                gq[l] += dz * kr[l];
                gk[l] += dz * qr[l];
              }
            }
          }
        }
      }
    };
  }
  return Tensor::wrap(out);
}

/// softmax(Q K^T / sqrt(d)) V for 2D Q [nq,d], K [nk,d], V [nk,dv].
inline Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2 || q.shape()[1] != k.shape()[1] ||
      k.shape()[0] != v.shape()[0])
    throw std::invalid_argument("scaled_dot_attention: incompatible shapes " +
                                shape_str(q.shape()) + ", " + shape_str(k.shape()) + ", " +
                                shape_str(v.shape()));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.shape()[1]));
  Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  return matmul(softmax(scores, -1), v);
}

inline Tensor mse(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("mse", a, b);
  Tensor d = sub(a, b);
  return mean_all(mul(d, d));
}

inline bool has_nonfinite(const Tensor& t) {
  for (double v : t.data())
    if (!std::isfinite(v)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

/// Reverse-mode sweep from a scalar loss. Gradients accumulate additively on
/// leaf tensors across repeated calls; intermediate adjoints are reset per
/// call.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1 || loss.ndim() != 0)
    throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(loss.shape()));
  if (!loss.node()->requires_grad) return;

  // Iterative post-order DFS for the topological order.
  std::vector<detail::Node*> topo;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{loss.node(), 0}};
  visited.insert(loss.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  // Fresh adjoints for interior nodes; leaves keep accumulating.
  for (detail::Node* n : topo)
    if (!n->parents.empty()) n->grad.assign(n->value.size(), 0.0);
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backward) (*it)->backward();
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// A named leaf tensor that always requires gradient.
struct Parameter {
  std::string name;
  Tensor tensor;

  Parameter() = default;
  Parameter(std::string n, Tensor t) : name(std::move(n)), tensor(std::move(t)) {
    if (!tensor.requires_grad())
      throw std::invalid_argument("Parameter '" + name + "' must require gradient");
  }
};

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central-difference check of reverse-mode gradients. Returns the maximum
/// relative error |g_ad - g_fd| / max(1, |g_fd|) over every coordinate of
/// every parameter. Throws if `f` is not deterministic.
inline double finite_difference_check(const std::function<Tensor()>& f,
                                      std::vector<Parameter*> params, double h = 1e-6) {
  if (params.empty()) return 0.0;
  const double v0 = f().item();
  const double v1 = f().item();
  if (v0 != v1)
    throw std::runtime_error("finite_difference_check: non-deterministic function (" +
                             std::to_string(v0) + " vs " + std::to_string(v1) + ")");
  for (Parameter* p : params) p->tensor.zero_grad();
  backward(f());
  double max_rel = 0.0;
  for (Parameter* p : params) {
    auto& data = p->tensor.mutable_data();
    const auto& g_ad = p->tensor.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double fp = f().item();
      data[i] = saved - h;
      const double fm = f().item();
      data[i] = saved;
      const double g_fd = (fp - fm) / (2.0 * h);
      const double rel = std::abs(g_ad[i] - g_fd) / std::max(1.0, std::abs(g_fd));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: flat binary, magic "HOILCKPT", little-endian payloads.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated u32");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void write_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated f64");
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

constexpr char kCheckpointMagic[8] = {'H', 'O', 'I', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline void write_checkpoint(const std::string& path, const NamedTensors& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, 8);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u32(os, static_cast<uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    detail::write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(os, static_cast<uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) detail::write_u32(os, static_cast<uint32_t>(d));
    for (double v : t.data()) detail::write_f64(os, v);
  }
  if (!os) throw std::runtime_error("write_checkpoint: write failed for " + path);
}

inline NamedTensors read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("read_checkpoint: bad magic in " + path);
  const uint32_t version = detail::read_u32(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("read_checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = detail::read_u32(is);
  NamedTensors entries;
  entries.reserve(count);
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = detail::read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rank = detail::read_u32(is);
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = detail::read_u32(is);
    std::vector<double> data(numel(shape));
    for (double& v : data) v = detail::read_f64(is);
    entries.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(data)));
  }
  return entries;
}

}  // namespace hoil::ad
