#pragma once

// Small neural-network building blocks over the autodiff tensor: a named
// parameter store with seeded initialization, linear/MLP/layer-norm layers,
// multi-head attention, and an AdamW step with cosine annealing.

#include <cstdint>
#include <random>
#include <unordered_map>

#include "hoil/tensor.hpp"

namespace hoil::nn {

using ad::Shape;
using ad::Tensor;

enum class Init { Zeros, Ones, XavierUniform, Normal };

class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : rng_(seed) {}

  /// Creates (and registers) a parameter. Creation order is the serialization
  /// order, so a fixed seed gives bit-identical initialization.
  Tensor create(const std::string& name, Shape shape, Init init, double scale = 0.02) {
    if (index_.count(name))
      throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    std::vector<double> data(ad::numel(shape), 0.0);
    switch (init) {
      case Init::Zeros:
        break;
      case Init::Ones:
        std::fill(data.begin(), data.end(), 1.0);
        break;
      case Init::XavierUniform: {
        const std::size_t fan_in = shape.size() >= 1 ? shape[0] : 1;
        const std::size_t fan_out = shape.size() >= 2 ? shape[1] : shape[0];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (double& v : data) v = dist(rng_);
        break;
      }
      case Init::Normal: {
        std::normal_distribution<double> dist(0.0, scale);
        for (double& v : data) v = dist(rng_);
        break;
      }
    }
    Tensor t = Tensor::from(std::move(shape), std::move(data), /*requires_grad=*/true);
    index_[name] = params_.size();
    params_.emplace_back(name, t);
    return t;
  }

  std::vector<ad::Parameter>& params() { return params_; }
  const std::vector<ad::Parameter>& params() const { return params_; }

  ad::Parameter* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

  ad::NamedTensors named_tensors() const {
    ad::NamedTensors out;
    for (const auto& p : params_) out.emplace_back(p.name, p.tensor);
    return out;
  }

  /// Copies values from `entries` into matching parameters. In strict mode
  /// every parameter must be present; extra entries are always ignored.
  void load(const ad::NamedTensors& entries, bool strict = true) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : entries) by_name[name] = &t;
    for (auto& p : params_) {
      auto it = by_name.find(p.name);
      if (it == by_name.end()) {
        if (strict) throw std::runtime_error("ParamStore::load: missing parameter '" + p.name + "'");
        continue;
      }
      if (it->second->shape() != p.tensor.shape())
        throw std::runtime_error("ParamStore::load: shape mismatch for '" + p.name + "': stored " +
                                 ad::shape_str(it->second->shape()) + " vs model " +
                                 ad::shape_str(p.tensor.shape()));
      p.tensor.mutable_data() = it->second->data();
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::vector<ad::Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
         Init weight_init = Init::XavierUniform)
      : weight(store.create(name + ".weight", {in, out}, weight_init)),
        bias(store.create(name + ".bias", {out}, Init::Zeros)) {}

  Tensor operator()(const Tensor& x) const { return ad::add(ad::matmul(x, weight), bias); }
};

/// Two-layer MLP with GELU, hidden width = input width.
struct Mlp {
  Linear fc1, fc2;

  Mlp() = default;
  Mlp(ParamStore& store, const std::string& name, std::size_t in, std::size_t out)
      : fc1(store, name + ".fc1", in, in), fc2(store, name + ".fc2", in, out) {}

  Tensor operator()(const Tensor& x) const { return fc2(ad::gelu(fc1(x))); }
};

struct LayerNorm {
  Tensor gamma, beta;

  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, std::size_t dim)
      : gamma(store.create(name + ".gamma", {dim}, Init::Ones)),
        beta(store.create(name + ".beta", {dim}, Init::Zeros)) {}

  Tensor operator()(const Tensor& x) const {
    return ad::add(ad::mul(ad::layer_norm(x), gamma), beta);
  }
};

struct MultiheadAttention {
  Linear wq, wk, wv, wo;
  std::size_t n_heads = 1;

  MultiheadAttention() = default;
  MultiheadAttention(ParamStore& store, const std::string& name, std::size_t dim,
                     std::size_t heads)
      : wq(store, name + ".wq", dim, dim),
        wk(store, name + ".wk", dim, dim),
        wv(store, name + ".wv", dim, dim),
        wo(store, name + ".wo", dim, dim),
        n_heads(heads) {
    if (dim % heads != 0)
      throw std::invalid_argument("MultiheadAttention: dim " + std::to_string(dim) +
                                  " not divisible by heads " + std::to_string(heads));
  }

  /// Cross attention (window 0) or, when `window` > 0 and the inputs
  /// coincide, attention within consecutive row windows.
  Tensor operator()(const Tensor& query_in, const Tensor& kv_in, std::size_t window = 0) const {
    return wo(ad::multihead_attention_core(wq(query_in), wk(kv_in), wv(kv_in), n_heads, window));
  }
};

/// Pre-norm transformer block. Self-attention may be restricted to
/// consecutive windows of the (serialized) row order.
struct TransformerBlock {
  LayerNorm norm1, norm2;
  MultiheadAttention attn;
  Mlp mlp;

  TransformerBlock() = default;
  TransformerBlock(ParamStore& store, const std::string& name, std::size_t dim, std::size_t heads)
      : norm1(store, name + ".norm1", dim),
        norm2(store, name + ".norm2", dim),
        attn(store, name + ".attn", dim, heads),
        mlp(store, name + ".mlp", dim, dim) {}

  Tensor operator()(const Tensor& x, std::size_t window = 0) const {
    Tensor h = norm1(x);
    Tensor a = attn(h, h, window >= x.shape()[0] ? 0 : window);
    Tensor y = ad::add(x, a);
    return ad::add(y, mlp(norm2(y)));
  }
};

/// Cross-attention block: queries attend to a key/value set, followed by a
/// residual MLP.
struct CrossAttentionBlock {
  LayerNorm norm_q, norm_kv, norm2;
  MultiheadAttention attn;
  Mlp mlp;

  CrossAttentionBlock() = default;
  CrossAttentionBlock(ParamStore& store, const std::string& name, std::size_t dim,
                      std::size_t heads)
      : norm_q(store, name + ".norm_q", dim),
        norm_kv(store, name + ".norm_kv", dim),
        norm2(store, name + ".norm2", dim),
        attn(store, name + ".attn", dim, heads),
        mlp(store, name + ".mlp", dim, dim) {}

  Tensor operator()(const Tensor& queries, const Tensor& kv) const {
    Tensor y = ad::add(queries, attn(norm_q(queries), norm_kv(kv)));
    return ad::add(y, mlp(norm2(y)));
  }
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Adaptive-moment optimizer with decoupled weight decay.
struct AdamW {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int64_t t = 0;
  std::unordered_map<std::string, std::vector<double>> m, v;

  void step(std::vector<ad::Parameter>& params, double lr_scale = 1.0) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (auto& p : params) {
      auto& data = p.tensor.mutable_data();
      const auto& g = p.tensor.grad();
      auto& mp = m[p.name];
      auto& vp = v[p.name];
      if (mp.size() != data.size()) mp.assign(data.size(), 0.0);
      if (vp.size() != data.size()) vp.assign(data.size(), 0.0);
      const double step_lr = lr * lr_scale;
      for (std::size_t i = 0; i < data.size(); ++i) {
        mp[i] = beta1 * mp[i] + (1.0 - beta1) * g[i];
        vp[i] = beta2 * vp[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = mp[i] / bc1;
        const double vhat = vp[i] / bc2;
        data[i] -= step_lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * data[i]);
      }
    }
  }

  /// Serializes moments plus the step counter for bitwise-resumable training.
  ad::NamedTensors state(const std::vector<ad::Parameter>& params) const {
    ad::NamedTensors out;
    out.emplace_back("__opt.t", Tensor::from({}, {static_cast<double>(t)}));
    for (const auto& p : params) {
      auto mi = m.find(p.name);
      auto vi = v.find(p.name);
      if (mi == m.end() || vi == v.end()) continue;
      out.emplace_back("__opt.m." + p.name, Tensor::from(p.tensor.shape(), mi->second));
      out.emplace_back("__opt.v." + p.name, Tensor::from(p.tensor.shape(), vi->second));
    }
    return out;
  }

  void load_state(const ad::NamedTensors& entries) {
    for (const auto& [name, tensor] : entries) {
      if (name == "__opt.t")
        t = static_cast<int64_t>(tensor.item());
      else if (name.rfind("__opt.m.", 0) == 0)
        m[name.substr(8)] = tensor.data();
      else if (name.rfind("__opt.v.", 0) == 0)
        v[name.substr(8)] = tensor.data();
    }
  }
};

inline double cosine_lr_scale(int64_t step, int64_t total_steps) {
  if (total_steps <= 0) return 1.0;
  const double x = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return 0.5 * (1.0 + std::cos(3.14159265358979323846 * x));
}

/// Deterministic per-step RNG stream: training never carries RNG state, so
/// resuming from a checkpoint reproduces the exact stream.
inline std::mt19937_64 step_rng(uint64_t seed, uint64_t step, uint64_t salt = 0) {
  // splitmix-style mixing of (seed, step, salt)
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (step + 1) + 0x632be59bd9b4e019ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return std::mt19937_64(z);
}

}  // namespace hoil::nn
