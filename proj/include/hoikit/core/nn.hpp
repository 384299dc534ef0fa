#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hoikit/core/ops.hpp"
#include "hoikit/core/rng.hpp"
#include "hoikit/core/tensor.hpp"
#include "hoikit/errors.hpp"

namespace hoikit {

// Named trainable parameters. Creation order is remembered so checkpoints
// and optimizer state stay aligned; each parameter is initialized from a
// seed derived from its name, making init independent of creation order.
template <class T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  // Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Tensor<T> create(const std::string& name, std::vector<int> shape, int fan_in) {
    if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    if (fan_in < 1) throw ShapeError("parameter fan-in must be positive: " + name);
    Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
    Rng rng(seed_stream(seed_, fnv1a(name)));
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (auto& v : *t.data) v = T(rng.uniform(-bound, bound));
    names_.push_back(name);
    params_.emplace(name, t);
    return t;
  }

  Tensor<T> create_zeros(const std::string& name, std::vector<int> shape) {
    if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
    names_.push_back(name);
    params_.emplace(name, t);
    return t;
  }

  bool has(const std::string& name) const { return params_.count(name) != 0; }

  Tensor<T>& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  const Tensor<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& name : names_) n += params_.at(name).data->size();
    return n;
  }

  void zero_grads() {
    for (const auto& name : names_) params_.at(name).zero_grad();
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<std::string> names_;
  std::map<std::string, Tensor<T>> params_;
};

template <class T>
struct LinearMap {
  Tensor<T> W, b;

  LinearMap() = default;
  LinearMap(ParamStore<T>& store, const std::string& prefix, int in, int out)
      : W(store.create(prefix + ".w", {in, out}, in)),
        b(store.create(prefix + ".b", {out}, in)) {}

  Tensor<T> operator()(const Tensor<T>& x) const { return affine(x, W, b); }
};

// Two-layer map with a ReLU between; used for projection heads and the
// verb classifier.
template <class T>
struct Ffn {
  LinearMap<T> l1, l2;

  Ffn() = default;
  Ffn(ParamStore<T>& store, const std::string& prefix, int in, int hidden, int out)
      : l1(store, prefix + ".l1", in, hidden), l2(store, prefix + ".l2", hidden, out) {}

  Tensor<T> operator()(const Tensor<T>& x) const { return l2(relu(l1(x))); }
};

// Transformer-style encoder layer without normalization:
//   x1 = x + attn(x Wq, x Wk, x Wv);  out = x1 + ffn(x1)
// The value projection keeps the model width so the residual adds line up.
template <class T>
struct EncoderLayer {
  LinearMap<T> wq, wk, wv;
  Ffn<T> ffn;

  EncoderLayer() = default;
  EncoderLayer(ParamStore<T>& store, const std::string& prefix, int dim, int attn_dim, int ffn_dim)
      : wq(store, prefix + ".wq", dim, attn_dim),
        wk(store, prefix + ".wk", dim, attn_dim),
        wv(store, prefix + ".wv", dim, dim),
        ffn(store, prefix + ".ffn", dim, ffn_dim, dim) {}

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> x1 = add(x, attention(wq(x), wk(x), wv(x)));
    return add(x1, ffn(x1));
  }
};

// Bare projected cross-attention, no residual: every query row becomes a
// convex mix of value-projected key rows. With a single key row the output
// equals that row's value projection exactly.
template <class T>
struct CrossAttentionLayer {
  LinearMap<T> wq, wk, wv;

  CrossAttentionLayer() = default;
  CrossAttentionLayer(ParamStore<T>& store, const std::string& prefix, int dim, int attn_dim)
      : wq(store, prefix + ".wq", dim, attn_dim),
        wk(store, prefix + ".wk", dim, attn_dim),
        wv(store, prefix + ".wv", dim, dim) {}

  Tensor<T> forward(const Tensor<T>& queries, const Tensor<T>& keys) const {
    return attention(wq(queries), wk(keys), wv(keys));
  }
};

// Adam with optional cosine decay of the learning rate to zero over the run.
template <class T>
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double rate_at(int step, int total_steps, bool cosine) const {
    if (!cosine || total_steps <= 0) return lr_;
    const double frac = double(step) / double(total_steps);
    return lr_ * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
  }

  // One update over every parameter in the store. A parameter whose gradient
  // stayed exactly zero is left bit-identical (its moments remain zero).
  void step(ParamStore<T>& store, double lr) {
    ++t_;
    const T b1 = T(beta1_), b2 = T(beta2_);
    const T corr1 = T(1) - std::pow(b1, T(t_));
    const T corr2 = T(1) - std::pow(b2, T(t_));
    for (const auto& name : store.names()) {
      Tensor<T>& p = store.get(name);
      auto& slot = slots_[name];
      if (slot.m.empty()) {
        slot.m.assign(p.data->size(), T(0));
        slot.v.assign(p.data->size(), T(0));
      }
      const auto& g = *p.grad;
      auto& d = *p.data;
      for (std::size_t i = 0; i < d.size(); ++i) {
        slot.m[i] = b1 * slot.m[i] + (T(1) - b1) * g[i];
        slot.v[i] = b2 * slot.v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = slot.m[i] / corr1;
        const T vhat = slot.v[i] / corr2;
        d[i] -= T(lr) * mhat / (std::sqrt(vhat) + T(eps_));
      }
    }
  }

  int steps_taken() const { return t_; }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, Slot> slots_;
};

}  // namespace hoikit
