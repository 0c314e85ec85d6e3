#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "iconann/rng.hpp"

namespace iconann::nn {

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
};

/// Per-parameter gradient buffers, parallel to a ParamSet.
template <typename T>
using Gradients = std::vector<std::vector<T>>;

/// Ordered collection of named parameter tensors.
template <typename T>
class ParamSet {
 public:
  std::size_t add(std::string name, std::vector<int> shape) {
    if (find(name) != npos) throw std::invalid_argument("duplicate parameter " + name);
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                          [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    params_.push_back({std::move(name), std::move(shape), std::vector<T>(n, T(0))});
    return params_.size() - 1;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    return npos;
  }

  std::size_t size() const { return params_.size(); }
  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }
  T* data(std::size_t i) { return params_[i].value.data(); }
  const T* data(std::size_t i) const { return params_[i].value.data(); }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  Gradients<T> zero_gradients() const {
    Gradients<T> g(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) g[i].assign(params_[i].value.size(), T(0));
    return g;
  }

  bool all_finite() const {
    for (const auto& p : params_) {
      for (T v : p.value) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& p : params_) {
      const auto idx = out.add(p.name, p.shape);
      for (std::size_t k = 0; k < p.value.size(); ++k) out[idx].value[k] = static_cast<U>(p.value[k]);
    }
    return out;
  }

 private:
  std::vector<Param<T>> params_;
};

template <typename T>
void zero(Gradients<T>& g) {
  for (auto& v : g) std::fill(v.begin(), v.end(), T(0));
}

/// Fills with N(0, std^2).
template <typename T>
void init_normal(std::vector<T>& v, double stddev, Rng& rng) {
  for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
}

/// He initialization for a layer with the given fan-in.
template <typename T>
void init_he(std::vector<T>& v, std::size_t fan_in, Rng& rng) {
  init_normal(v, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

template <typename T>
class Adam {
 public:
  explicit Adam(const ParamSet<T>& params, AdamSettings s = {}) : s_(s), m_(params.zero_gradients()), v_(m_) {}

  /// Applies one update using grads * grad_scale.
  void step(ParamSet<T>& params, const Gradients<T>& grads, double grad_scale = 1.0, double lr_scale = 1.0) {
    ++t_;
    const double bc1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
    const double lr = s_.learning_rate * lr_scale;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = params[i].value;
      auto& m = m_[i];
      auto& v = v_[i];
      const auto& g = grads[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double gk = static_cast<double>(g[k]) * grad_scale + s_.weight_decay * static_cast<double>(w[k]);
        m[k] = static_cast<T>(s_.beta1 * m[k] + (1.0 - s_.beta1) * gk);
        v[k] = static_cast<T>(s_.beta2 * v[k] + (1.0 - s_.beta2) * gk * gk);
        const double mh = m[k] / bc1;
        const double vh = v[k] / bc2;
        w[k] = static_cast<T>(w[k] - lr * mh / (std::sqrt(vh) + s_.epsilon));
      }
    }
  }

  long steps() const { return t_; }

 private:
  AdamSettings s_;
  Gradients<T> m_;
  Gradients<T> v_;
  long t_ = 0;
};

}  // namespace iconann::nn
