#pragma once

// Template definitions for baseline.hpp.

#include <algorithm>
#include <cmath>

namespace iconann {

namespace detail {

/// Bin [lo, hi) of `n` inputs for output bin i of `bins`.
inline std::pair<int, int> pool_range(int i, int n, int bins) {
  return {i * n / bins, std::max(i * n / bins + 1, ((i + 1) * n + bins - 1) / bins)};
}

template <typename T>
void adaptive_pool_forward(const FeatureMap<T>& x, int bins, FeatureMap<T>& y) {
  y.resize(x.channels(), bins, bins);
  for (int c = 0; c < x.channels(); ++c) {
    for (int i = 0; i < bins; ++i) {
      const auto [r0, r1] = pool_range(i, x.height(), bins);
      for (int j = 0; j < bins; ++j) {
        const auto [c0, c1] = pool_range(j, x.width(), bins);
        T s = 0;
        for (int r = r0; r < r1; ++r) {
          for (int q = c0; q < c1; ++q) s += x(c, r, q);
        }
        y(c, i, j) = s / static_cast<T>((r1 - r0) * (c1 - c0));
      }
    }
  }
}

template <typename T>
void adaptive_pool_backward(const FeatureMap<T>& dy, int height, int width, FeatureMap<T>& dx) {
  const int bins = dy.height();
  dx.resize(dy.channels(), height, width);
  for (int c = 0; c < dy.channels(); ++c) {
    for (int i = 0; i < bins; ++i) {
      const auto [r0, r1] = pool_range(i, height, bins);
      for (int j = 0; j < bins; ++j) {
        const auto [c0, c1] = pool_range(j, width, bins);
        const T g = dy(c, i, j) / static_cast<T>((r1 - r0) * (c1 - c0));
        for (int r = r0; r < r1; ++r) {
          for (int q = c0; q < c1; ++q) dx(c, r, q) += g;
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
double cross_entropy(const std::vector<T>& logits, std::size_t label, std::vector<T>* d_logits) {
  double mx = static_cast<double>(*std::max_element(logits.begin(), logits.end()));
  double z = 0.0;
  for (T v : logits) z += std::exp(static_cast<double>(v) - mx);
  const double log_z = mx + std::log(z);
  if (d_logits) {
    d_logits->resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
      (*d_logits)[k] = static_cast<T>(std::exp(static_cast<double>(logits[k]) - log_z) - (k == label ? 1.0 : 0.0));
    }
  }
  return log_z - static_cast<double>(logits[label]);
}

template <typename T>
FeatureMap<T> crop_to_input(const Image& crop) {
  FeatureMap<T> x(3, crop.height(), crop.width());
  for (int y = 0; y < crop.height(); ++y) {
    for (int xx = 0; xx < crop.width(); ++xx) {
      for (int c = 0; c < 3; ++c) x(c, y, xx) = static_cast<T>(crop.at(y, xx, c) / 255.0 - 0.5);
    }
  }
  return x;
}

template <typename T>
ClassifierNet<T>::ClassifierNet(const BaselineConfig& config) : config_(config) {
  config_.validate();
  int cin = 3;
  for (int b = 0; b < 4; ++b) {
    conv_[b] = nn::Conv2d::create(params_, "image.conv" + std::to_string(b + 1), cin, config_.conv_channels[b], 3, 2);
    cin = config_.conv_channels[b];
  }
  fc1_ = nn::Linear::create(params_, "image.fc1", config_.image_features(), BaselineConfig::kImageHidden1);
  fc2_ = nn::Linear::create(params_, "image.fc2", BaselineConfig::kImageHidden1, BaselineConfig::kImageHidden2);
  joint_ = nn::Linear::create(params_, "joint.fc", config_.joint_inputs(), BaselineConfig::kJointWidth);
  out_ = nn::Linear::create(params_, "joint.out", BaselineConfig::kJointWidth, static_cast<int>(kNumClassifierLabels));
}

template <typename T>
void ClassifierNet<T>::set_params(nn::ParamSet<T> p) {
  if (p.size() != params_.size()) throw ShapeError("classifier: parameter count mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].name != params_[i].name || p[i].shape != params_[i].shape) {
      throw ShapeError("classifier: parameter '" + p[i].name + "' does not match '" + params_[i].name + "'");
    }
  }
  params_ = std::move(p);
}

template <typename T>
void ClassifierNet<T>::init(Rng& rng) {
  for (const auto& c : conv_) {
    nn::init_he(params_[c.weight].value, c.fan_in(), rng);
    std::fill(params_[c.bias].value.begin(), params_[c.bias].value.end(), T(0));
  }
  for (const auto* l : {&fc1_, &fc2_, &joint_}) {
    nn::init_he(params_[l->weight].value, static_cast<std::size_t>(l->in), rng);
    std::fill(params_[l->bias].value.begin(), params_[l->bias].value.end(), T(0));
  }
  nn::init_normal(params_[out_.weight].value, 0.01, rng);
  std::fill(params_[out_.bias].value.begin(), params_[out_.bias].value.end(), T(0));
}

template <typename T>
void ClassifierNet<T>::forward(const FeatureMap<T>& crop, const std::vector<T>& text, const std::array<T, 4>& location,
                               Workspace& ws) const {
  if (crop.channels() != 3 || crop.height() != config_.crop_size || crop.width() != config_.crop_size) {
    throw ShapeError("classifier: crop " + crop.shape_string() + " does not match config");
  }
  if (config_.use_text && static_cast<int>(text.size()) != config_.text_dim) {
    throw ShapeError("classifier: text embedding has " + std::to_string(text.size()) + " entries");
  }
  const FeatureMap<T>* in = &crop;
  for (int b = 0; b < 4; ++b) {
    nn::conv_forward(params_, conv_[b], *in, ws.act[b], ws.col[b]);
    nn::relu_inplace(ws.act[b].values());
    in = &ws.act[b];
  }
  detail::adaptive_pool_forward(ws.act[3], config_.pool_grid, ws.pooled);
  ws.flat = ws.pooled.values();
  nn::linear_forward(params_, fc1_, ws.flat, ws.h1);
  nn::relu_inplace(ws.h1);
  nn::linear_forward(params_, fc2_, ws.h1, ws.h2);
  nn::relu_inplace(ws.h2);
  ws.joint_in = ws.h2;
  if (config_.use_text) ws.joint_in.insert(ws.joint_in.end(), text.begin(), text.end());
  ws.joint_in.insert(ws.joint_in.end(), location.begin(), location.end());
  nn::linear_forward(params_, joint_, ws.joint_in, ws.joint);
  nn::relu_inplace(ws.joint);
  nn::linear_forward(params_, out_, ws.joint, ws.logits);
}

template <typename T>
void ClassifierNet<T>::backward(Workspace& ws, const FeatureMap<T>& crop, const std::vector<T>& d_logits,
                                nn::Gradients<T>& grads) const {
  std::vector<T> d_joint, d_joint_in, d_h2, d_h1, d_flat;
  nn::linear_backward(params_, out_, ws.joint, d_logits, &d_joint, grads);
  nn::relu_backward_inplace(ws.joint, d_joint);
  nn::linear_backward(params_, joint_, ws.joint_in, d_joint, &d_joint_in, grads);
  d_h2.assign(d_joint_in.begin(), d_joint_in.begin() + BaselineConfig::kImageHidden2);
  nn::relu_backward_inplace(ws.h2, d_h2);
  nn::linear_backward(params_, fc2_, ws.h1, d_h2, &d_h1, grads);
  nn::relu_backward_inplace(ws.h1, d_h1);
  nn::linear_backward(params_, fc1_, ws.flat, d_h1, &d_flat, grads);
  FeatureMap<T> d_pooled(ws.pooled.channels(), ws.pooled.height(), ws.pooled.width());
  d_pooled.values() = d_flat;
  FeatureMap<T> d_act;
  detail::adaptive_pool_backward(d_pooled, ws.act[3].height(), ws.act[3].width(), d_act);
  for (int b = 3; b >= 0; --b) {
    nn::relu_backward_inplace(ws.act[b].values(), d_act.values());
    const FeatureMap<T>& x = b == 0 ? crop : ws.act[b - 1];
    FeatureMap<T> d_in;
    nn::conv_backward(params_, conv_[b], x, ws.col[b], d_act, b == 0 ? static_cast<FeatureMap<T>*>(nullptr) : &d_in,
                      grads);
    d_act = std::move(d_in);
  }
}

}  // namespace iconann
