#pragma once

// Template definitions for detector.hpp.

#include <cmath>

namespace iconann {

template <typename T>
LossTerms head_loss(const FeatureMap<T>& head, const DetectionTargets& targets, const DetectorConfig& config,
                    FeatureMap<T>* d_head) {
  const int nc = config.num_classes;
  const int h = targets.heatmap.height();
  const int w = targets.heatmap.width();
  if (head.channels() != nc + 4 || head.height() != h || head.width() != w) {
    throw ShapeError("head_loss: head " + head.shape_string() + " vs targets " + targets.heatmap.shape_string());
  }
  if (d_head) d_head->resize(head.channels(), h, w);

  std::size_t positives = 0;
  for (double v : targets.heatmap.values()) positives += (v == 1.0);
  std::size_t centers = 0;
  for (double v : targets.mask.values()) centers += (v > 0.0);
  const double pos_norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, positives));
  const double reg_norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, centers));

  LossTerms lt;
  const std::size_t plane = head.plane();
  for (int c = 0; c < nc; ++c) {
    const T* x = head.channel(c);
    const double* y = targets.heatmap.channel(c);
    T* g = d_head ? d_head->channel(c) : nullptr;
    for (std::size_t i = 0; i < plane; ++i) {
      const double xi = static_cast<double>(x[i]);
      const double p = nn::sigmoid(xi);
      if (y[i] == 1.0) {
        const double sp = nn::softplus(-xi);  // -log p
        const double q = 1.0 - p;
        lt.heatmap += q * q * sp * pos_norm;
        if (g) g[i] = static_cast<T>(q * q * (-2.0 * p * sp - q) * pos_norm);
      } else {
        const double om = 1.0 - y[i];
        const double wgt = om * om * om * om;
        const double sp = nn::softplus(xi);  // -log(1 - p)
        lt.heatmap += wgt * p * p * sp * pos_norm;
        if (g) g[i] = static_cast<T>(wgt * p * p * (p + 2.0 * (1.0 - p) * sp) * pos_norm);
      }
    }
  }

  auto regress = [&](int head_channel, const FeatureMap<double>& tgt, int tgt_channel, double weight) {
    const T* x = head.channel(head_channel);
    const double* t = tgt.channel(tgt_channel);
    const double* m = targets.mask.channel(0);
    T* g = d_head ? d_head->channel(head_channel) : nullptr;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (!(m[i] > 0.0)) continue;
      const double r = static_cast<double>(x[i]) - t[i];
      sum += std::abs(r);
      if (g) g[i] = static_cast<T>(weight * reg_norm * (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0)));
    }
    return sum * reg_norm;
  };
  lt.size = regress(nc, targets.size, 0, config.size_loss_weight) + regress(nc + 1, targets.size, 1, config.size_loss_weight);
  lt.offset = regress(nc + 2, targets.offset, 0, config.offset_loss_weight) +
              regress(nc + 3, targets.offset, 1, config.offset_loss_weight);
  lt.total = lt.heatmap + config.size_loss_weight * lt.size + config.offset_loss_weight * lt.offset;
  return lt;
}

template <typename T>
DetectorOutput activate(const FeatureMap<T>& head, int num_classes) {
  DetectorOutput out;
  out.heatmap = FeatureMap<double>(num_classes, head.height(), head.width());
  out.size = FeatureMap<double>(2, head.height(), head.width());
  out.offset = FeatureMap<double>(2, head.height(), head.width());
  const std::size_t plane = head.plane();
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < plane; ++i) out.heatmap.channel(c)[i] = nn::sigmoid(static_cast<double>(head.channel(c)[i]));
  }
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      out.size.channel(c)[i] = static_cast<double>(head.channel(num_classes + c)[i]);
      out.offset.channel(c)[i] = static_cast<double>(head.channel(num_classes + 2 + c)[i]);
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> image_to_input(const Image& img, int height, int width) {
  const Image resized = (img.height() == height && img.width() == width) ? img : resize_bilinear(img, height, width);
  FeatureMap<T> x(3, height, width);
  for (int y = 0; y < height; ++y) {
    for (int xx = 0; xx < width; ++xx) {
      for (int c = 0; c < 3; ++c) x(c, y, xx) = static_cast<T>(resized.at(y, xx, c) / 255.0 - 0.5);
    }
  }
  return x;
}

template <typename T>
DetectorNet<T>::DetectorNet(const DetectorConfig& config) : config_(config) {
  config_.validate();
  const auto& c = config_;
  conv1_ = nn::Conv2d::create(params_, "backbone.conv1", 3, c.conv1_channels, 3, 2);
  conv2_ = nn::Conv2d::create(params_, "backbone.conv2", c.conv1_channels, c.conv2_channels, 3, 2);
  conv3_ = nn::Conv2d::create(params_, "backbone.conv3", c.conv2_channels, c.conv3_channels, 3, 2);
  conv4_ = nn::Conv2d::create(params_, "backbone.conv4", c.conv3_channels, c.conv3_channels, 3, 1);
  conv5_ = nn::Conv2d::create(params_, "backbone.lateral", c.conv3_channels, c.conv2_channels, 1, 1);
  if (c.use_vh) {
    fusion_ = FusionLayer::create(params_, "fusion", c.text_dim, c.fusion_width(), c.feature_channels());
  }
  conv6_ = nn::Conv2d::create(params_, "head.conv", c.feature_channels(), c.head_channels, 3, 1);
  conv7_ = nn::Conv2d::create(params_, "head.out", c.head_channels, c.head_outputs(), 1, 1);
}

template <typename T>
void DetectorNet<T>::set_params(nn::ParamSet<T> p) {
  if (p.size() != params_.size()) throw ShapeError("detector: parameter count mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].name != params_[i].name || p[i].shape != params_[i].shape) {
      throw ShapeError("detector: parameter '" + p[i].name + "' does not match '" + params_[i].name + "'");
    }
  }
  params_ = std::move(p);
}

template <typename T>
void DetectorNet<T>::init(Rng& rng) {
  for (const auto* c : {&conv1_, &conv2_, &conv3_, &conv4_, &conv5_, &conv6_, &conv7_}) {
    nn::init_he(params_[c->weight].value, c->fan_in(), rng);
    std::fill(params_[c->bias].value.begin(), params_[c->bias].value.end(), T(0));
  }
  // Output layer starts small; heatmap bias at logit(0.1).
  nn::init_normal(params_[conv7_.weight].value, 0.01, rng);
  auto& b = params_[conv7_.bias].value;
  for (int k = 0; k < config_.num_classes; ++k) b[k] = static_cast<T>(-2.19);
  if (config_.use_vh) fusion_.init(params_, rng);
}

template <typename T>
void DetectorNet<T>::forward(const FeatureMap<T>& input, const FeatureMap<T>* vh_map, Workspace& ws) const {
  if (input.channels() != 3 || input.height() != config_.input_height || input.width() != config_.input_width) {
    throw ShapeError("detector: input " + input.shape_string() + " does not match config");
  }
  nn::conv_forward(params_, conv1_, input, ws.a1, ws.col1);
  nn::relu_inplace(ws.a1.values());
  nn::conv_forward(params_, conv2_, ws.a1, ws.a2, ws.col2);
  nn::relu_inplace(ws.a2.values());
  nn::conv_forward(params_, conv3_, ws.a2, ws.a3, ws.col3);
  nn::relu_inplace(ws.a3.values());
  nn::conv_forward(params_, conv4_, ws.a3, ws.a4, ws.col4);
  nn::relu_inplace(ws.a4.values());
  nn::upsample2_forward(ws.a4, ws.up);
  nn::conv_forward(params_, conv5_, ws.up, ws.a5, ws.col5);
  ws.backbone = ws.a5;
  {
    auto& v = ws.backbone.values();
    const auto& skip = ws.a2.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i] + skip[i], T(0));
  }
  ws.used_vh = config_.use_vh;
  const FeatureMap<T>* head_in = &ws.backbone;
  if (config_.use_vh) {
    if (vh_map) {
      ws.fused = project_and_fuse(*vh_map, ws.backbone, params_, fusion_, &ws.fusion);
    } else {
      const FeatureMap<T> zeros(config_.text_dim, ws.backbone.height(), ws.backbone.width());
      ws.fused = project_and_fuse(zeros, ws.backbone, params_, fusion_, &ws.fusion);
    }
    head_in = &ws.fused;
  }
  nn::conv_forward(params_, conv6_, *head_in, ws.h, ws.col6);
  nn::relu_inplace(ws.h.values());
  nn::conv_forward(params_, conv7_, ws.h, ws.head, ws.col7);
}

template <typename T>
void DetectorNet<T>::backward(Workspace& ws, const FeatureMap<T>& d_head, nn::Gradients<T>& grads) const {
  FeatureMap<T> dh, d_fused, d_tmp, d_up, d_a4;
  nn::conv_backward(params_, conv7_, ws.h, ws.col7, d_head, &dh, grads);
  nn::relu_backward_inplace(ws.h.values(), dh.values());
  const FeatureMap<T>& head_in = ws.used_vh ? ws.fused : ws.backbone;
  nn::conv_backward(params_, conv6_, head_in, ws.col6, dh, &d_fused, grads);
  if (ws.used_vh) project_and_fuse_backward(ws.fusion, d_fused, params_, fusion_, grads);

  FeatureMap<T>& d_backbone = d_fused;  // the fusion is additive, so dL/dC = dL/d(fused)
  nn::relu_backward_inplace(ws.backbone.values(), d_backbone.values());
  nn::conv_backward(params_, conv5_, ws.up, ws.col5, d_backbone, &d_up, grads);
  nn::upsample2_backward(d_up, d_a4);
  nn::relu_backward_inplace(ws.a4.values(), d_a4.values());
  FeatureMap<T> d_a3;
  nn::conv_backward(params_, conv4_, ws.a3, ws.col4, d_a4, &d_a3, grads);
  nn::relu_backward_inplace(ws.a3.values(), d_a3.values());
  FeatureMap<T> d_a2;
  nn::conv_backward(params_, conv3_, ws.a2, ws.col3, d_a3, &d_a2, grads);
  {
    auto& v = d_a2.values();
    const auto& skip = d_backbone.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += skip[i];
  }
  nn::relu_backward_inplace(ws.a2.values(), d_a2.values());
  FeatureMap<T> d_a1;
  nn::conv_backward(params_, conv2_, ws.a1, ws.col2, d_a2, &d_a1, grads);
  nn::relu_backward_inplace(ws.a1.values(), d_a1.values());
  static const FeatureMap<T> kUnusedInput;
  nn::conv_backward(params_, conv1_, kUnusedInput, ws.col1, d_a1, static_cast<FeatureMap<T>*>(nullptr), grads);
}

}  // namespace iconann
