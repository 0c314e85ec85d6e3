#pragma once

// Forward and backward passes for the handful of layer types the detector and the
// crop classifier use. Every function works on a single sample; batches are handled
// by the training loops accumulating gradients sample by sample.

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "iconann/error.hpp"
#include "iconann/feature_map.hpp"
#include "iconann/nn/params.hpp"

namespace iconann::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Plain sequential sum. Eigen's vectorized reductions peel according to the buffer's
/// address, which would make results depend on where the allocator put the data.
template <typename T>
T row_sum(const T* v, Eigen::Index n) {
  T acc = T(0);
  for (Eigen::Index i = 0; i < n; ++i) acc += v[i];
  return acc;
}

/// Square-kernel 2-D convolution. Weights are [cout][cin][k][k].
struct Conv2d {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int cin = 0;
  int cout = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  template <typename T>
  static Conv2d create(ParamSet<T>& ps, const std::string& name, int cin, int cout, int kernel, int stride) {
    Conv2d c;
    c.cin = cin;
    c.cout = cout;
    c.kernel = kernel;
    c.stride = stride;
    c.pad = kernel / 2;
    c.weight = ps.add(name + ".weight", {cout, cin, kernel, kernel});
    c.bias = ps.add(name + ".bias", {cout});
    return c;
  }

  int out_size(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
  std::size_t fan_in() const { return static_cast<std::size_t>(cin) * kernel * kernel; }
  bool pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void im2col(const FeatureMap<T>& x, const Conv2d& c, std::vector<T>& col) {
  const int ho = c.out_size(x.height());
  const int wo = c.out_size(x.width());
  const std::size_t n = static_cast<std::size_t>(ho) * wo;
  col.assign(c.fan_in() * n, T(0));
  for (int ci = 0; ci < c.cin; ++ci) {
    for (int ky = 0; ky < c.kernel; ++ky) {
      for (int kx = 0; kx < c.kernel; ++kx) {
        T* row = col.data() + ((static_cast<std::size_t>(ci) * c.kernel + ky) * c.kernel + kx) * n;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * c.stride - c.pad + ky;
          if (iy < 0 || iy >= x.height()) continue;
          const T* src = x.channel(ci) + static_cast<std::size_t>(iy) * x.width();
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * c.stride - c.pad + kx;
            if (ix >= 0 && ix < x.width()) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const std::vector<T>& col, const Conv2d& c, FeatureMap<T>& dx) {
  const int ho = c.out_size(dx.height());
  const int wo = c.out_size(dx.width());
  const std::size_t n = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c.cin; ++ci) {
    for (int ky = 0; ky < c.kernel; ++ky) {
      for (int kx = 0; kx < c.kernel; ++kx) {
        const T* row = col.data() + ((static_cast<std::size_t>(ci) * c.kernel + ky) * c.kernel + kx) * n;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * c.stride - c.pad + ky;
          if (iy < 0 || iy >= dx.height()) continue;
          T* dst = dx.channel(ci) + static_cast<std::size_t>(iy) * dx.width();
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * c.stride - c.pad + kx;
            if (ix >= 0 && ix < dx.width()) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

/// y = conv(x). `col` receives the im2col buffer, which backward reuses.
template <typename T>
void conv_forward(const ParamSet<T>& ps, const Conv2d& c, const FeatureMap<T>& x, FeatureMap<T>& y,
                  std::vector<T>& col) {
  if (x.channels() != c.cin) {
    throw ShapeError("conv: expected " + std::to_string(c.cin) + " input channels, got " +
                     std::to_string(x.channels()));
  }
  const int ho = c.out_size(x.height());
  const int wo = c.out_size(x.width());
  const auto n = static_cast<Eigen::Index>(ho) * wo;
  y.resize(c.cout, ho, wo);
  ConstMatrixMap<T> w(ps.data(c.weight), c.cout, static_cast<Eigen::Index>(c.fan_in()));
  MatrixMap<T> out(y.data(), c.cout, n);
  if (c.pointwise()) {
    col.clear();
    out.noalias() = w * ConstMatrixMap<T>(x.data(), c.cin, n);
  } else {
    im2col(x, c, col);
    out.noalias() = w * ConstMatrixMap<T>(col.data(), static_cast<Eigen::Index>(c.fan_in()), n);
  }
  const T* b = ps.data(c.bias);
  for (int o = 0; o < c.cout; ++o) out.row(o).array() += b[o];
}

/// Accumulates parameter gradients; writes dx when it is non-null.
template <typename T>
void conv_backward(const ParamSet<T>& ps, const Conv2d& c, const FeatureMap<T>& x, const std::vector<T>& col,
                   const FeatureMap<T>& dy, FeatureMap<T>* dx, Gradients<T>& grads) {
  const auto n = static_cast<Eigen::Index>(dy.height()) * dy.width();
  const auto fan = static_cast<Eigen::Index>(c.fan_in());
  ConstMatrixMap<T> g(dy.data(), c.cout, n);
  ConstMatrixMap<T> w(ps.data(c.weight), c.cout, fan);
  MatrixMap<T> dw(grads[c.weight].data(), c.cout, fan);
  const T* in = c.pointwise() ? x.data() : col.data();
  ConstMatrixMap<T> xin(in, fan, n);
  dw.noalias() += g * xin.transpose();
  T* db = grads[c.bias].data();
  for (int o = 0; o < c.cout; ++o) db[o] += row_sum(dy.channel(o), n);
  if (!dx) return;
  dx->resize(x.channels(), x.height(), x.width());
  if (c.pointwise()) {
    MatrixMap<T>(dx->data(), fan, n).noalias() = w.transpose() * g;
  } else {
    std::vector<T> dcol(static_cast<std::size_t>(fan * n));
    MatrixMap<T>(dcol.data(), fan, n).noalias() = w.transpose() * g;
    col2im(dcol, c, *dx);
  }
}

/// Fully connected layer, weights [out][in].
struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int in = 0;
  int out = 0;

  template <typename T>
  static Linear create(ParamSet<T>& ps, const std::string& name, int in, int out) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = ps.add(name + ".weight", {out, in});
    l.bias = ps.add(name + ".bias", {out});
    return l;
  }
};

template <typename T>
void linear_forward(const ParamSet<T>& ps, const Linear& l, const std::vector<T>& x, std::vector<T>& y) {
  if (static_cast<int>(x.size()) != l.in) {
    throw ShapeError("linear: expected " + std::to_string(l.in) + " inputs, got " + std::to_string(x.size()));
  }
  y.resize(l.out);
  ConstMatrixMap<T> w(ps.data(l.weight), l.out, l.in);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> yv(y.data(), l.out);
  yv.noalias() = w * Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(x.data(), l.in);
  const T* b = ps.data(l.bias);
  for (int o = 0; o < l.out; ++o) y[o] += b[o];
}

template <typename T>
void linear_backward(const ParamSet<T>& ps, const Linear& l, const std::vector<T>& x, const std::vector<T>& dy,
                     std::vector<T>* dx, Gradients<T>& grads) {
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  Eigen::Map<const Vec> g(dy.data(), l.out);
  Eigen::Map<const Vec> xin(x.data(), l.in);
  MatrixMap<T>(grads[l.weight].data(), l.out, l.in).noalias() += g * xin.transpose();
  T* db = grads[l.bias].data();
  for (int o = 0; o < l.out; ++o) db[o] += dy[o];
  if (!dx) return;
  dx->resize(l.in);
  Eigen::Map<Vec>(dx->data(), l.in).noalias() = ConstMatrixMap<T>(ps.data(l.weight), l.out, l.in).transpose() * g;
}

template <typename T>
void relu_inplace(std::vector<T>& v) {
  for (auto& x : v) x = x > T(0) ? x : T(0);
}

/// dx = dy where the forward output was positive.
template <typename T>
void relu_backward_inplace(const std::vector<T>& y, std::vector<T>& dy) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > T(0))) dy[i] = T(0);
  }
}

/// Nearest-neighbour 2x upsampling.
template <typename T>
void upsample2_forward(const FeatureMap<T>& x, FeatureMap<T>& y) {
  y.resize(x.channels(), x.height() * 2, x.width() * 2);
  for (int c = 0; c < x.channels(); ++c) {
    for (int i = 0; i < y.height(); ++i) {
      for (int j = 0; j < y.width(); ++j) y(c, i, j) = x(c, i / 2, j / 2);
    }
  }
}

template <typename T>
void upsample2_backward(const FeatureMap<T>& dy, FeatureMap<T>& dx) {
  dx.resize(dy.channels(), dy.height() / 2, dy.width() / 2);
  for (int c = 0; c < dy.channels(); ++c) {
    for (int i = 0; i < dy.height(); ++i) {
      for (int j = 0; j < dy.width(); ++j) dx(c, i / 2, j / 2) += dy(c, i, j);
    }
  }
}

/// Non-overlapping average pooling with window k (input dims must divide by k).
template <typename T>
void avgpool_forward(const FeatureMap<T>& x, int k, FeatureMap<T>& y) {
  if (x.height() % k || x.width() % k) throw ShapeError("avgpool: input not divisible by window");
  y.resize(x.channels(), x.height() / k, x.width() / k);
  const T inv = T(1) / static_cast<T>(k * k);
  for (int c = 0; c < x.channels(); ++c) {
    for (int i = 0; i < x.height(); ++i) {
      for (int j = 0; j < x.width(); ++j) y(c, i / k, j / k) += x(c, i, j) * inv;
    }
  }
}

template <typename T>
void sigmoid_inplace(std::vector<T>& v) {
  for (auto& x : v) x = T(1) / (T(1) + std::exp(-x));
}

/// Numerically stable log(1 + exp(x)).
template <typename T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace iconann::nn
