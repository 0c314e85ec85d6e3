#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "iconann/error.hpp"
#include "iconann/feature_map.hpp"
#include "iconann/geometry.hpp"
#include "iconann/nn/layers.hpp"
#include "iconann/textproc.hpp"

namespace iconann {

/// Half-open row and column ranges [row_begin, row_end) x [col_begin, col_end) of the
/// grid cells a box covers: row p is covered when y_min*H <= p < y_max*H, column q
/// when x_min*W <= q < x_max*W. Empty ranges are possible for thin boxes.
struct CellSpan {
  int row_begin = 0;
  int row_end = 0;
  int col_begin = 0;
  int col_end = 0;

  bool empty() const { return row_begin >= row_end || col_begin >= col_end; }
  bool covers(int p, int q) const { return p >= row_begin && p < row_end && q >= col_begin && q < col_end; }
};

CellSpan covered_cells(const BoundingBox& b, int height, int width);

/// Binary overlay, K identical channels: 1 where the box covers the cell.
FeatureMap<double> calc_overlay(const BoundingBox& b, int height, int width, int channels);

/// Elementwise product of the overlay with the embedding tiled over the grid.
/// Throws ShapeError when the overlay's channel count differs from the embedding size.
FeatureMap<double> node_feature(const TextEmbedding& t, const FeatureMap<double>& overlay);

/// How the summed node features are normalized.
enum class FusionNormalization {
  /// G = sum_i T_i / mean_i(O_i): the literal ratio, which equals S times the mean
  /// embedding of the covering nodes at every covered cell.
  kAsWritten,
  /// G = sum_i T_i / sum_i(O_i): the plain mean of covering embeddings.
  kCoverageMean,
};

struct NodeEmbedding {
  TextEmbedding embedding;
  BoundingBox box;
};

/// Rasterizes and normalizes node embeddings into the K-channel VH map G.
/// Cells covered by no node are 0; S = 0 yields an all-zero map.
FeatureMap<double> aggregate(const std::vector<NodeEmbedding>& nodes, int height, int width, int channels,
                             FusionNormalization mode = FusionNormalization::kAsWritten);

/// Two pointwise convolutions K -> hidden -> D with a rectifier in between.
struct FusionLayer {
  nn::Conv2d first;
  nn::Conv2d second;

  template <typename T>
  static FusionLayer create(nn::ParamSet<T>& ps, const std::string& name, int text_dim, int hidden, int out_dim) {
    return {nn::Conv2d::create(ps, name + ".proj1", text_dim, hidden, 1, 1),
            nn::Conv2d::create(ps, name + ".proj2", hidden, out_dim, 1, 1)};
  }

  int text_dim() const { return first.cin; }
  int out_dim() const { return second.cout; }

  template <typename T>
  void init(nn::ParamSet<T>& ps, Rng& rng) const {
    nn::init_he(ps[first.weight].value, first.fan_in(), rng);
    // Small second layer so that switching fusion on does not swamp the image features.
    nn::init_normal(ps[second.weight].value, 0.1 / std::sqrt(static_cast<double>(second.fan_in())), rng);
  }
};

/// Standalone parameter bundle for the fusion projection.
template <typename T>
struct FusionParams {
  nn::ParamSet<T> params;
  FusionLayer layer;

  FusionParams(int text_dim, int hidden, int out_dim)
      : layer(FusionLayer::create(params, "fusion", text_dim, hidden, out_dim)) {}
};

/// Intermediates kept for the backward pass. Identical cell vectors of G are
/// projected once; `cell_to_row` maps every cell to its distinct vector.
template <typename T>
struct FusionCache {
  std::vector<int> cell_to_row;
  nn::RowMatrix<T> distinct;  // text_dim x rows
  nn::RowMatrix<T> hidden;    // hidden x rows, after the rectifier
};

/// result = c + proj2(relu(proj1(g))). g and c must share height and width.
template <typename T>
FeatureMap<T> project_and_fuse(const FeatureMap<T>& g, const FeatureMap<T>& c, const nn::ParamSet<T>& ps,
                               const FusionLayer& layer, FusionCache<T>* cache = nullptr);

/// Gradient of a loss through project_and_fuse. d_out is dL/d(result). dL/dc equals
/// d_out and is not materialized. Parameter gradients accumulate into grads; dL/dg is
/// written when d_g is non-null.
template <typename T>
void project_and_fuse_backward(const FusionCache<T>& cache, const FeatureMap<T>& d_out, const nn::ParamSet<T>& ps,
                               const FusionLayer& layer, nn::Gradients<T>& grads, FeatureMap<T>* d_g = nullptr);

// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::uint64_t hash_row(const T* row, int n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(row);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(T); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

template <typename T>
FeatureMap<T> project_and_fuse(const FeatureMap<T>& g, const FeatureMap<T>& c, const nn::ParamSet<T>& ps,
                               const FusionLayer& layer, FusionCache<T>* cache) {
  if (g.height() != c.height() || g.width() != c.width()) {
    throw ShapeError("project_and_fuse: VH map " + g.shape_string() + " vs image map " + c.shape_string());
  }
  if (g.channels() != layer.text_dim() || c.channels() != layer.out_dim()) {
    throw ShapeError("project_and_fuse: channel mismatch with fusion parameters");
  }
  const int k = g.channels();
  const std::size_t cells = g.plane();

  // Gather cell vectors and collapse exact duplicates.
  std::vector<T> rows(cells * k);
  for (int ch = 0; ch < k; ++ch) {
    const T* src = g.channel(ch);
    for (std::size_t cell = 0; cell < cells; ++cell) rows[cell * k + ch] = src[cell];
  }
  std::vector<int> cell_to_row(cells);
  std::vector<std::size_t> first_cell;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const T* row = rows.data() + cell * k;
    auto& bucket = buckets[detail::hash_row(row, k)];
    int found = -1;
    for (int id : bucket) {
      if (std::memcmp(rows.data() + first_cell[id] * k, row, sizeof(T) * k) == 0) {
        found = id;
        break;
      }
    }
    if (found < 0) {
      found = static_cast<int>(first_cell.size());
      first_cell.push_back(cell);
      bucket.push_back(found);
    }
    cell_to_row[cell] = found;
  }
  const auto n = static_cast<Eigen::Index>(first_cell.size());
  nn::RowMatrix<T> distinct(k, n);
  for (Eigen::Index u = 0; u < n; ++u) {
    for (int ch = 0; ch < k; ++ch) distinct(ch, u) = rows[first_cell[u] * k + ch];
  }

  const auto& l1 = layer.first;
  const auto& l2 = layer.second;
  nn::RowMatrix<T> hidden = nn::ConstMatrixMap<T>(ps.data(l1.weight), l1.cout, l1.cin) * distinct;
  for (int o = 0; o < l1.cout; ++o) {
    const T b = ps.data(l1.bias)[o];
    for (Eigen::Index u = 0; u < n; ++u) hidden(o, u) = std::max(hidden(o, u) + b, T(0));
  }
  nn::RowMatrix<T> proj = nn::ConstMatrixMap<T>(ps.data(l2.weight), l2.cout, l2.cin) * hidden;

  FeatureMap<T> out = c;
  for (int d = 0; d < l2.cout; ++d) {
    const T b = ps.data(l2.bias)[d];
    T* dst = out.channel(d);
    for (std::size_t cell = 0; cell < cells; ++cell) dst[cell] += proj(d, cell_to_row[cell]) + b;
  }
  if (cache) {
    cache->cell_to_row = std::move(cell_to_row);
    cache->distinct = std::move(distinct);
    cache->hidden = std::move(hidden);
  }
  return out;
}

template <typename T>
void project_and_fuse_backward(const FusionCache<T>& cache, const FeatureMap<T>& d_out, const nn::ParamSet<T>& ps,
                               const FusionLayer& layer, nn::Gradients<T>& grads, FeatureMap<T>* d_g) {
  const auto& l1 = layer.first;
  const auto& l2 = layer.second;
  const auto n = cache.hidden.cols();
  const std::size_t cells = d_out.plane();

  nn::RowMatrix<T> d_proj = nn::RowMatrix<T>::Zero(l2.cout, n);
  for (int d = 0; d < l2.cout; ++d) {
    const T* src = d_out.channel(d);
    for (std::size_t cell = 0; cell < cells; ++cell) d_proj(d, cache.cell_to_row[cell]) += src[cell];
  }
  nn::MatrixMap<T>(grads[l2.weight].data(), l2.cout, l2.cin).noalias() += d_proj * cache.hidden.transpose();
  for (int d = 0; d < l2.cout; ++d) {
    // every cell carries the bias once, so its gradient sums over all cells
    grads[l2.bias][d] += nn::row_sum(d_proj.row(d).data(), n);
  }
  nn::RowMatrix<T> d_hidden = nn::ConstMatrixMap<T>(ps.data(l2.weight), l2.cout, l2.cin).transpose() * d_proj;
  for (int o = 0; o < l1.cout; ++o) {
    for (Eigen::Index u = 0; u < n; ++u) {
      if (!(cache.hidden(o, u) > T(0))) d_hidden(o, u) = T(0);
    }
  }
  nn::MatrixMap<T>(grads[l1.weight].data(), l1.cout, l1.cin).noalias() += d_hidden * cache.distinct.transpose();
  for (int o = 0; o < l1.cout; ++o) grads[l1.bias][o] += nn::row_sum(d_hidden.row(o).data(), n);
  if (!d_g) return;
  nn::RowMatrix<T> d_distinct = nn::ConstMatrixMap<T>(ps.data(l1.weight), l1.cout, l1.cin).transpose() * d_hidden;
  d_g->resize(l1.cin, d_out.height(), d_out.width());
  for (int ch = 0; ch < l1.cin; ++ch) {
    T* dst = d_g->channel(ch);
    for (std::size_t cell = 0; cell < cells; ++cell) dst[cell] = d_distinct(ch, cache.cell_to_row[cell]);
  }
}

}  // namespace iconann
