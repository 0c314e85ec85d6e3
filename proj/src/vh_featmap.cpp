#include "iconann/vh_featmap.hpp"

#include <algorithm>
#include <cmath>

namespace iconann {

CellSpan covered_cells(const BoundingBox& b, int height, int width) {
  // For integer p: p >= a <=> p >= ceil(a), and p < b <=> p < ceil(b).
  auto lo = [](double v, int n) { return std::clamp(static_cast<int>(std::ceil(v)), 0, n); };
  CellSpan s;
  s.row_begin = lo(b.y_min * height, height);
  s.row_end = lo(b.y_max * height, height);
  s.col_begin = lo(b.x_min * width, width);
  s.col_end = lo(b.x_max * width, width);
  return s;
}

FeatureMap<double> calc_overlay(const BoundingBox& b, int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 1) throw ShapeError("calc_overlay: dims must be >= 1");
  FeatureMap<double> o(channels, height, width);
  const CellSpan s = covered_cells(b, height, width);
  for (int k = 0; k < channels; ++k) {
    for (int p = s.row_begin; p < s.row_end; ++p) {
      for (int q = s.col_begin; q < s.col_end; ++q) o(k, p, q) = 1.0;
    }
  }
  return o;
}

FeatureMap<double> node_feature(const TextEmbedding& t, const FeatureMap<double>& overlay) {
  if (static_cast<int>(t.size()) != overlay.channels()) {
    throw ShapeError("node_feature: embedding has " + std::to_string(t.size()) + " entries, overlay " +
                     overlay.shape_string());
  }
  FeatureMap<double> out(overlay.channels(), overlay.height(), overlay.width());
  for (int k = 0; k < overlay.channels(); ++k) {
    for (int p = 0; p < overlay.height(); ++p) {
      for (int q = 0; q < overlay.width(); ++q) out(k, p, q) = overlay(k, p, q) * t[k];
    }
  }
  return out;
}

FeatureMap<double> aggregate(const std::vector<NodeEmbedding>& nodes, int height, int width, int channels,
                             FusionNormalization mode) {
  FeatureMap<double> g(channels, height, width);
  if (nodes.empty()) return g;
  std::vector<int> coverage(static_cast<std::size_t>(height) * width, 0);
  for (const auto& n : nodes) {
    if (static_cast<int>(n.embedding.size()) != channels) {
      throw ShapeError("aggregate: embedding size " + std::to_string(n.embedding.size()) + " != " +
                       std::to_string(channels));
    }
    const CellSpan s = covered_cells(n.box, height, width);
    for (int p = s.row_begin; p < s.row_end; ++p) {
      for (int q = s.col_begin; q < s.col_end; ++q) ++coverage[static_cast<std::size_t>(p) * width + q];
    }
    for (int k = 0; k < channels; ++k) {
      const double v = n.embedding[k];
      for (int p = s.row_begin; p < s.row_end; ++p) {
        double* row = g.channel(k) + static_cast<std::size_t>(p) * width;
        for (int q = s.col_begin; q < s.col_end; ++q) row[q] += v;
      }
    }
  }
  const double count = static_cast<double>(nodes.size());
  for (std::size_t cell = 0; cell < coverage.size(); ++cell) {
    const int cov = coverage[cell];
    if (cov == 0) continue;  // 0/0 -> 0, and the sum is already 0 here
    const double denom = mode == FusionNormalization::kAsWritten ? cov / count : static_cast<double>(cov);
    for (int k = 0; k < channels; ++k) g.channel(k)[cell] /= denom;
  }
  return g;
}

}  // namespace iconann
