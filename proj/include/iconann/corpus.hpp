#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iconann/geometry.hpp"
#include "iconann/image.hpp"
#include "iconann/taxonomy.hpp"
#include "json.hpp"

namespace iconann {

/// One view-hierarchy leaf.
struct VHNode {
  std::string class_name;
  std::optional<std::string> resource_id;
  BoundingBox bounds;

  friend bool operator==(const VHNode&, const VHNode&) = default;
};

struct IconAnnotation {
  BoundingBox bbox;
  IconClass label = IconClass::kStar;
  /// Whether this icon maps back to a VH leaf (used by starred evaluation).
  bool vh_matched = false;

  friend bool operator==(const IconAnnotation&, const IconAnnotation&) = default;
};

/// Pixel bounds [left, top, right, bottom] of a VH root node.
using PixelBounds = std::array<long, 4>;

struct UISample {
  std::string id;
  Image pixels;
  /// Leaves in depth-first order.
  std::vector<VHNode> vh_leaves;
  std::vector<IconAnnotation> annotations;
  /// Root bounds the leaves were normalized against; needed to write the VH back out.
  PixelBounds vh_root{0, 0, 1, 1};
};

using Warnings = std::vector<std::string>;

/// Result of flattening a VH JSON document.
struct ParsedHierarchy {
  PixelBounds root{};
  std::vector<VHNode> leaves;
};

/// Parses a VH document. Accepts either a bare node tree or Rico's
/// {"activity": {"root": ...}} wrapper. `source` is used in error messages.
ParsedHierarchy parse_view_hierarchy(const nlohmann::json& doc, const std::string& source,
                                     Warnings* warnings = nullptr);

/// Emits a two-level tree: the root with every leaf as a direct child, bounds in pixels.
nlohmann::json view_hierarchy_to_json(const std::vector<VHNode>& leaves, const PixelBounds& root);

/// Maps a normalized coordinate back to integer pixels against the root bounds.
PixelBounds denormalize(const BoundingBox& b, const PixelBounds& root);

/// {"id": ..., "icons": [{"bbox": [...], "label": ..., "vh_matched": ...}]}
nlohmann::json annotations_to_json(const std::string& id, const std::vector<IconAnnotation>& icons);
std::vector<IconAnnotation> annotations_from_json(const nlohmann::json& record, const std::string& source);

/// Reads every record of an annotation JSON-lines file, keyed by sample id.
std::map<std::string, std::vector<IconAnnotation>> read_annotations(const std::filesystem::path& path);

/// Loads one screenshot / VH / annotation triple. The sample id is the screenshot's
/// file stem; when `ann_path` is given the record with that id is required.
UISample load_sample(const std::filesystem::path& screenshot_path, const std::filesystem::path& vh_path,
                     const std::optional<std::filesystem::path>& ann_path = std::nullopt,
                     Warnings* warnings = nullptr);

/// On-disk corpus layout:
///   <dir>/images/<id>.png
///   <dir>/vh/<id>.json
///   <dir>/annotations.jsonl
struct CorpusPaths {
  std::filesystem::path root;
  std::filesystem::path image(const std::string& id) const { return root / "images" / (id + ".png"); }
  std::filesystem::path vh(const std::string& id) const { return root / "vh" / (id + ".json"); }
  std::filesystem::path annotations() const { return root / "annotations.jsonl"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
};

/// Loads all samples listed in <dir>/annotations.jsonl, in file order.
std::vector<UISample> load_corpus(const std::filesystem::path& dir, Warnings* warnings = nullptr);

/// Writes samples in the CorpusPaths layout, overwriting annotations.jsonl.
void write_corpus(const std::filesystem::path& dir, const std::vector<UISample>& samples);

/// Writes a single sample's PNG and VH file; the caller owns the annotations file.
void write_sample_files(const CorpusPaths& paths, const UISample& sample);

/// Index of the annotation a VH leaf box stands for: the leaf's center must lie inside
/// the annotation box and their IOU must be at least `min_iou`. Ties on IOU go to the
/// lower index. nullopt when no annotation qualifies.
std::optional<std::size_t> match_leaf_to_annotation(const BoundingBox& leaf,
                                                    const std::vector<IconAnnotation>& annotations,
                                                    double min_iou = 0.5);

struct CorpusStats {
  std::size_t num_samples = 0;
  std::size_t num_annotations = 0;
  std::array<std::size_t, kNumIconClasses> class_counts{};
  /// icons-per-sample -> number of samples
  std::map<std::size_t, std::size_t> icons_per_sample;

  nlohmann::json to_json() const;
};

CorpusStats corpus_stats(const std::vector<UISample>& samples);

}  // namespace iconann
