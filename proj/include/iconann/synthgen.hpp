#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "iconann/corpus.hpp"
#include "iconann/rng.hpp"
#include "iconann/taxonomy.hpp"
#include "iconann/textproc.hpp"
#include "json.hpp"

namespace iconann {

struct GenConfig {
  int n_samples = 100;
  int canvas_height = 192;
  int canvas_width = 384;
  /// Classes icons are drawn from, uniformly. Empty means all 29.
  std::vector<IconClass> classes;
  int icons_min = 2;
  int icons_max = 6;
  int icon_size_min = 16;
  int icon_size_max = 28;
  double p_rid = 0.7;
  double p_drop_node = 0.0;
  /// Per icon, the chance of one spurious VH leaf somewhere empty on the screen.
  double p_extra_node = 0.05;
  /// The second class of each pair is drawn with the first one's glyph.
  std::vector<std::pair<IconClass, IconClass>> ambiguous_pairs{{IconClass::kClose, IconClass::kDelete}};
  std::uint64_t seed = 0;
  /// VH pixel coordinates are the canvas scaled by this factor.
  int vh_scale = 4;
  std::string id_prefix = "s";

  /// Throws std::invalid_argument.
  void validate() const;
  std::vector<IconClass> active_classes() const;
  /// The class whose glyph `cls` is drawn with.
  IconClass glyph_class(IconClass cls) const;

  nlohmann::json to_json() const;
  static GenConfig from_json(const nlohmann::json& j);
};

struct GenSampleRecord {
  std::string id;
  std::vector<IconAnnotation> icons;
  std::size_t num_leaves = 0;
  std::size_t rid_leaves = 0;
};

struct GenManifest {
  GenConfig config;
  std::vector<GenSampleRecord> samples;
  std::array<std::size_t, kNumIconClasses> class_counts{};
  /// Resource-id tails on emitted leaves: icon leaves under their icon's class,
  /// every other leaf under OTHER.
  ResourceIdDictionary rid_counts;
  std::size_t icon_nodes = 0;
  std::size_t icon_nodes_with_rid = 0;

  nlohmann::json to_json() const;
};

struct GeneratedCorpus {
  std::vector<UISample> samples;
  GenManifest manifest;
};

/// Resource-id tails a class's VH nodes draw from.
std::vector<std::string> rid_keywords(IconClass cls);

/// Draws `glyph` anti-aliased into the square pixel box [x0, x0+size) x [y0, y0+size).
/// `thickness` scales stroke widths (1 = nominal).
void draw_glyph(Image& img, IconClass glyph, int x0, int y0, int size, std::array<std::uint8_t, 3> color,
                double thickness = 1.0);

/// Generates the corpus in memory. Sample i depends only on (seed, i) and the config.
GeneratedCorpus generate_samples(const GenConfig& config);

/// Generates into `dir` in the corpus layout and writes manifest.json.
GenManifest generate(const GenConfig& config, const std::filesystem::path& dir);

}  // namespace iconann
