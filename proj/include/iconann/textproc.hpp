#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iconann/corpus.hpp"
#include "iconann/rng.hpp"
#include "iconann/taxonomy.hpp"
#include "json.hpp"

namespace iconann {

/// Lowercase tokens with no separators or uppercase letters.
using TokenSequence = std::vector<std::string>;

/// Fixed-dimension text embedding.
using TextEmbedding = std::vector<double>;

struct TextAttribute {
  std::string class_tail;
  std::string resource_id_tail;
};

/// "android.support.AppImageButton" -> "AppImageButton";
/// "com.sololearn.python:id/vote_down" -> "vote_down".
TextAttribute extract_text_attribute(const VHNode& node);
std::string class_name_tail(std::string_view class_name);
std::string resource_id_tail(std::string_view resource_id);

/// Splits on underscores and on camel-case boundaries, then lowercases.
/// Also splits on any other non-alphanumeric character so that the output never
/// carries separators. Digits never start a new token ("Button2" stays whole), and
/// an uppercase run followed by a lowercase letter splits before the run's last
/// capital ("URLBar" -> "url", "bar").
TokenSequence tokenize(std::string_view raw);

/// Class-tail tokens followed by resource-id-tail tokens.
TokenSequence node_tokens(const VHNode& node);
TokenSequence node_tokens(std::string_view class_name, std::string_view resource_id);

/// Anything that maps a token sequence to a fixed-size vector.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::size_t dimension() const = 0;
  virtual TextEmbedding encode(const TokenSequence& tokens) const = 0;
};

/// Deterministic hashed bag of words: every token maps to a unit-norm pseudo-random
/// vector seeded by (token, seed); a sequence embeds to the mean of its token vectors.
/// The empty sequence embeds to the zero vector.
class HashedTextEncoder final : public TextEncoder {
 public:
  explicit HashedTextEncoder(std::size_t dimension = 128, std::uint64_t seed = 0);

  std::size_t dimension() const override { return dimension_; }
  std::uint64_t seed() const { return seed_; }
  TextEmbedding encode(const TokenSequence& tokens) const override;
  TextEmbedding token_vector(std::string_view token) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

/// Per-label multiset of resource-id tails.
class ResourceIdDictionary {
 public:
  using Multiset = std::map<std::string, std::size_t>;

  void add(IconClass cls, const std::string& rid_tail, std::size_t count = 1);
  const Multiset& entries(IconClass cls) const { return table_.at(index_of(cls)); }
  std::size_t total(IconClass cls) const;
  bool empty(IconClass cls) const { return entries(cls).empty(); }

  /// Draws a tail with probability proportional to its count. Returns nullopt when
  /// the class has no entries; callers fall back to empty text.
  std::optional<std::string> sample(IconClass cls, Rng& rng) const;

  /// {"class name": {"rid": count}}, classes without entries omitted.
  nlohmann::json to_json() const;
  static ResourceIdDictionary from_json(const nlohmann::json& j);

  friend bool operator==(const ResourceIdDictionary&, const ResourceIdDictionary&) = default;

 private:
  std::array<Multiset, kNumClassifierLabels> table_{};
};

/// Resource-id tails of the VH leaves that back each training icon.
///
/// A leaf backs an icon when their IOU is at least 0.5 (the same rule the default
/// VH matcher uses). Leaves that back no icon are recorded under OTHER when
/// `include_other` is set, so that the crop classifier can sample for them too.
ResourceIdDictionary build_rid_dictionary(const std::vector<UISample>& training, bool include_other = true);

/// Convenience wrapper over ResourceIdDictionary::sample.
std::optional<std::string> sample_rid(const ResourceIdDictionary& dict, IconClass cls, Rng& rng);

}  // namespace iconann
