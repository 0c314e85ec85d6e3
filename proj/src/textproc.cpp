#include "iconann/textproc.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace iconann {

std::string class_name_tail(std::string_view class_name) {
  const auto dot = class_name.rfind('.');
  return std::string(dot == std::string_view::npos ? class_name : class_name.substr(dot + 1));
}

std::string resource_id_tail(std::string_view resource_id) {
  // ":id/" always ends in '/', so the final slash covers both forms.
  const auto slash = resource_id.rfind('/');
  return std::string(slash == std::string_view::npos ? resource_id : resource_id.substr(slash + 1));
}

TextAttribute extract_text_attribute(const VHNode& node) {
  return {class_name_tail(node.class_name),
          node.resource_id ? resource_id_tail(*node.resource_id) : std::string()};
}

namespace {

enum class CharKind { kUpper, kLower, kDigit, kSeparator };

CharKind kind_of(unsigned char c) {
  if (c >= 0x80) return CharKind::kLower;  // keep non-ASCII bytes inside tokens
  if (std::isupper(c)) return CharKind::kUpper;
  if (std::islower(c)) return CharKind::kLower;
  if (std::isdigit(c)) return CharKind::kDigit;
  return CharKind::kSeparator;
}

}  // namespace

TokenSequence tokenize(std::string_view raw) {
  TokenSequence out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    const CharKind k = kind_of(c);
    if (k == CharKind::kSeparator) {
      flush();
      continue;
    }
    if (k == CharKind::kUpper && i > 0) {
      const CharKind prev = kind_of(static_cast<unsigned char>(raw[i - 1]));
      const bool next_lower =
          i + 1 < raw.size() && kind_of(static_cast<unsigned char>(raw[i + 1])) == CharKind::kLower;
      // aB, 2B, and the last capital of "ABc"
      if (prev == CharKind::kLower || prev == CharKind::kDigit ||
          (prev == CharKind::kUpper && next_lower)) {
        flush();
      }
    }
    cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
  }
  flush();
  return out;
}

TokenSequence node_tokens(std::string_view class_name, std::string_view resource_id) {
  TokenSequence t = tokenize(class_name_tail(class_name));
  for (auto& tok : tokenize(resource_id_tail(resource_id))) t.push_back(std::move(tok));
  return t;
}

TokenSequence node_tokens(const VHNode& node) {
  return node_tokens(node.class_name, node.resource_id ? std::string_view(*node.resource_id) : "");
}

HashedTextEncoder::HashedTextEncoder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension == 0) throw std::invalid_argument("encoder dimension must be positive");
}

TextEmbedding HashedTextEncoder::token_vector(std::string_view token) const {
  Rng rng(mix64(fnv1a64(token) ^ mix64(seed_)));
  TextEmbedding v(dimension_);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

TextEmbedding HashedTextEncoder::encode(const TokenSequence& tokens) const {
  TextEmbedding out(dimension_, 0.0);
  if (tokens.empty()) return out;
  for (const auto& t : tokens) {
    const auto v = token_vector(t);
    for (std::size_t k = 0; k < dimension_; ++k) out[k] += v[k];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (auto& x : out) x *= inv;
  return out;
}

void ResourceIdDictionary::add(IconClass cls, const std::string& rid_tail, std::size_t count) {
  if (count == 0) throw std::invalid_argument("dictionary counts must be >= 1");
  table_.at(index_of(cls))[rid_tail] += count;
}

std::size_t ResourceIdDictionary::total(IconClass cls) const {
  std::size_t n = 0;
  for (const auto& [_, c] : entries(cls)) n += c;
  return n;
}

std::optional<std::string> ResourceIdDictionary::sample(IconClass cls, Rng& rng) const {
  const auto& m = entries(cls);
  const std::size_t n = total(cls);
  if (n == 0) return std::nullopt;
  auto pick = static_cast<std::size_t>(rng.next_u64() % n);
  for (const auto& [rid, c] : m) {
    if (pick < c) return rid;
    pick -= c;
  }
  return std::prev(m.end())->first;
}

nlohmann::json ResourceIdDictionary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < table_.size(); ++i) {
    if (table_[i].empty()) continue;
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [rid, c] : table_[i]) m[rid] = c;
    j[std::string(kIconClassNames[i])] = std::move(m);
  }
  return j;
}

ResourceIdDictionary ResourceIdDictionary::from_json(const nlohmann::json& j) {
  ResourceIdDictionary d;
  for (const auto& [cls_name, m] : j.items()) {
    const IconClass cls = icon_class_from_name(cls_name);
    for (const auto& [rid, c] : m.items()) d.add(cls, rid, c.get<std::size_t>());
  }
  return d;
}

ResourceIdDictionary build_rid_dictionary(const std::vector<UISample>& training, bool include_other) {
  ResourceIdDictionary d;
  for (const auto& s : training) {
    for (const auto& leaf : s.vh_leaves) {
      if (!leaf.resource_id) continue;
      const auto tail = resource_id_tail(*leaf.resource_id);
      if (tail.empty()) continue;
      if (auto idx = match_leaf_to_annotation(leaf.bounds, s.annotations)) {
        d.add(s.annotations[*idx].label, tail);
      } else if (include_other) {
        d.add(IconClass::kOther, tail);
      }
    }
  }
  return d;
}

std::optional<std::string> sample_rid(const ResourceIdDictionary& dict, IconClass cls, Rng& rng) {
  return dict.sample(cls, rng);
}

}  // namespace iconann
