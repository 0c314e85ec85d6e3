#include "iconann/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "iconann/error.hpp"

namespace iconann {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), e.what());
  }
}

PixelBounds parse_bounds(const json& node, const std::string& where) {
  const auto& b = node.at("bounds");
  if (!b.is_array() || b.size() != 4) throw ParseError(where, "\"bounds\" must be a 4-element array");
  PixelBounds out{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!b[i].is_number()) throw ParseError(where, "\"bounds\" entries must be numbers");
    out[i] = std::lround(b[i].get<double>());
  }
  return out;
}

struct Flattener {
  const std::string& source;
  PixelBounds root;
  Warnings* warnings;
  std::vector<VHNode> leaves;

  void warn(const std::string& msg) {
    if (warnings) warnings->push_back(source + ": " + msg);
  }

  void visit(const json& node, const std::string& where) {
    if (!node.is_object()) throw ParseError(source, where + " is not an object");
    auto it = node.find("children");
    bool has_children = false;
    if (it != node.end() && !it->is_null()) {
      if (!it->is_array()) throw ParseError(source, where + ".children is not an array");
      has_children = !it->empty();
    }
    if (has_children) {
      std::size_t i = 0;
      for (const auto& child : *it) {
        if (!child.is_null()) visit(child, where + ".children[" + std::to_string(i) + "]");
        ++i;
      }
      return;
    }
    add_leaf(node, where);
  }

  void add_leaf(const json& node, const std::string& where) {
    std::string cls;
    if (auto c = node.find("class"); c != node.end() && c->is_string()) cls = c->get<std::string>();
    if (cls.empty()) {
      warn(where + ": leaf without class name skipped");
      return;
    }
    if (!node.contains("bounds")) {
      warn(where + ": leaf without bounds skipped");
      return;
    }
    PixelBounds px = parse_bounds(node, source + " " + where);
    bool clamped = false;
    for (int i = 0; i < 4; ++i) {
      const long lo = (i % 2 == 0) ? root[0] : root[1];
      const long hi = (i % 2 == 0) ? root[2] : root[3];
      const long v = std::clamp(px[i], lo, hi);
      clamped |= v != px[i];
      px[i] = v;
    }
    if (clamped) warn(where + ": bounds outside root clamped");

    const double rw = static_cast<double>(root[2] - root[0]);
    const double rh = static_cast<double>(root[3] - root[1]);
    BoundingBox b{(px[0] - root[0]) / rw, (px[1] - root[1]) / rh, (px[2] - root[0]) / rw,
                  (px[3] - root[1]) / rh};
    if (!b.valid()) {
      warn(where + ": degenerate bounds dropped");
      return;
    }
    VHNode n;
    n.class_name = std::move(cls);
    if (auto r = node.find("resource-id"); r != node.end() && r->is_string()) {
      n.resource_id = r->get<std::string>();
    }
    n.bounds = b;
    leaves.push_back(std::move(n));
  }
};

}  // namespace

ParsedHierarchy parse_view_hierarchy(const json& doc, const std::string& source, Warnings* warnings) {
  const json* root = &doc;
  if (doc.is_object() && doc.contains("activity")) {
    const auto& act = doc.at("activity");
    if (!act.is_object() || !act.contains("root")) throw ParseError(source, "activity has no root");
    root = &act.at("root");
  }
  if (!root->is_object()) throw ParseError(source, "root is not an object");
  if (!root->contains("bounds")) throw ParseError(source, "root node has no bounds");

  Flattener f{source, parse_bounds(*root, source + " root"), warnings, {}};
  if (f.root[2] <= f.root[0] || f.root[3] <= f.root[1]) throw ParseError(source, "root bounds are empty");
  f.visit(*root, "root");
  return {f.root, std::move(f.leaves)};
}

PixelBounds denormalize(const BoundingBox& b, const PixelBounds& root) {
  const double rw = static_cast<double>(root[2] - root[0]);
  const double rh = static_cast<double>(root[3] - root[1]);
  return {root[0] + std::lround(b.x_min * rw), root[1] + std::lround(b.y_min * rh),
          root[0] + std::lround(b.x_max * rw), root[1] + std::lround(b.y_max * rh)};
}

json view_hierarchy_to_json(const std::vector<VHNode>& leaves, const PixelBounds& root) {
  json children = json::array();
  for (const auto& n : leaves) {
    json c;
    c["class"] = n.class_name;
    if (n.resource_id) c["resource-id"] = *n.resource_id;
    const auto px = denormalize(n.bounds, root);
    c["bounds"] = {px[0], px[1], px[2], px[3]};
    children.push_back(std::move(c));
  }
  json r;
  r["class"] = "com.android.internal.policy.PhoneWindow$DecorView";
  r["bounds"] = {root[0], root[1], root[2], root[3]};
  r["children"] = std::move(children);
  return r;
}

json annotations_to_json(const std::string& id, const std::vector<IconAnnotation>& icons) {
  json arr = json::array();
  for (const auto& a : icons) {
    arr.push_back({{"bbox", {a.bbox.x_min, a.bbox.y_min, a.bbox.x_max, a.bbox.y_max}},
                   {"label", std::string(name_of(a.label))},
                   {"vh_matched", a.vh_matched}});
  }
  return {{"id", id}, {"icons", std::move(arr)}};
}

std::vector<IconAnnotation> annotations_from_json(const json& record, const std::string& source) {
  std::vector<IconAnnotation> out;
  try {
    for (const auto& icon : record.at("icons")) {
      const auto& bb = icon.at("bbox");
      if (!bb.is_array() || bb.size() != 4) throw ParseError(source, "bbox must have 4 entries");
      IconAnnotation a;
      a.bbox = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
      if (!a.bbox.valid()) throw ParseError(source, "invalid annotation bbox " + to_string(a.bbox));
      const auto label = icon.at("label").get<std::string>();
      auto cls = parse_icon_class(label);
      if (!cls || !is_icon(*cls)) throw ParseError(source, "unknown icon label '" + label + "'");
      a.label = *cls;
      a.vh_matched = icon.value("vh_matched", false);
      out.push_back(a);
    }
  } catch (const json::exception& e) {
    throw ParseError(source, e.what());
  }
  return out;
}

std::map<std::string, std::vector<IconAnnotation>> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::vector<IconAnnotation>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where, e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) {
      throw ParseError(where, "record lacks string \"id\"");
    }
    out[rec["id"].get<std::string>()] = annotations_from_json(rec, where);
  }
  return out;
}

UISample load_sample(const std::filesystem::path& screenshot_path, const std::filesystem::path& vh_path,
                     const std::optional<std::filesystem::path>& ann_path, Warnings* warnings) {
  UISample s;
  s.id = screenshot_path.stem().string();
  s.pixels = read_png(screenshot_path);
  auto parsed = parse_view_hierarchy(read_json_file(vh_path), vh_path.string(), warnings);
  s.vh_root = parsed.root;
  s.vh_leaves = std::move(parsed.leaves);
  if (ann_path) {
    auto all = read_annotations(*ann_path);
    auto it = all.find(s.id);
    if (it == all.end()) throw ParseError(ann_path->string(), "no record for id '" + s.id + "'");
    s.annotations = std::move(it->second);
  }
  return s;
}

std::vector<UISample> load_corpus(const std::filesystem::path& dir, Warnings* warnings) {
  const CorpusPaths paths{dir};
  std::ifstream in(paths.annotations());
  if (!in) throw IoError("cannot open " + paths.annotations().string());
  std::vector<UISample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = paths.annotations().string() + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where, e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) {
      throw ParseError(where, "record lacks string \"id\"");
    }
    const auto id = rec["id"].get<std::string>();
    UISample s;
    s.id = id;
    s.pixels = read_png(paths.image(id));
    auto parsed = parse_view_hierarchy(read_json_file(paths.vh(id)), paths.vh(id).string(), warnings);
    s.vh_root = parsed.root;
    s.vh_leaves = std::move(parsed.leaves);
    s.annotations = annotations_from_json(rec, where);
    out.push_back(std::move(s));
  }
  return out;
}

void write_sample_files(const CorpusPaths& paths, const UISample& sample) {
  write_png(paths.image(sample.id), sample.pixels);
  std::ofstream vh(paths.vh(sample.id));
  if (!vh) throw IoError("cannot write " + paths.vh(sample.id).string());
  vh << view_hierarchy_to_json(sample.vh_leaves, sample.vh_root).dump() << "\n";
  if (!vh) throw IoError("write failed: " + paths.vh(sample.id).string());
}

void write_corpus(const std::filesystem::path& dir, const std::vector<UISample>& samples) {
  const CorpusPaths paths{dir};
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  std::filesystem::create_directories(dir / "vh", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream ann(paths.annotations());
  if (!ann) throw IoError("cannot write " + paths.annotations().string());
  for (const auto& s : samples) {
    write_sample_files(paths, s);
    ann << annotations_to_json(s.id, s.annotations).dump() << "\n";
  }
  if (!ann) throw IoError("write failed: " + paths.annotations().string());
}

std::optional<std::size_t> match_leaf_to_annotation(const BoundingBox& leaf,
                                                    const std::vector<IconAnnotation>& annotations,
                                                    double min_iou) {
  std::optional<std::size_t> best;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i].bbox;
    if (!a.contains(leaf.center_x(), leaf.center_y())) continue;
    const double v = iou(leaf, a);
    if (v >= min_iou && v > best_iou) {
      best = i;
      best_iou = v;
    }
  }
  return best;
}

json CorpusStats::to_json() const {
  json counts = json::object();
  for (std::size_t i = 0; i < kNumIconClasses; ++i) {
    counts[std::string(kIconClassNames[i])] = class_counts[i];
  }
  json hist = json::object();
  for (const auto& [k, v] : icons_per_sample) hist[std::to_string(k)] = v;
  return {{"num_samples", num_samples},
          {"num_annotations", num_annotations},
          {"class_counts", std::move(counts)},
          {"icons_per_sample", std::move(hist)}};
}

CorpusStats corpus_stats(const std::vector<UISample>& samples) {
  CorpusStats st;
  for (const auto& s : samples) {
    ++st.num_samples;
    ++st.icons_per_sample[s.annotations.size()];
    for (const auto& a : s.annotations) {
      ++st.class_counts.at(static_cast<std::size_t>(index_of(a.label)));
      ++st.num_annotations;
    }
  }
  return st;
}

}  // namespace iconann
