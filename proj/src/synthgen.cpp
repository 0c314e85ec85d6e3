#include "iconann/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <variant>

#include "iconann/error.hpp"

namespace iconann {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void GenConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("generator config: " + m); };
  if (n_samples < 0) fail("n_samples must be non-negative");
  if (canvas_height < 64 || canvas_width < 64) fail("canvas must be at least 64x64");
  if (icons_min < 0 || icons_max < icons_min) fail("bad icons-per-screen range");
  if (icon_size_min < 8 || icon_size_max < icon_size_min) fail("bad icon size range");
  if (icon_size_max * 2 > std::min(canvas_height, canvas_width)) fail("icons too large for the canvas");
  for (double p : {p_rid, p_drop_node, p_extra_node}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0,1]");
  }
  for (auto c : classes) {
    if (!is_icon(c)) fail("OTHER is not a drawable class");
  }
  for (const auto& [a, b] : ambiguous_pairs) {
    if (!is_icon(a) || !is_icon(b) || a == b) fail("ambiguous pairs need two distinct icon classes");
  }
  if (vh_scale < 1) fail("vh_scale must be positive");
}

std::vector<IconClass> GenConfig::active_classes() const {
  if (!classes.empty()) return classes;
  std::vector<IconClass> all;
  for (std::size_t i = 0; i < kNumIconClasses; ++i) all.push_back(icon_class_at(i));
  return all;
}

IconClass GenConfig::glyph_class(IconClass cls) const {
  for (const auto& [a, b] : ambiguous_pairs) {
    if (cls == b) return a;
  }
  return cls;
}

json GenConfig::to_json() const {
  json cls = json::array();
  for (auto c : classes) cls.push_back(std::string(name_of(c)));
  json pairs = json::array();
  for (const auto& [a, b] : ambiguous_pairs) pairs.push_back({std::string(name_of(a)), std::string(name_of(b))});
  return {{"n_samples", n_samples},       {"canvas_height", canvas_height}, {"canvas_width", canvas_width},
          {"classes", cls},               {"icons_min", icons_min},         {"icons_max", icons_max},
          {"icon_size_min", icon_size_min}, {"icon_size_max", icon_size_max}, {"p_rid", p_rid},
          {"p_drop_node", p_drop_node},   {"p_extra_node", p_extra_node},   {"ambiguous_pairs", pairs},
          {"seed", seed},                 {"vh_scale", vh_scale},           {"id_prefix", id_prefix}};
}

GenConfig GenConfig::from_json(const json& j) {
  GenConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.canvas_height = j.value("canvas_height", c.canvas_height);
  c.canvas_width = j.value("canvas_width", c.canvas_width);
  if (j.contains("classes")) {
    c.classes.clear();
    for (const auto& n : j.at("classes")) c.classes.push_back(icon_class_from_name(n.get<std::string>()));
  }
  c.icons_min = j.value("icons_min", c.icons_min);
  c.icons_max = j.value("icons_max", c.icons_max);
  c.icon_size_min = j.value("icon_size_min", c.icon_size_min);
  c.icon_size_max = j.value("icon_size_max", c.icon_size_max);
  c.p_rid = j.value("p_rid", c.p_rid);
  c.p_drop_node = j.value("p_drop_node", c.p_drop_node);
  c.p_extra_node = j.value("p_extra_node", c.p_extra_node);
  if (j.contains("ambiguous_pairs")) {
    c.ambiguous_pairs.clear();
    for (const auto& p : j.at("ambiguous_pairs")) {
      if (!p.is_array() || p.size() != 2) throw std::invalid_argument("ambiguous_pairs entries must be 2-element arrays");
      c.ambiguous_pairs.emplace_back(icon_class_from_name(p[0].get<std::string>()),
                                     icon_class_from_name(p[1].get<std::string>()));
    }
  }
  c.seed = j.value("seed", c.seed);
  c.vh_scale = j.value("vh_scale", c.vh_scale);
  c.id_prefix = j.value("id_prefix", c.id_prefix);
  c.validate();
  return c;
}

json GenManifest::to_json() const {
  json samples_j = json::array();
  for (const auto& s : samples) {
    json rec = annotations_to_json(s.id, s.icons);
    rec["num_leaves"] = s.num_leaves;
    rec["rid_leaves"] = s.rid_leaves;
    samples_j.push_back(std::move(rec));
  }
  json counts = json::object();
  for (std::size_t i = 0; i < kNumIconClasses; ++i) counts[std::string(name_of(icon_class_at(i)))] = class_counts[i];
  json keywords = json::object();
  for (auto c : config.active_classes()) keywords[std::string(name_of(c))] = rid_keywords(c);
  keywords["OTHER"] = rid_keywords(IconClass::kOther);
  return {{"config", config.to_json()},
          {"class_counts", counts},
          {"rid_keywords", keywords},
          {"rid_counts", rid_counts.to_json()},
          {"icon_nodes", icon_nodes},
          {"icon_nodes_with_rid", icon_nodes_with_rid},
          {"samples", samples_j}};
}

// ---------------------------------------------------------------------------
// Resource-id vocabulary

std::vector<std::string> rid_keywords(IconClass cls) {
  if (cls == IconClass::kOther) {
    return {"title", "subtitle", "label_text", "description", "user_name", "txt_price", "flag", "avatar",
            "thumbnail", "banner_image", "container", "placeholder_view"};
  }
  std::string snake;
  std::string camel;
  bool up = false;
  for (char ch : name_of(cls)) {
    if (ch == ' ') {
      snake += '_';
      up = true;
      continue;
    }
    snake += ch;
    camel += up ? static_cast<char>(std::toupper(static_cast<unsigned char>(ch))) : ch;
    up = false;
  }
  return {snake, "btn_" + snake, "ic_" + snake, camel + "Button"};
}

// ---------------------------------------------------------------------------
// Glyph rasterization. Shapes live in the unit square, y pointing down.

namespace {

struct Pt {
  double x, y;
};

struct Seg {
  Pt a, b;
  double w;  // stroke width
};
struct Ring {
  Pt c;
  double r, w;
  double a0 = 0.0, a1 = 360.0;  // degrees, clockwise from +x since y is down
};
struct Disk {
  Pt c;
  double r;
};
struct Poly {
  std::vector<Pt> pts;
};
struct Box {
  double x0, y0, x1, y1;
};
struct Frame {
  double x0, y0, x1, y1, w;
};

using Shape = std::variant<Seg, Ring, Disk, Poly, Box, Frame>;

bool inside(const Seg& s, Pt p) {
  const double dx = s.b.x - s.a.x, dy = s.b.y - s.a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = s.a.x + t * dx - p.x, ey = s.a.y + t * dy - p.y;
  return ex * ex + ey * ey <= s.w * s.w / 4;
}

bool inside(const Ring& r, Pt p) {
  const double dx = p.x - r.c.x, dy = p.y - r.c.y;
  const double d = std::sqrt(dx * dx + dy * dy);
  if (std::abs(d - r.r) > r.w / 2) return false;
  if (r.a1 - r.a0 >= 360.0) return true;
  double ang = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
  if (ang < 0) ang += 360.0;
  double lo = std::fmod(r.a0 + 720.0, 360.0);
  const double span = r.a1 - r.a0;
  double rel = ang - lo;
  if (rel < 0) rel += 360.0;
  return rel <= span;
}

bool inside(const Disk& d, Pt p) {
  const double dx = p.x - d.c.x, dy = p.y - d.c.y;
  return dx * dx + dy * dy <= d.r * d.r;
}

bool inside(const Poly& poly, Pt p) {
  bool in = false;
  const auto& v = poly.pts;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y) && p.x < (v[j].x - v[i].x) * (p.y - v[i].y) / (v[j].y - v[i].y) + v[i].x) {
      in = !in;
    }
  }
  return in;
}

bool inside(const Box& b, Pt p) { return p.x >= b.x0 && p.x <= b.x1 && p.y >= b.y0 && p.y <= b.y1; }

bool inside(const Frame& f, Pt p) {
  if (!inside(Box{f.x0, f.y0, f.x1, f.y1}, p)) return false;
  return !inside(Box{f.x0 + f.w, f.y0 + f.w, f.x1 - f.w, f.y1 - f.w}, p);
}

std::vector<Shape> glyph_shapes(IconClass cls, double t) {
  const double w = 0.11 * t;
  switch (cls) {
    case IconClass::kStar: {
      Poly p;
      for (int k = 0; k < 10; ++k) {
        const double r = k % 2 ? 0.19 : 0.45;
        const double a = -std::numbers::pi / 2 + k * std::numbers::pi / 5;
        p.pts.push_back({0.5 + r * std::cos(a), 0.54 + r * std::sin(a)});
      }
      return {p};
    }
    case IconClass::kArrowBackward:
      return {Seg{{0.18, 0.5}, {0.82, 0.5}, w}, Seg{{0.18, 0.5}, {0.45, 0.23}, w}, Seg{{0.18, 0.5}, {0.45, 0.77}, w}};
    case IconClass::kArrowForward:
      return {Seg{{0.18, 0.5}, {0.82, 0.5}, w}, Seg{{0.82, 0.5}, {0.55, 0.23}, w}, Seg{{0.82, 0.5}, {0.55, 0.77}, w}};
    case IconClass::kMore:
      return {Disk{{0.5, 0.2}, 0.09}, Disk{{0.5, 0.5}, 0.09}, Disk{{0.5, 0.8}, 0.09}};
    case IconClass::kMenu:
      return {Seg{{0.18, 0.27}, {0.82, 0.27}, w}, Seg{{0.18, 0.5}, {0.82, 0.5}, w}, Seg{{0.18, 0.73}, {0.82, 0.73}, w}};
    case IconClass::kSearch:
      return {Ring{{0.42, 0.42}, 0.22, w}, Seg{{0.58, 0.58}, {0.84, 0.84}, w * 1.3}};
    case IconClass::kClose:
      return {Seg{{0.22, 0.22}, {0.78, 0.78}, w}, Seg{{0.78, 0.22}, {0.22, 0.78}, w}};
    case IconClass::kAdd:
      return {Seg{{0.5, 0.18}, {0.5, 0.82}, w}, Seg{{0.18, 0.5}, {0.82, 0.5}, w}};
    case IconClass::kExpandMore:
      return {Seg{{0.2, 0.36}, {0.5, 0.66}, w}, Seg{{0.5, 0.66}, {0.8, 0.36}, w}};
    case IconClass::kPlay:
      return {Poly{{{0.3, 0.18}, {0.3, 0.82}, {0.82, 0.5}}}};
    case IconClass::kCheck:
      return {Seg{{0.18, 0.52}, {0.4, 0.74}, w}, Seg{{0.4, 0.74}, {0.84, 0.28}, w}};
    case IconClass::kShare:
      return {Disk{{0.74, 0.22}, 0.11}, Disk{{0.26, 0.5}, 0.11}, Disk{{0.74, 0.78}, 0.11},
              Seg{{0.26, 0.5}, {0.74, 0.22}, w * 0.7}, Seg{{0.26, 0.5}, {0.74, 0.78}, w * 0.7}};
    case IconClass::kChat:
      return {Frame{0.15, 0.18, 0.85, 0.68, w}, Poly{{{0.3, 0.66}, {0.3, 0.86}, {0.5, 0.66}}}};
    case IconClass::kSettings: {
      std::vector<Shape> s{Ring{{0.5, 0.5}, 0.22, w * 1.2}};
      for (int k = 0; k < 8; ++k) {
        const double a = k * std::numbers::pi / 4;
        s.push_back(Seg{{0.5 + 0.27 * std::cos(a), 0.5 + 0.27 * std::sin(a)},
                        {0.5 + 0.4 * std::cos(a), 0.5 + 0.4 * std::sin(a)}, w * 1.1});
      }
      return s;
    }
    case IconClass::kInfo:
      return {Ring{{0.5, 0.5}, 0.4, w * 0.8}, Disk{{0.5, 0.3}, 0.07}, Seg{{0.5, 0.45}, {0.5, 0.72}, w}};
    case IconClass::kHome:
      return {Poly{{{0.12, 0.5}, {0.5, 0.14}, {0.88, 0.5}}}, Box{0.27, 0.48, 0.73, 0.86}};
    case IconClass::kRefresh:
      return {Ring{{0.5, 0.52}, 0.3, w, 0.0, 290.0}, Poly{{{0.62, 0.1}, {0.92, 0.26}, {0.62, 0.4}}}};
    case IconClass::kTime:
      return {Ring{{0.5, 0.5}, 0.38, w * 0.8}, Seg{{0.5, 0.5}, {0.5, 0.24}, w * 0.8}, Seg{{0.5, 0.5}, {0.7, 0.6}, w * 0.8}};
    case IconClass::kEmoji:
      return {Ring{{0.5, 0.5}, 0.4, w * 0.8}, Disk{{0.36, 0.4}, 0.06}, Disk{{0.64, 0.4}, 0.06},
              Ring{{0.5, 0.52}, 0.2, w * 0.7, 20.0, 160.0}};
    case IconClass::kEdit:
      return {Seg{{0.3, 0.7}, {0.78, 0.22}, w * 1.6}, Poly{{{0.16, 0.84}, {0.22, 0.62}, {0.38, 0.78}}}};
    case IconClass::kNotifications:
      return {Ring{{0.5, 0.48}, 0.24, 0.48, 180.0, 360.0}, Box{0.26, 0.46, 0.74, 0.7}, Box{0.16, 0.68, 0.84, 0.74},
              Disk{{0.5, 0.82}, 0.07}};
    case IconClass::kCall:
      return {Ring{{0.56, 0.44}, 0.32, w * 1.4, 95.0, 175.0}, Disk{{0.25, 0.38}, 0.11}, Disk{{0.62, 0.76}, 0.11}};
    case IconClass::kPause:
      return {Box{0.26, 0.2, 0.42, 0.8}, Box{0.58, 0.2, 0.74, 0.8}};
    case IconClass::kSend:
      return {Poly{{{0.14, 0.18}, {0.88, 0.5}, {0.14, 0.82}, {0.28, 0.5}}}};
    case IconClass::kDelete:
      return {Box{0.2, 0.2, 0.8, 0.28}, Box{0.4, 0.13, 0.6, 0.2}, Frame{0.27, 0.3, 0.73, 0.86, w * 0.8},
              Seg{{0.5, 0.4}, {0.5, 0.76}, w * 0.6}};
    case IconClass::kVideoCam:
      return {Box{0.12, 0.3, 0.62, 0.7}, Poly{{{0.6, 0.5}, {0.88, 0.3}, {0.88, 0.7}}}};
    case IconClass::kLaunch:
      return {Seg{{0.2, 0.2}, {0.2, 0.8}, w * 0.8},  Seg{{0.2, 0.8}, {0.8, 0.8}, w * 0.8},
              Seg{{0.8, 0.8}, {0.8, 0.55}, w * 0.8}, Seg{{0.2, 0.2}, {0.45, 0.2}, w * 0.8},
              Seg{{0.45, 0.55}, {0.82, 0.18}, w},    Poly{{{0.58, 0.14}, {0.86, 0.14}, {0.86, 0.42}}}};
    case IconClass::kEndCall:
      return {Ring{{0.5, 0.75}, 0.36, w * 1.5, 200.0, 340.0}, Box{0.1, 0.58, 0.26, 0.7}, Box{0.74, 0.58, 0.9, 0.7}};
    case IconClass::kTakePhoto:
      return {Frame{0.12, 0.3, 0.88, 0.82, w * 0.8}, Box{0.36, 0.2, 0.64, 0.3}, Ring{{0.5, 0.56}, 0.14, w * 0.8}};
    case IconClass::kOther:
      break;
  }
  throw std::invalid_argument("no glyph for OTHER");
}

void blend(Image& img, int y, int x, const std::array<std::uint8_t, 3>& color, double alpha) {
  if (y < 0 || x < 0 || y >= img.height() || x >= img.width() || alpha <= 0.0) return;
  for (int c = 0; c < 3; ++c) {
    const double v = img.at(y, x, c) * (1.0 - alpha) + color[c] * alpha;
    img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, const std::array<std::uint8_t, 3>& color) {
  for (int y = std::max(0, y0); y < std::min(img.height(), y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(img.width(), x1); ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
    }
  }
}

}  // namespace

void draw_glyph(Image& img, IconClass glyph, int x0, int y0, int size, std::array<std::uint8_t, 3> color,
                double thickness) {
  const auto shapes = glyph_shapes(glyph, thickness);
  constexpr int kSub = 3;
  for (int py = 0; py < size; ++py) {
    for (int px = 0; px < size; ++px) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const Pt p{(px + (sx + 0.5) / kSub) / size, (py + (sy + 0.5) / kSub) / size};
          for (const auto& s : shapes) {
            if (std::visit([&](const auto& sh) { return inside(sh, p); }, s)) {
              ++hits;
              break;
            }
          }
        }
      }
      blend(img, y0 + py, x0 + px, color, static_cast<double>(hits) / (kSub * kSub));
    }
  }
}

// ---------------------------------------------------------------------------
// Screens

namespace {

struct PxBox {
  int x0, y0, x1, y1;
  bool overlaps(const PxBox& o, int margin) const {
    return x0 < o.x1 + margin && o.x0 < x1 + margin && y0 < o.y1 + margin && o.y0 < y1 + margin;
  }
};

std::array<std::uint8_t, 3> rgb(Rng& rng, int lo, int hi) {
  return {static_cast<std::uint8_t>(rng.uniform_int(lo, hi)), static_cast<std::uint8_t>(rng.uniform_int(lo, hi)),
          static_cast<std::uint8_t>(rng.uniform_int(lo, hi))};
}

/// Places a w x h box away from everything in `taken`; nullopt after repeated failures.
std::optional<PxBox> place(Rng& rng, int w, int h, const GenConfig& cfg, std::vector<PxBox>& taken) {
  for (int attempt = 0; attempt < 60; ++attempt) {
    const int x = rng.uniform_int(2, cfg.canvas_width - w - 2);
    const int y = rng.uniform_int(2, cfg.canvas_height - h - 2);
    const PxBox b{x, y, x + w, y + h};
    if (std::none_of(taken.begin(), taken.end(), [&](const PxBox& o) { return b.overlaps(o, 4); })) {
      taken.push_back(b);
      return b;
    }
  }
  return std::nullopt;
}

const char* kIconViewClasses[] = {"android.widget.ImageButton", "android.widget.ImageView",
                                  "androidx.appcompat.widget.AppCompatImageButton",
                                  "android.support.v7.widget.AppCompatImageView"};

struct LeafSpec {
  PxBox box;
  std::string class_name;
  std::optional<std::string> rid_tail;
  IconClass owner = IconClass::kOther;
};

}  // namespace

GeneratedCorpus generate_samples(const GenConfig& config) {
  config.validate();
  const auto classes = config.active_classes();
  const Rng root(config.seed);
  const Rng per_sample = root.derive("sample");
  GeneratedCorpus out;
  out.manifest.config = config;

  for (int i = 0; i < config.n_samples; ++i) {
    const Rng base = per_sample.derive(static_cast<std::uint64_t>(i));
    Rng layout = base.derive("layout");
    Rng look = base.derive("look");
    Rng vh = base.derive("vh");

    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%05d", i);
    UISample s;
    s.id = config.id_prefix + idbuf;
    const int cw = config.canvas_width;
    const int ch = config.canvas_height;
    s.pixels = Image(ch, cw);
    const auto bg = rgb(look, 215, 255);
    fill_rect(s.pixels, 0, 0, cw, ch, bg);
    const int bar = layout.uniform_int(18, 30);
    fill_rect(s.pixels, 0, 0, cw, bar, rgb(look, 60, 200));

    std::vector<PxBox> taken;
    std::vector<LeafSpec> leaves;

    // Icons.
    const int n_icons = layout.uniform_int(config.icons_min, config.icons_max);
    for (int k = 0; k < n_icons; ++k) {
      const auto cls = classes[static_cast<std::size_t>(layout.uniform_int(0, static_cast<int>(classes.size()) - 1))];
      const int size = layout.uniform_int(config.icon_size_min, config.icon_size_max);
      const auto box = place(layout, size, size, config, taken);
      // VH draws are made whether or not the icon fits, so that this stream stays aligned.
      const bool drop = vh.bernoulli(config.p_drop_node);
      const bool has_rid = vh.bernoulli(config.p_rid);
      const auto kw = rid_keywords(cls);
      const auto& tail = kw[static_cast<std::size_t>(vh.uniform_int(0, static_cast<int>(kw.size()) - 1))];
      const char* view = kIconViewClasses[vh.uniform_int(0, 3)];
      const int pad = vh.uniform_int(0, 2);
      const bool extra = vh.bernoulli(config.p_extra_node);
      const auto extra_cls = classes[static_cast<std::size_t>(vh.uniform_int(0, static_cast<int>(classes.size()) - 1))];
      const bool extra_rid = vh.bernoulli(config.p_rid);
      const int extra_size = vh.uniform_int(config.icon_size_min, config.icon_size_max);

      const bool button = look.bernoulli(0.3);
      const auto dark = rgb(look, 0, 90);
      const auto fill = rgb(look, 30, 150);
      const auto light = rgb(look, 215, 255);
      const double thick = look.uniform(0.85, 1.2);
      const double scale = look.uniform(0.8, 1.0);
      if (!box) continue;

      if (button) {
        const int r = size / 2;
        const double cx = box->x0 + size / 2.0, cy = box->y0 + size / 2.0;
        for (int y = box->y0; y < box->y1; ++y) {
          for (int x = box->x0; x < box->x1; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy <= r * r) {
              for (int c = 0; c < 3; ++c) s.pixels.at(y, x, c) = fill[c];
            }
          }
        }
      }
      const int gsize = std::max(6, static_cast<int>(std::lround(size * scale * (button ? 0.75 : 1.0))));
      const int off = (size - gsize) / 2;
      const int my = (box->y0 + box->y1) / 2, mx = (box->x0 + box->x1) / 2;
      const int under = s.pixels.at(my, mx, 0) + s.pixels.at(my, mx, 1) + s.pixels.at(my, mx, 2);
      const std::array<std::uint8_t, 3> ink = button ? std::array<std::uint8_t, 3>{250, 250, 250}
                                              : (under < 3 * 128 ? light : dark);
      draw_glyph(s.pixels, config.glyph_class(cls), box->x0 + off, box->y0 + off, gsize, ink, thick);

      IconAnnotation ann;
      ann.bbox = {static_cast<double>(box->x0) / cw, static_cast<double>(box->y0) / ch,
                  static_cast<double>(box->x1) / cw, static_cast<double>(box->y1) / ch};
      ann.label = cls;
      ann.vh_matched = !drop;
      s.annotations.push_back(ann);
      if (!drop) {
        const PxBox lb{std::max(0, box->x0 - pad), std::max(0, box->y0 - pad), std::min(cw, box->x1 + pad),
                       std::min(ch, box->y1 + pad)};
        leaves.push_back({lb, view, has_rid ? std::optional<std::string>(tail) : std::nullopt, cls});
      }
      if (extra) {
        if (auto eb = place(layout, extra_size, extra_size, config, taken)) {
          const auto ekw = rid_keywords(extra_cls);
          leaves.push_back({*eb, "android.view.View",
                            extra_rid ? std::optional<std::string>(ekw.front()) : std::nullopt, IconClass::kOther});
        }
      }
    }

    // Text-like rows.
    const auto other_kw = rid_keywords(IconClass::kOther);
    const int n_text = layout.uniform_int(1, 4);
    for (int k = 0; k < n_text; ++k) {
      const int h = layout.uniform_int(5, 8);
      const int w = layout.uniform_int(40, 150);
      const auto box = place(layout, w, h, config, taken);
      const auto ink = rgb(look, 40, 140);
      const bool has_rid = vh.bernoulli(config.p_rid);
      const int kw = vh.uniform_int(0, 5);
      if (!box) continue;
      int x = box->x0;
      while (x < box->x1 - 3) {
        const int word = std::min(layout.uniform_int(5, 22), box->x1 - x);
        fill_rect(s.pixels, x, box->y0 + 1, x + word, box->y1 - 1, ink);
        x += word + layout.uniform_int(3, 5);
      }
      leaves.push_back({*box, "android.widget.TextView",
                        has_rid ? std::optional<std::string>(other_kw[static_cast<std::size_t>(kw)]) : std::nullopt});
    }

    // Flag-like images: striped rectangles, some of them close to a menu glyph.
    const int n_flags = layout.uniform_int(0, 2);
    for (int k = 0; k < n_flags; ++k) {
      const int w = layout.uniform_int(18, 30);
      const int h = layout.uniform_int(12, 20);
      const auto box = place(layout, w, h, config, taken);
      const bool horizontal = look.bernoulli(0.5);
      std::array<std::array<std::uint8_t, 3>, 3> stripes{rgb(look, 0, 255), rgb(look, 0, 255), rgb(look, 0, 255)};
      const bool has_rid = vh.bernoulli(config.p_rid);
      const int kw = vh.uniform_int(6, 9);
      if (!box) continue;
      for (int st = 0; st < 3; ++st) {
        if (horizontal) {
          fill_rect(s.pixels, box->x0, box->y0 + st * h / 3, box->x1, box->y0 + (st + 1) * h / 3, stripes[st]);
        } else {
          fill_rect(s.pixels, box->x0 + st * w / 3, box->y0, box->x0 + (st + 1) * w / 3, box->y1, stripes[st]);
        }
      }
      leaves.push_back({*box, "android.widget.ImageView",
                        has_rid ? std::optional<std::string>(other_kw[static_cast<std::size_t>(kw)]) : std::nullopt});
    }

    // Leaves sorted top-to-bottom, left-to-right, as a layout pass would emit them.
    std::stable_sort(leaves.begin(), leaves.end(), [](const LeafSpec& a, const LeafSpec& b) {
      return std::pair{a.box.y0, a.box.x0} < std::pair{b.box.y0, b.box.x0};
    });
    const int sc = config.vh_scale;
    s.vh_root = {0, 0, static_cast<long>(cw) * sc, static_cast<long>(ch) * sc};
    GenSampleRecord rec;
    rec.id = s.id;
    const std::string package = "com.synth.app" + std::to_string(i % 37);
    for (const auto& l : leaves) {
      VHNode n;
      n.class_name = l.class_name;
      if (l.rid_tail) n.resource_id = package + ":id/" + *l.rid_tail;
      n.bounds = {static_cast<double>(l.box.x0 * sc) / (cw * sc), static_cast<double>(l.box.y0 * sc) / (ch * sc),
                  static_cast<double>(l.box.x1 * sc) / (cw * sc), static_cast<double>(l.box.y1 * sc) / (ch * sc)};
      s.vh_leaves.push_back(std::move(n));
      ++rec.num_leaves;
      if (is_icon(l.owner)) {
        ++out.manifest.icon_nodes;
        if (l.rid_tail) ++out.manifest.icon_nodes_with_rid;
      }
      if (l.rid_tail) {
        ++rec.rid_leaves;
        out.manifest.rid_counts.add(l.owner, *l.rid_tail);
      }
    }
    rec.icons = s.annotations;
    for (const auto& a : s.annotations) ++out.manifest.class_counts[index_of(a.label)];
    out.manifest.samples.push_back(std::move(rec));
    out.samples.push_back(std::move(s));
  }
  return out;
}

GenManifest generate(const GenConfig& config, const std::filesystem::path& dir) {
  auto corpus = generate_samples(config);
  write_corpus(dir, corpus.samples);
  std::ofstream m(CorpusPaths{dir}.manifest());
  if (!m) throw IoError("cannot write " + CorpusPaths{dir}.manifest().string());
  m << corpus.manifest.to_json().dump(2) << "\n";
  if (!m) throw IoError("write failed: " + CorpusPaths{dir}.manifest().string());
  return std::move(corpus.manifest);
}

}  // namespace iconann
