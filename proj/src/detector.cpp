#include "iconann/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "iconann/checkpoint.hpp"
#include "iconann/error.hpp"

namespace iconann {

using nlohmann::json;

void DetectorConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("detector config: " + m); };
  if (stride != 4) fail("stride must be 4");
  if (input_height <= 0 || input_width <= 0 || input_height % 8 || input_width % 8) {
    fail("input dims must be positive multiples of 8");
  }
  if (conv1_channels <= 0 || conv2_channels <= 0 || conv3_channels <= 0 || head_channels <= 0) {
    fail("channel widths must be positive");
  }
  if (num_classes <= 0) fail("num_classes must be positive");
  if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold must lie in [0,1]");
  if (max_detections <= 0) fail("max_detections must be positive");
  if (text_dim <= 0 || fusion_hidden < 0) fail("bad text/fusion widths");
  if (size_loss_weight < 0 || offset_loss_weight < 0) fail("loss weights must be non-negative");
}

DetectorConfig DetectorConfig::desk_scale() {
  DetectorConfig c;
  c.input_height = 192;
  c.input_width = 384;
  c.fusion_hidden = 32;
  return c;
}

json DetectorConfig::to_json() const {
  return {{"input_height", input_height},
          {"input_width", input_width},
          {"stride", stride},
          {"conv1_channels", conv1_channels},
          {"conv2_channels", conv2_channels},
          {"conv3_channels", conv3_channels},
          {"head_channels", head_channels},
          {"num_classes", num_classes},
          {"use_vh", use_vh},
          {"threshold", threshold},
          {"max_detections", max_detections},
          {"cross_class_suppression", cross_class_suppression},
          {"text_dim", text_dim},
          {"text_seed", text_seed},
          {"fusion_hidden", fusion_hidden},
          {"fusion_normalization",
           fusion_normalization == FusionNormalization::kAsWritten ? "as_written" : "coverage_mean"},
          {"size_loss_weight", size_loss_weight},
          {"offset_loss_weight", offset_loss_weight}};
}

DetectorConfig DetectorConfig::from_json(const json& j) {
  DetectorConfig c;
  c.input_height = j.value("input_height", c.input_height);
  c.input_width = j.value("input_width", c.input_width);
  c.stride = j.value("stride", c.stride);
  c.conv1_channels = j.value("conv1_channels", c.conv1_channels);
  c.conv2_channels = j.value("conv2_channels", c.conv2_channels);
  c.conv3_channels = j.value("conv3_channels", c.conv3_channels);
  c.head_channels = j.value("head_channels", c.head_channels);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.use_vh = j.value("use_vh", c.use_vh);
  c.threshold = j.value("threshold", c.threshold);
  c.max_detections = j.value("max_detections", c.max_detections);
  c.cross_class_suppression = j.value("cross_class_suppression", c.cross_class_suppression);
  c.text_dim = j.value("text_dim", c.text_dim);
  c.text_seed = j.value("text_seed", c.text_seed);
  c.fusion_hidden = j.value("fusion_hidden", c.fusion_hidden);
  const auto norm = j.value("fusion_normalization", std::string("as_written"));
  if (norm == "as_written") {
    c.fusion_normalization = FusionNormalization::kAsWritten;
  } else if (norm == "coverage_mean") {
    c.fusion_normalization = FusionNormalization::kCoverageMean;
  } else {
    throw std::invalid_argument("detector config: unknown fusion_normalization '" + norm + "'");
  }
  c.size_loss_weight = j.value("size_loss_weight", c.size_loss_weight);
  c.offset_loss_weight = j.value("offset_loss_weight", c.offset_loss_weight);
  c.validate();
  return c;
}

double gaussian_sigma(double width_cells, double height_cells) {
  return std::max(1.0, std::min(width_cells, height_cells) / 6.0);
}

std::pair<int, double> quantize_center(double normalized, int cells) {
  const double v = normalized * cells;
  const int j = std::clamp(static_cast<int>(std::floor(v)), 0, cells - 1);
  return {j, v - (j + 0.5)};
}

DetectionTargets encode_targets(const std::vector<IconAnnotation>& annotations, const DetectorConfig& config) {
  const int h = config.output_height();
  const int w = config.output_width();
  DetectionTargets t;
  t.heatmap = FeatureMap<double>(config.num_classes, h, w);
  t.size = FeatureMap<double>(2, h, w);
  t.offset = FeatureMap<double>(2, h, w);
  t.mask = FeatureMap<double>(1, h, w);
  for (const auto& a : annotations) {
    const int cls = static_cast<int>(index_of(a.label));
    if (cls >= config.num_classes) throw std::invalid_argument("encode_targets: label outside configured classes");
    const auto [col, ox] = quantize_center(a.bbox.center_x(), w);
    const auto [row, oy] = quantize_center(a.bbox.center_y(), h);
    CenterTarget ct{cls, row, col, a.bbox.width() * w, a.bbox.height() * h, ox, oy};
    t.centers.push_back(ct);

    const double sigma = gaussian_sigma(ct.size_w, ct.size_h);
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    for (int y = std::max(0, row - radius); y <= std::min(h - 1, row + radius); ++y) {
      for (int x = std::max(0, col - radius); x <= std::min(w - 1, col + radius); ++x) {
        const double d2 = static_cast<double>((y - row) * (y - row) + (x - col) * (x - col));
        const double v = (y == row && x == col) ? 1.0 : std::exp(-d2 / (2.0 * sigma * sigma));
        double& cell = t.heatmap(cls, y, x);
        cell = std::max(cell, v);
      }
    }
    t.size(0, row, col) = ct.size_w;
    t.size(1, row, col) = ct.size_h;
    t.offset(0, row, col) = ox;
    t.offset(1, row, col) = oy;
    t.mask(0, row, col) = 1.0;
  }
  return t;
}

DetectorOutput output_from_targets(const DetectionTargets& t) { return {t.heatmap, t.size, t.offset}; }

std::vector<Detection> decode(const DetectorOutput& out, const DetectorConfig& config) {
  return decode(out, config, config.threshold);
}

namespace {
// Smallest box side decode emits, in normalized units.
constexpr double kMinExtent = 1e-3;
}  // namespace

std::vector<Detection> decode(const DetectorOutput& out, const DetectorConfig& config, double threshold) {
  const int nc = out.heatmap.channels();
  const int h = out.heatmap.height();
  const int w = out.heatmap.width();
  struct Peak {
    double score;
    int row, col, cls;
  };
  std::vector<Peak> peaks;
  for (int c = 0; c < nc; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = out.heatmap(c, y, x);
        if (!(v >= threshold)) continue;
        bool is_max = true;
        bool above_some = false;
        bool has_neighbour = false;
        for (int dy = -1; dy <= 1 && is_max; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!dy && !dx) continue;
            const int yy = y + dy;
            const int xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            has_neighbour = true;
            const double n = out.heatmap(c, yy, xx);
            if (n > v) {
              is_max = false;
              break;
            }
            above_some |= v > n;
          }
        }
        // A flat plateau has no peak; a lone cell on a 1x1 grid does.
        if (is_max && (above_some || !has_neighbour)) peaks.push_back({v, y, x, c});
      }
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.row != b.row) return a.row < b.row;
    if (a.col != b.col) return a.col < b.col;
    return a.cls < b.cls;
  });

  auto axis = [](double center, double extent) {
    extent = std::max(extent, kMinExtent);
    double lo = std::clamp(center - extent / 2, 0.0, 1.0);
    double hi = std::clamp(center + extent / 2, 0.0, 1.0);
    if (hi - lo < kMinExtent) {
      if (hi >= 1.0) {
        lo = 1.0 - kMinExtent;
      } else {
        hi = std::min(1.0, lo + kMinExtent);
        lo = hi - kMinExtent;
      }
    }
    return std::pair{lo, hi};
  };
  std::vector<Detection> dets;
  for (const auto& p : peaks) {
    if (dets.size() >= static_cast<std::size_t>(config.max_detections)) break;
    const double cx = std::clamp((p.col + 0.5 + out.offset(0, p.row, p.col)) / w, 0.0, 1.0);
    const double cy = std::clamp((p.row + 0.5 + out.offset(1, p.row, p.col)) / h, 0.0, 1.0);
    // Class-agnostic suppression: a weaker peak centred inside a kept box is the same icon.
    if (config.cross_class_suppression &&
        std::any_of(dets.begin(), dets.end(), [&](const Detection& d) { return d.bbox.contains(cx, cy); })) {
      continue;
    }
    const auto [x0, x1] = axis(cx, out.size(0, p.row, p.col) / w);
    const auto [y0, y1] = axis(cy, out.size(1, p.row, p.col) / h);
    dets.push_back({{x0, y0, x1, y1}, icon_class_at(static_cast<std::size_t>(p.cls)), p.score});
  }
  return dets;
}

LossTerms loss(const DetectorOutput& out, const DetectionTargets& targets, const DetectorConfig& config) {
  if (!out.heatmap.same_shape(targets.heatmap) || !out.size.same_shape(targets.size) ||
      !out.offset.same_shape(targets.offset)) {
    throw ShapeError("loss: output and target shapes differ");
  }
  std::size_t positives = 0;
  for (double v : targets.heatmap.values()) positives += (v == 1.0);
  std::size_t centers = 0;
  for (double v : targets.mask.values()) centers += (v > 0.0);
  const double pos_norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, positives));
  const double reg_norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, centers));

  LossTerms lt;
  const auto& p = out.heatmap.values();
  const auto& y = targets.heatmap.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = std::clamp(p[i], 1e-12, 1.0 - 1e-12);
    if (y[i] == 1.0) {
      lt.heatmap -= (1 - pi) * (1 - pi) * std::log(pi) * pos_norm;
    } else {
      const double om = 1.0 - y[i];
      lt.heatmap -= om * om * om * om * pi * pi * std::log(1 - pi) * pos_norm;
    }
  }
  const std::size_t plane = targets.mask.plane();
  const double* m = targets.mask.channel(0);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      if (!(m[i] > 0.0)) continue;
      lt.size += std::abs(out.size.channel(c)[i] - targets.size.channel(c)[i]) * reg_norm;
      lt.offset += std::abs(out.offset.channel(c)[i] - targets.offset.channel(c)[i]) * reg_norm;
    }
  }
  lt.total = lt.heatmap + config.size_loss_weight * lt.size + config.offset_loss_weight * lt.offset;
  return lt;
}

std::vector<NodeEmbedding> embed_leaves(const std::vector<VHNode>& leaves, const TextEncoder& encoder) {
  std::vector<NodeEmbedding> out;
  out.reserve(leaves.size());
  for (const auto& leaf : leaves) out.push_back({encoder.encode(node_tokens(leaf)), leaf.bounds});
  return out;
}

DetectorModel::DetectorModel(const DetectorConfig& config)
    : net_(config), encoder_(static_cast<std::size_t>(config.text_dim), config.text_seed) {}

FeatureMap<float> DetectorModel::vh_map(const std::vector<VHNode>& leaves) const {
  const auto& c = config();
  return aggregate(embed_leaves(leaves, encoder_), c.output_height(), c.output_width(), c.text_dim,
                   c.fusion_normalization)
      .cast<float>();
}

DetectorOutput DetectorModel::forward(const Image& pixels, const std::vector<VHNode>& vh_leaves) const {
  const auto& c = config();
  const auto input = image_to_input<float>(pixels, c.input_height, c.input_width);
  DetectorNet<float>::Workspace ws;
  if (c.use_vh) {
    const auto g = vh_map(vh_leaves);
    net_.forward(input, &g, ws);
  } else {
    net_.forward(input, nullptr, ws);
  }
  return activate(ws.head, c.num_classes);
}

std::vector<Detection> DetectorModel::predict(const UISample& sample) const {
  return predict(sample, config().threshold);
}

std::vector<Detection> DetectorModel::predict(const UISample& sample, double threshold) const {
  return decode(forward(sample.pixels, sample.vh_leaves), config(), threshold);
}

void DetectorModel::save(const std::filesystem::path& path) const {
  save_checkpoint(path, {model_type(), config().to_json(), json::object(), net_.params()});
}

DetectorModel DetectorModel::load(const std::filesystem::path& path) {
  auto ck = load_checkpoint(path);
  if (ck.model_type != "detector-vh" && ck.model_type != "detector-image") {
    throw CheckpointError(path.string() + ": model type '" + ck.model_type + "' is not a detector");
  }
  DetectorConfig cfg;
  try {
    cfg = DetectorConfig::from_json(ck.config);
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if ((ck.model_type == "detector-vh") != cfg.use_vh) {
    throw CheckpointError(path.string() + ": model type disagrees with config.use_vh");
  }
  DetectorModel m(cfg);
  try {
    m.net_.set_params(std::move(ck.params));
  } catch (const ShapeError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return m;
}

DetectorOutput forward(const Image& pixels, const std::vector<VHNode>& vh_leaves, const DetectorModel& model) {
  return model.forward(pixels, vh_leaves);
}

json EpochLog::to_json() const {
  return {{"epoch", epoch},
          {"steps", steps},
          {"loss", mean_loss.total},
          {"heatmap_loss", mean_loss.heatmap},
          {"size_loss", mean_loss.size},
          {"offset_loss", mean_loss.offset}};
}

namespace {

/// Sum of token vectors and token count, so that a leaf's embedding can be rebuilt
/// cheaply when its resource-id is substituted.
struct TokenSum {
  std::vector<double> sum;
  std::size_t count = 0;
};

class TokenSumCache {
 public:
  explicit TokenSumCache(const HashedTextEncoder& enc) : enc_(enc) {}

  const TokenSum& get(const std::string& raw) {
    auto it = memo_.find(raw);
    if (it != memo_.end()) return it->second;
    TokenSum s{std::vector<double>(enc_.dimension(), 0.0), 0};
    for (const auto& tok : tokenize(raw)) {
      const auto v = enc_.token_vector(tok);
      for (std::size_t k = 0; k < v.size(); ++k) s.sum[k] += v[k];
      ++s.count;
    }
    return memo_.emplace(raw, std::move(s)).first->second;
  }

 private:
  const HashedTextEncoder& enc_;
  std::unordered_map<std::string, TokenSum> memo_;
};

TextEmbedding combine(const TokenSum& a, const TokenSum& b) {
  TextEmbedding e(a.sum.size(), 0.0);
  const std::size_t n = a.count + b.count;
  if (n == 0) return e;
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = (a.sum[k] + b.sum[k]) / static_cast<double>(n);
  return e;
}

struct LeafText {
  std::string class_tail;
  std::optional<std::string> rid_tail;
  IconClass backs = IconClass::kOther;
  BoundingBox box;
};

}  // namespace

DetectorTrainResult train_detector(const std::vector<UISample>& corpus, const DetectorConfig& config,
                                   const DetectorTrainSettings& settings, std::uint64_t seed,
                                   const EpochCallback& on_epoch) {
  if (corpus.empty()) throw std::invalid_argument("train_detector: empty corpus");
  if (settings.epochs <= 0 || settings.batch_size <= 0) throw std::invalid_argument("train_detector: bad settings");
  const Rng root(seed);
  Rng init_rng = root.derive("init");
  Rng data_rng = root.derive("data");
  Rng sampling_rng = root.derive("sampling");

  DetectorModel model(config);
  auto& net = model.net();
  net.init(init_rng);
  const auto& cfg = model.config();
  const int oh = cfg.output_height();
  const int ow = cfg.output_width();

  // Per-sample inputs that do not change across epochs.
  std::vector<Image> images;
  images.reserve(corpus.size());
  for (const auto& s : corpus) {
    images.push_back((s.pixels.height() == cfg.input_height && s.pixels.width() == cfg.input_width)
                         ? s.pixels
                         : resize_bilinear(s.pixels, cfg.input_height, cfg.input_width));
  }
  std::vector<std::vector<LeafText>> leaf_text(corpus.size());
  std::vector<FeatureMap<float>> fixed_maps;
  ResourceIdDictionary dict;
  TokenSumCache cache(model.encoder());
  if (cfg.use_vh) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      for (const auto& leaf : corpus[i].vh_leaves) {
        LeafText lt;
        const auto attr = extract_text_attribute(leaf);
        lt.class_tail = attr.class_tail;
        if (leaf.resource_id) lt.rid_tail = attr.resource_id_tail;
        if (auto m = match_leaf_to_annotation(leaf.bounds, corpus[i].annotations)) {
          lt.backs = corpus[i].annotations[*m].label;
        }
        lt.box = leaf.bounds;
        leaf_text[i].push_back(std::move(lt));
      }
    }
    if (settings.rid_sampling) {
      dict = build_rid_dictionary(corpus);
    } else {
      fixed_maps.reserve(corpus.size());
      for (const auto& s : corpus) fixed_maps.push_back(model.vh_map(s.vh_leaves));
    }
  }
  static const std::string kEmpty;
  auto sampled_map = [&](std::size_t i) {
    std::vector<NodeEmbedding> nodes;
    nodes.reserve(leaf_text[i].size());
    for (const auto& lt : leaf_text[i]) {
      const std::string* rid = lt.rid_tail ? &*lt.rid_tail : &kEmpty;
      std::optional<std::string> drawn;
      if (!lt.rid_tail) {
        drawn = dict.sample(lt.backs, sampling_rng);
        if (drawn) rid = &*drawn;
      }
      nodes.push_back({combine(cache.get(lt.class_tail), cache.get(*rid)), lt.box});
    }
    return aggregate(nodes, oh, ow, cfg.text_dim, cfg.fusion_normalization).cast<float>();
  };

  const std::size_t n = corpus.size();
  const std::size_t batches = (n + settings.batch_size - 1) / settings.batch_size;
  long total_steps = static_cast<long>(batches) * settings.epochs;
  if (settings.max_steps > 0) total_steps = std::min(total_steps, settings.max_steps);

  nn::Adam<float> opt(net.params(), settings.adam);
  auto grads = net.params().zero_gradients();
  DetectorNet<float>::Workspace ws;
  FeatureMap<float> d_head;
  std::vector<std::size_t> order(n);
  long step = 0;
  std::vector<EpochLog> log;

  for (int epoch = 1; epoch <= settings.epochs && step < total_steps; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(data_rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    LossTerms sum;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches && step < total_steps; ++b) {
      nn::zero(grads);
      const std::size_t lo = b * settings.batch_size;
      const std::size_t hi = std::min(n, lo + settings.batch_size);
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = order[k];
        const auto input = image_to_input<float>(images[i], cfg.input_height, cfg.input_width);
        FeatureMap<float> sampled;
        const FeatureMap<float>* g = nullptr;
        if (cfg.use_vh) {
          if (settings.rid_sampling) {
            sampled = sampled_map(i);
            g = &sampled;
          } else {
            g = &fixed_maps[i];
          }
        }
        net.forward(input, g, ws);
        const auto targets = encode_targets(corpus[i].annotations, cfg);
        const auto lt = head_loss(ws.head, targets, cfg, &d_head);
        if (!std::isfinite(lt.total)) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(step + 1) + ", sample '" + corpus[i].id + "'");
        }
        net.backward(ws, d_head, grads);
        sum.heatmap += lt.heatmap;
        sum.size += lt.size;
        sum.offset += lt.offset;
        sum.total += lt.total;
        ++seen;
      }
      const double progress = total_steps > 1 ? static_cast<double>(step) / static_cast<double>(total_steps - 1) : 1.0;
      const double f = settings.final_lr_fraction;
      const double lr_scale = f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      opt.step(net.params(), grads, 1.0 / static_cast<double>(hi - lo), lr_scale);
      ++step;
    }
    if (!net.params().all_finite()) {
      throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch));
    }
    EpochLog e;
    e.epoch = epoch;
    e.steps = step;
    const double inv = seen ? 1.0 / static_cast<double>(seen) : 0.0;
    e.mean_loss = {sum.heatmap * inv, sum.size * inv, sum.offset * inv, sum.total * inv};
    log.push_back(e);
    if (settings.checkpoint_dir) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
      model.save(*settings.checkpoint_dir / name);
    }
    if (on_epoch) on_epoch(e);
  }
  return {std::move(model), std::move(log)};
}

template class DetectorNet<float>;
template class DetectorNet<double>;

}  // namespace iconann
