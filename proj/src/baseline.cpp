#include "iconann/baseline.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "iconann/checkpoint.hpp"
#include "iconann/error.hpp"

namespace iconann {

using nlohmann::json;

std::string BaselineConfig::model_type() const {
  if (!use_text) return "baseline-image";
  return rid_sampling ? "baseline-vh-sampling" : "baseline-vh";
}

void BaselineConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("baseline config: " + m); };
  if (crop_size < 16) fail("crop_size must be at least 16");
  for (int c : conv_channels) {
    if (c <= 0) fail("conv channels must be positive");
  }
  int side = crop_size;
  for (int b = 0; b < 4; ++b) side = (side - 1) / 2 + 1;
  if (pool_grid <= 0 || pool_grid > side) fail("pool_grid exceeds the encoder's output grid");
  if (text_dim <= 0) fail("text_dim must be positive");
  if (score_cutoff && !(*score_cutoff >= 0.0 && *score_cutoff <= 1.0)) fail("score_cutoff must lie in [0,1]");
}

BaselineConfig BaselineConfig::desk_scale() {
  BaselineConfig c;
  c.crop_size = 32;
  c.conv_channels = {16, 32, 48, 48};
  return c;
}

json BaselineConfig::to_json() const {
  json j = {{"crop_size", crop_size},       {"conv_channels", conv_channels}, {"pool_grid", pool_grid},
            {"use_text", use_text},         {"rid_sampling", rid_sampling},   {"text_dim", text_dim},
            {"text_seed", text_seed},       {"score_cutoff", nullptr}};
  if (score_cutoff) j["score_cutoff"] = *score_cutoff;
  return j;
}

BaselineConfig BaselineConfig::from_json(const json& j) {
  BaselineConfig c;
  c.crop_size = j.value("crop_size", c.crop_size);
  if (j.contains("conv_channels")) c.conv_channels = j.at("conv_channels").get<std::array<int, 4>>();
  c.pool_grid = j.value("pool_grid", c.pool_grid);
  c.use_text = j.value("use_text", c.use_text);
  c.rid_sampling = j.value("rid_sampling", c.rid_sampling);
  c.text_dim = j.value("text_dim", c.text_dim);
  c.text_seed = j.value("text_seed", c.text_seed);
  if (j.contains("score_cutoff") && !j.at("score_cutoff").is_null()) c.score_cutoff = j.at("score_cutoff").get<double>();
  c.validate();
  return c;
}

std::vector<Candidate> propose_candidates(const UISample& sample, const BaselineConfig& config,
                                          const TextEncoder& encoder, Warnings* warnings) {
  std::vector<Candidate> out;
  out.reserve(sample.vh_leaves.size());
  for (std::size_t i = 0; i < sample.vh_leaves.size(); ++i) {
    const auto& leaf = sample.vh_leaves[i];
    if (!leaf.bounds.valid()) {
      if (warnings) warnings->push_back(sample.id + ": leaf " + std::to_string(i) + " has a degenerate box, skipped");
      continue;
    }
    Candidate c;
    c.node = leaf;
    c.crop = crop_resize(sample.pixels, leaf.bounds, config.crop_size, config.crop_size);
    c.text = encoder.encode(node_tokens(leaf));
    c.location = leaf.bounds.as_array();
    out.push_back(std::move(c));
  }
  return out;
}

IconClass candidate_label(const VHNode& leaf, const std::vector<IconAnnotation>& annotations) {
  const auto m = match_leaf_to_annotation(leaf.bounds, annotations);
  return m ? annotations[*m].label : IconClass::kOther;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) z += (p[k] = std::exp(logits[k] - mx));
  for (auto& v : p) v /= z;
  return p;
}

namespace {

std::array<float, 4> location_of(const std::array<double, 4>& a) {
  return {static_cast<float>(a[0]), static_cast<float>(a[1]), static_cast<float>(a[2]), static_cast<float>(a[3])};
}

std::vector<float> to_float(const TextEmbedding& t) { return {t.begin(), t.end()}; }

}  // namespace

BaselineModel::BaselineModel(const BaselineConfig& config)
    : net_(config), encoder_(static_cast<std::size_t>(config.text_dim), config.text_seed) {}

std::vector<double> BaselineModel::classify(const Candidate& c) const {
  ClassifierNet<float>::Workspace ws;
  net_.forward(crop_to_input<float>(c.crop), to_float(c.text), location_of(c.location), ws);
  return softmax(std::vector<double>(ws.logits.begin(), ws.logits.end()));
}

std::vector<Detection> BaselineModel::predict_sample(const UISample& sample) const {
  std::vector<Detection> dets;
  const auto other = static_cast<std::size_t>(index_of(IconClass::kOther));
  for (const auto& c : propose_candidates(sample, config(), encoder_)) {
    const auto p = classify(c);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    if (best == other) continue;
    if (config().score_cutoff && p[best] < *config().score_cutoff) continue;
    dets.push_back({c.node.bounds, icon_class_at(best), p[best]});
  }
  return dets;
}

void BaselineModel::save(const std::filesystem::path& path) const {
  save_checkpoint(path, {model_type(), config().to_json(), json::object(), net_.params()});
}

BaselineModel BaselineModel::load(const std::filesystem::path& path) {
  auto ck = load_checkpoint(path);
  if (ck.model_type.rfind("baseline-", 0) != 0) {
    throw CheckpointError(path.string() + ": model type '" + ck.model_type + "' is not a baseline");
  }
  BaselineConfig cfg;
  try {
    cfg = BaselineConfig::from_json(ck.config);
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if (cfg.model_type() != ck.model_type) throw CheckpointError(path.string() + ": model type disagrees with config");
  BaselineModel m(cfg);
  try {
    m.net_.set_params(std::move(ck.params));
  } catch (const ShapeError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return m;
}

json BaselineEpochLog::to_json() const {
  return {{"epoch", epoch}, {"steps", steps}, {"loss", mean_loss}, {"accuracy", accuracy}};
}

BaselineTrainResult train_baseline(const std::vector<UISample>& corpus, const BaselineConfig& config,
                                   const BaselineTrainSettings& settings, std::uint64_t seed,
                                   const std::function<void(const BaselineEpochLog&)>& on_epoch) {
  if (corpus.empty()) throw std::invalid_argument("train_baseline: empty corpus");
  if (settings.epochs <= 0 || settings.batch_size <= 0) throw std::invalid_argument("train_baseline: bad settings");
  const Rng root(seed);
  Rng init_rng = root.derive("init");
  Rng data_rng = root.derive("data");
  Rng sampling_rng = root.derive("sampling");

  BaselineModel model(config);
  auto& net = model.net();
  net.init(init_rng);
  const auto& cfg = model.config();
  const auto& enc = model.encoder();

  struct Item {
    FeatureMap<float> crop;
    std::vector<float> text;
    std::array<float, 4> location;
    std::size_t label;
    std::string class_name;
    bool has_rid;
  };
  std::vector<Item> items;
  for (const auto& s : corpus) {
    for (auto& c : propose_candidates(s, cfg, enc)) {
      const auto label = candidate_label(c.node, s.annotations);
      items.push_back({crop_to_input<float>(c.crop), to_float(c.text), location_of(c.location), static_cast<std::size_t>(index_of(label)),
                       c.node.class_name, c.node.resource_id.has_value()});
    }
  }
  if (items.empty()) throw std::invalid_argument("train_baseline: corpus has no candidates");
  ResourceIdDictionary dict;
  if (cfg.use_text && cfg.rid_sampling) dict = build_rid_dictionary(corpus);

  const std::size_t n = items.size();
  const std::size_t batches = (n + settings.batch_size - 1) / settings.batch_size;
  long total_steps = static_cast<long>(batches) * settings.epochs;
  if (settings.max_steps > 0) total_steps = std::min(total_steps, settings.max_steps);

  nn::Adam<float> opt(net.params(), settings.adam);
  auto grads = net.params().zero_gradients();
  ClassifierNet<float>::Workspace ws;
  std::vector<float> d_logits;
  std::vector<std::size_t> order(n);
  std::vector<BaselineEpochLog> log;
  long step = 0;

  for (int epoch = 1; epoch <= settings.epochs && step < total_steps; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(data_rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t b = 0; b < batches && step < total_steps; ++b) {
      nn::zero(grads);
      const std::size_t lo = b * settings.batch_size;
      const std::size_t hi = std::min(n, lo + settings.batch_size);
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& it = items[order[k]];
        std::vector<float> text;
        const std::vector<float>* t = &it.text;
        if (cfg.use_text && cfg.rid_sampling && !it.has_rid) {
          if (auto rid = dict.sample(icon_class_at(it.label), sampling_rng)) {
            text = to_float(enc.encode(node_tokens(it.class_name, *rid)));
            t = &text;
          }
        }
        net.forward(it.crop, *t, it.location, ws);
        const double l = cross_entropy(ws.logits, it.label, &d_logits);
        if (!std::isfinite(l)) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(step + 1));
        }
        net.backward(ws, it.crop, d_logits, grads);
        loss_sum += l;
        correct += static_cast<std::size_t>(std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin()) ==
                   it.label;
        ++seen;
      }
      const double progress = total_steps > 1 ? static_cast<double>(step) / static_cast<double>(total_steps - 1) : 1.0;
      const double f = settings.final_lr_fraction;
      opt.step(net.params(), grads, 1.0 / static_cast<double>(hi - lo),
               f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
      ++step;
    }
    if (!net.params().all_finite()) throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch));
    BaselineEpochLog e{epoch, step, seen ? loss_sum / static_cast<double>(seen) : 0.0,
                       seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0};
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

template class ClassifierNet<float>;
template class ClassifierNet<double>;

}  // namespace iconann
