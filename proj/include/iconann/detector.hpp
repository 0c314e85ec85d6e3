#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "iconann/corpus.hpp"
#include "iconann/detection.hpp"
#include "iconann/feature_map.hpp"
#include "iconann/nn/layers.hpp"
#include "iconann/nn/params.hpp"
#include "iconann/textproc.hpp"
#include "iconann/vh_featmap.hpp"
#include "json.hpp"

namespace iconann {

struct DetectorConfig {
  int input_height = 384;
  int input_width = 768;
  /// Output stride. The backbone downsamples three times and upsamples once, so 4 is the
  /// only supported value; it is kept in the config so checkpoints record it.
  int stride = 4;
  int conv1_channels = 16;
  int conv2_channels = 32;
  int conv3_channels = 48;
  int head_channels = 32;
  int num_classes = static_cast<int>(kNumIconClasses);
  bool use_vh = false;
  double threshold = 0.2;
  int max_detections = 100;
  /// Drop a peak whose decoded centre lies inside the box of a stronger kept detection
  /// of any class.
  bool cross_class_suppression = true;

  int text_dim = 128;
  std::uint64_t text_seed = 0;
  /// Width of the first fusion layer; 0 means text_dim.
  int fusion_hidden = 0;
  FusionNormalization fusion_normalization = FusionNormalization::kAsWritten;

  double size_loss_weight = 0.1;
  double offset_loss_weight = 1.0;

  int output_height() const { return input_height / stride; }
  int output_width() const { return input_width / stride; }
  int fusion_width() const { return fusion_hidden > 0 ? fusion_hidden : text_dim; }
  /// Channels of the backbone output the VH map is fused into.
  int feature_channels() const { return conv2_channels; }
  int head_outputs() const { return num_classes + 4; }

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  /// Full-scale input (384 x 768) is the default; this is the quarter-area setting
  /// matched to the synthetic generator's 192 x 384 canvas, with a narrower fusion layer.
  static DetectorConfig desk_scale();

  nlohmann::json to_json() const;
  static DetectorConfig from_json(const nlohmann::json& j);
};

/// Ground-truth maps on the output grid.
struct CenterTarget {
  int cls = 0;
  int row = 0;
  int col = 0;
  double size_w = 0.0;  // grid cells
  double size_h = 0.0;
  double offset_x = 0.0;  // sub-cell correction
  double offset_y = 0.0;
};

struct DetectionTargets {
  FeatureMap<double> heatmap;  // classes x H x W
  FeatureMap<double> size;     // 2 x H x W (width, height), only at centers
  FeatureMap<double> offset;   // 2 x H x W (x, y), only at centers
  FeatureMap<double> mask;     // 1 x H x W, 1 at center cells
  std::vector<CenterTarget> centers;
};

/// Gaussian std-dev in cells for a box of the given extent.
double gaussian_sigma(double width_cells, double height_cells);

/// Center cell of a normalized coordinate on an n-cell axis and its offset, where cell
/// j's center sits at (j + 0.5) / n: an exactly centered point has offset 0.
std::pair<int, double> quantize_center(double normalized, int cells);

DetectionTargets encode_targets(const std::vector<IconAnnotation>& annotations, const DetectorConfig& config);

/// Activated head output.
struct DetectorOutput {
  FeatureMap<double> heatmap;  // classes x H x W, in (0,1)
  FeatureMap<double> size;     // 2 x H x W
  FeatureMap<double> offset;   // 2 x H x W
};

/// Builds a DetectorOutput that equals the targets (for round-trip checks).
DetectorOutput output_from_targets(const DetectionTargets& t);

/// Peaks of each class's 3x3 neighbourhood, scored by heatmap value, top
/// max_detections by descending score (ties by row, col, class), dropped below
/// config.threshold, optionally with cross-class suppression. A peak must be >= every neighbour and > at least one, so a flat
/// map (e.g. from an all-zero network) yields nothing.
std::vector<Detection> decode(const DetectorOutput& out, const DetectorConfig& config);
std::vector<Detection> decode(const DetectorOutput& out, const DetectorConfig& config, double threshold);

struct LossTerms {
  double heatmap = 0.0;
  double size = 0.0;
  double offset = 0.0;
  double total = 0.0;
};

/// Penalty-reduced focal loss (alpha 2, beta 4) on heatmap logits plus weighted L1 on
/// size and offset at center cells, all normalized by max(1, #centers). `head` holds
/// classes heatmap logits followed by size (w, h) and offset (x, y) channels. When
/// d_head is non-null it receives dLoss/dhead.
template <typename T>
LossTerms head_loss(const FeatureMap<T>& head, const DetectionTargets& targets, const DetectorConfig& config,
                    FeatureMap<T>* d_head = nullptr);

/// The same loss evaluated on an activated output (heatmap as probabilities).
LossTerms loss(const DetectorOutput& out, const DetectionTargets& targets, const DetectorConfig& config);

template <typename T>
DetectorOutput activate(const FeatureMap<T>& head, int num_classes);

/// Encoder-decoder backbone, optional VH fusion at the backbone output, and a shared
/// 3x3 head producing heatmap logits, size and offset.
template <typename T>
class DetectorNet {
 public:
  explicit DetectorNet(const DetectorConfig& config);

  const DetectorConfig& config() const { return config_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }
  void set_params(nn::ParamSet<T> p);

  void init(Rng& rng);

  struct Workspace {
    FeatureMap<T> a1, a2, a3, a4, up, a5, backbone, fused, h, head;
    std::vector<T> col1, col2, col3, col4, col5, col6, col7;
    FusionCache<T> fusion;
    bool used_vh = false;
  };

  /// `vh_map` is ignored unless config.use_vh; when use_vh is set and vh_map is null, an
  /// all-zero map is used. The result is ws.head.
  void forward(const FeatureMap<T>& input, const FeatureMap<T>* vh_map, Workspace& ws) const;

  /// Accumulates dLoss/dparams given dLoss/dhead.
  void backward(Workspace& ws, const FeatureMap<T>& d_head, nn::Gradients<T>& grads) const;

 private:
  DetectorConfig config_;
  nn::ParamSet<T> params_;
  nn::Conv2d conv1_, conv2_, conv3_, conv4_, conv5_, conv6_, conv7_;
  FusionLayer fusion_;
};

/// Screenshot -> normalized network input at the configured resolution.
template <typename T>
FeatureMap<T> image_to_input(const Image& img, int height, int width);

/// Leaf text embeddings with their boxes, ready for `aggregate`.
std::vector<NodeEmbedding> embed_leaves(const std::vector<VHNode>& leaves, const TextEncoder& encoder);

/// A trained (or freshly initialized) float detector with its text encoder.
class DetectorModel {
 public:
  explicit DetectorModel(const DetectorConfig& config);

  const DetectorConfig& config() const { return net_.config(); }
  DetectorNet<float>& net() { return net_; }
  const DetectorNet<float>& net() const { return net_; }
  const HashedTextEncoder& encoder() const { return encoder_; }

  FeatureMap<float> vh_map(const std::vector<VHNode>& leaves) const;

  /// Runs the network on one screenshot / VH pair.
  DetectorOutput forward(const Image& pixels, const std::vector<VHNode>& vh_leaves) const;

  std::vector<Detection> predict(const UISample& sample) const;
  std::vector<Detection> predict(const UISample& sample, double threshold) const;

  void save(const std::filesystem::path& path) const;
  static DetectorModel load(const std::filesystem::path& path);

  /// "detector-vh" or "detector-image".
  std::string model_type() const { return config().use_vh ? "detector-vh" : "detector-image"; }

 private:
  DetectorNet<float> net_;
  HashedTextEncoder encoder_;
};

/// Free-function form of DetectorModel::forward.
DetectorOutput forward(const Image& pixels, const std::vector<VHNode>& vh_leaves, const DetectorModel& model);

struct DetectorTrainSettings {
  int epochs = 30;
  int batch_size = 8;
  nn::AdamSettings adam{2e-3, 0.9, 0.999, 1e-8, 0.0};
  /// Cosine decay from the Adam learning rate to this fraction of it.
  double final_lr_fraction = 0.05;
  /// Substitute resource-ids sampled from the class dictionary for leaves without one.
  bool rid_sampling = false;
  /// Optional: per-epoch checkpoint directory.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Optional cap on optimizer steps (for overfit smoke tests); 0 = no cap.
  long max_steps = 0;
};

struct EpochLog {
  int epoch = 0;
  long steps = 0;
  LossTerms mean_loss;

  nlohmann::json to_json() const;
};

struct DetectorTrainResult {
  DetectorModel model;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains from a seed; all randomness comes from named sub-streams of `seed`
/// ("init", "data", "sampling"). Throws DivergenceError on a non-finite loss.
DetectorTrainResult train_detector(const std::vector<UISample>& corpus, const DetectorConfig& config,
                                   const DetectorTrainSettings& settings, std::uint64_t seed,
                                   const EpochCallback& on_epoch = {});

}  // namespace iconann

#include "iconann/detector_impl.hpp"
