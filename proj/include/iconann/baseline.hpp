#pragma once

#include <array>
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
#include "json.hpp"

namespace iconann {

/// One VH leaf proposed as a possible icon, with everything the classifier reads.
struct Candidate {
  VHNode node;
  Image crop;  // crop_size x crop_size RGB
  TextEmbedding text;
  std::array<double, 4> location{};  // x_min, y_min, x_max, y_max
};

struct BaselineConfig {
  /// Side of the square crop each leaf is rescaled to.
  int crop_size = 225;
  /// Output channels of the four stride-2 convolution blocks.
  std::array<int, 4> conv_channels{16, 32, 64, 64};
  /// The last block is average-pooled to pool_grid x pool_grid before flattening.
  int pool_grid = 2;
  /// Whether VH text enters the joint layer (false gives the image-only baseline).
  bool use_text = true;
  /// Recorded so a checkpoint knows how it was trained; has no effect at inference.
  bool rid_sampling = false;
  int text_dim = 128;
  std::uint64_t text_seed = 0;
  /// Optional minimum class probability; below it a candidate is treated as OTHER.
  std::optional<double> score_cutoff;

  static constexpr int kImageHidden1 = 1024;
  static constexpr int kImageHidden2 = 128;
  static constexpr int kJointWidth = 128;

  int image_features() const { return conv_channels[3] * pool_grid * pool_grid; }
  int joint_inputs() const { return kImageHidden2 + (use_text ? text_dim : 0) + 4; }

  /// "baseline-image", "baseline-vh" or "baseline-vh-sampling".
  std::string model_type() const;

  void validate() const;

  /// Small crops and narrow convolutions for CPU training on synthetic screens.
  static BaselineConfig desk_scale();

  nlohmann::json to_json() const;
  static BaselineConfig from_json(const nlohmann::json& j);
};

/// One candidate per leaf with a non-degenerate box, in leaf order. Degenerate leaves are
/// skipped and reported in `warnings`.
std::vector<Candidate> propose_candidates(const UISample& sample, const BaselineConfig& config,
                                          const TextEncoder& encoder, Warnings* warnings = nullptr);

/// Training label for a leaf: the class of the annotation it matches (center inside,
/// IOU >= 0.5), otherwise OTHER.
IconClass candidate_label(const VHNode& leaf, const std::vector<IconAnnotation>& annotations);

/// Crop encoder (four conv blocks, pooled and flattened), image MLP 1024 -> 128, then a
/// joint 128-wide layer over [image, text, location] and a 30-way output.
template <typename T>
class ClassifierNet {
 public:
  explicit ClassifierNet(const BaselineConfig& config);

  const BaselineConfig& config() const { return config_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }
  void set_params(nn::ParamSet<T> p);
  void init(Rng& rng);

  struct Workspace {
    std::array<FeatureMap<T>, 4> act;
    std::array<std::vector<T>, 4> col;
    FeatureMap<T> pooled;
    std::vector<T> flat, h1, h2, joint_in, joint, logits;
  };

  /// Logits over kNumClassifierLabels. `text` is ignored unless config.use_text.
  void forward(const FeatureMap<T>& crop, const std::vector<T>& text, const std::array<T, 4>& location,
               Workspace& ws) const;
  void backward(Workspace& ws, const FeatureMap<T>& crop, const std::vector<T>& d_logits,
                nn::Gradients<T>& grads) const;

 private:
  BaselineConfig config_;
  nn::ParamSet<T> params_;
  std::array<nn::Conv2d, 4> conv_;
  nn::Linear fc1_, fc2_, joint_, out_;
};

/// Softmax cross-entropy; writes dLoss/dlogits when d_logits is non-null.
template <typename T>
double cross_entropy(const std::vector<T>& logits, std::size_t label, std::vector<T>* d_logits = nullptr);

std::vector<double> softmax(const std::vector<double>& logits);

template <typename T>
FeatureMap<T> crop_to_input(const Image& crop);

class BaselineModel {
 public:
  explicit BaselineModel(const BaselineConfig& config);

  const BaselineConfig& config() const { return net_.config(); }
  ClassifierNet<float>& net() { return net_; }
  const ClassifierNet<float>& net() const { return net_; }
  const HashedTextEncoder& encoder() const { return encoder_; }

  /// Probabilities over the 29 classes followed by OTHER.
  std::vector<double> classify(const Candidate& c) const;

  /// Every candidate whose most probable label is not OTHER (and, with a cutoff, whose
  /// probability reaches it) becomes a Detection over the leaf's box.
  std::vector<Detection> predict_sample(const UISample& sample) const;

  void save(const std::filesystem::path& path) const;
  static BaselineModel load(const std::filesystem::path& path);
  std::string model_type() const { return config().model_type(); }

 private:
  ClassifierNet<float> net_;
  HashedTextEncoder encoder_;
};

struct BaselineTrainSettings {
  int epochs = 12;
  int batch_size = 32;
  nn::AdamSettings adam{3e-3, 0.9, 0.999, 1e-8, 0.0};
  double final_lr_fraction = 0.05;
  std::optional<std::filesystem::path> checkpoint_dir;
  long max_steps = 0;
};

struct BaselineEpochLog {
  int epoch = 0;
  long steps = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;

  nlohmann::json to_json() const;
};

struct BaselineTrainResult {
  BaselineModel model;
  std::vector<BaselineEpochLog> log;
};

/// Trains on every candidate of every sample. When config.rid_sampling is set, a
/// candidate without a resource-id gets one drawn from its label's dictionary each
/// epoch. Randomness comes from the "init", "data" and "sampling" sub-streams of seed.
BaselineTrainResult train_baseline(const std::vector<UISample>& corpus, const BaselineConfig& config,
                                   const BaselineTrainSettings& settings, std::uint64_t seed,
                                   const std::function<void(const BaselineEpochLog&)>& on_epoch = {});

}  // namespace iconann

#include "iconann/baseline_impl.hpp"
