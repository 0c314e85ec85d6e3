#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "checks.hpp"
#include "iconann/checkpoint.hpp"
#include "iconann/detector.hpp"
#include "iconann/synthgen.hpp"

using namespace iconann;
namespace fs = std::filesystem;

namespace {

DetectorConfig grid_16x32() {
  DetectorConfig c;
  c.input_height = 64;
  c.input_width = 128;
  return c;
}

DetectorConfig small_net() {
  DetectorConfig c = DetectorConfig::desk_scale();
  c.input_height = 64;
  c.input_width = 128;
  c.conv1_channels = 8;
  c.conv2_channels = 16;
  c.conv3_channels = 16;
  c.head_channels = 16;
  return c;
}

std::vector<UISample> tiny_corpus(int n, std::uint64_t seed) {
  GenConfig g;
  g.n_samples = n;
  g.seed = seed;
  g.canvas_height = 64;
  g.canvas_width = 128;
  g.icons_min = 1;
  g.icons_max = 3;
  g.icon_size_min = 12;
  g.icon_size_max = 18;
  return generate_samples(g).samples;
}

DetectorOutput flat_output(const DetectorConfig& c, double value) {
  const int h = c.output_height(), w = c.output_width();
  return {FeatureMap<double>(c.num_classes, h, w, value), FeatureMap<double>(2, h, w, 4.0),
          FeatureMap<double>(2, h, w)};
}

}  // namespace

TEST(Targets, NoAnnotations) {
  const auto t = encode_targets({}, grid_16x32());
  for (double v : t.heatmap.values()) EXPECT_EQ(v, 0.0);
  for (double v : t.mask.values()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(t.centers.empty());
}

TEST(Targets, CenteredIconHasZeroOffset) {
  // Cell (5, 9) on the 16 x 32 grid has its center at ((9 + 0.5) / 32, (5 + 0.5) / 16).
  const double cx = 9.5 / 32, cy = 5.5 / 16;
  const auto t = encode_targets({{{cx - 0.05, cy - 0.1, cx + 0.05, cy + 0.1}, IconClass::kMenu, true}}, grid_16x32());
  EXPECT_EQ(t.heatmap(index_of(IconClass::kMenu), 5, 9), 1.0);
  EXPECT_NEAR(t.offset(0, 5, 9), 0.0, 1e-12);
  EXPECT_NEAR(t.offset(1, 5, 9), 0.0, 1e-12);
  EXPECT_EQ(t.mask(0, 5, 9), 1.0);
}

TEST(Targets, SizeInCells) {
  const auto t = encode_targets({{{0.25, 0.25, 0.75, 0.75}, IconClass::kStar, true}}, grid_16x32());
  ASSERT_EQ(t.centers.size(), 1u);
  const auto& c = t.centers[0];
  EXPECT_EQ(c.row, 8);
  EXPECT_EQ(c.col, 16);
  EXPECT_DOUBLE_EQ(t.size(0, c.row, c.col), 16.0);
  EXPECT_DOUBLE_EQ(t.size(1, c.row, c.col), 8.0);
}

TEST(Targets, GaussianSigma) {
  EXPECT_DOUBLE_EQ(gaussian_sigma(3, 4), 1.0);
  EXPECT_DOUBLE_EQ(gaussian_sigma(12, 18), 2.0);
}

TEST(Decode, PlantedPeak) {
  auto c = grid_16x32();
  auto out = flat_output(c, 0.0);
  const int cls = index_of(IconClass::kShare);
  for (int p = 0; p < 16; ++p) {
    for (int q = 0; q < 32; ++q) {
      const double d2 = (p - 7) * (p - 7) + (q - 20) * (q - 20);
      out.heatmap(cls, p, q) = 0.9 * std::exp(-d2 / 8.0);
    }
  }
  const auto dets = decode(out, c);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].label, IconClass::kShare);
  EXPECT_DOUBLE_EQ(dets[0].score, 0.9);
  EXPECT_NEAR(dets[0].bbox.center_x() * 32, 20.5, 1.0);
  EXPECT_NEAR(dets[0].bbox.center_y() * 16, 7.5, 1.0);
}

TEST(Decode, ZeroHeatmapIsEmpty) { EXPECT_TRUE(decode(flat_output(grid_16x32(), 0.0), grid_16x32()).empty()); }

TEST(Decode, FlatHeatmapIsEmpty) { EXPECT_TRUE(decode(flat_output(grid_16x32(), 0.5), grid_16x32()).empty()); }

TEST(Decode, BelowThreshold) {
  auto c = grid_16x32();
  auto out = flat_output(c, 0.0);
  out.heatmap(0, 3, 3) = 0.1;
  EXPECT_TRUE(decode(out, c).empty());
  EXPECT_EQ(decode(out, c, 0.05).size(), 1u);
}

TEST(Decode, MaxDetections) {
  auto c = grid_16x32();
  c.max_detections = 3;
  auto out = flat_output(c, 0.0);
  for (int q = 0; q < 32; q += 4) out.heatmap(0, 8, q) = 0.3 + 0.01 * q;
  const auto dets = decode(out, c);
  ASSERT_EQ(dets.size(), 3u);
  EXPECT_GE(dets[0].score, dets[1].score);
  EXPECT_GE(dets[1].score, dets[2].score);
}

TEST(Decode, CrossClassSuppression) {
  auto c = grid_16x32();
  auto out = flat_output(c, 0.0);
  out.heatmap(index_of(IconClass::kClose), 8, 8) = 0.8;
  out.heatmap(index_of(IconClass::kDelete), 8, 9) = 0.5;
  out.heatmap(index_of(IconClass::kDelete), 8, 20) = 0.4;
  const auto dets = decode(out, c);
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].label, IconClass::kClose);
  EXPECT_DOUBLE_EQ(dets[1].score, 0.4);
  c.cross_class_suppression = false;
  EXPECT_EQ(decode(out, c).size(), 3u);
}

TEST(Decode, RoundTripRecoversEverything) {
  for (bool separated : {false, true}) {
    const auto r = checks::target_roundtrip(100, 7, separated);
    EXPECT_EQ(r.recovered, r.annotations);
    EXPECT_GE(r.min_iou, 0.5);
  }
}

TEST(Loss, ExactOutputHasZeroRegression) {
  const auto c = grid_16x32();
  const auto t = encode_targets({{{0.1, 0.1, 0.3, 0.4}, IconClass::kAdd, true}, {{0.5, 0.5, 0.9, 0.7}, IconClass::kPlay, true}}, c);
  const auto l = loss(output_from_targets(t), t, c);
  EXPECT_EQ(l.size, 0.0);
  EXPECT_EQ(l.offset, 0.0);
}

TEST(Loss, HeadGradientMatchesFiniteDifferences) { EXPECT_LE(checks::detector_head_gradient_error(8), 1e-4); }

TEST(Loss, NetworkGradientMatchesFiniteDifferences) { EXPECT_LE(checks::detector_net_gradient_error(9), 1e-4); }

TEST(Forward, ShapesAndDeterminism) {
  auto c = small_net();
  c.use_vh = true;
  DetectorModel m(c);
  Rng rng(1);
  m.net().init(rng);
  const auto s = tiny_corpus(1, 3)[0];
  const auto a = m.forward(s.pixels, s.vh_leaves);
  const auto b = m.forward(s.pixels, s.vh_leaves);
  EXPECT_EQ(a.heatmap.height(), 16);
  EXPECT_EQ(a.heatmap.width(), 32);
  EXPECT_EQ(a.heatmap.channels(), static_cast<int>(kNumIconClasses));
  EXPECT_EQ(a.heatmap, b.heatmap);
  EXPECT_EQ(a.size, b.size);
  EXPECT_EQ(a.offset, b.offset);
}

TEST(Forward, EmptyHierarchyEqualsZeroMap) {
  auto c = small_net();
  c.use_vh = true;
  DetectorNet<float> net(c);
  Rng rng(2);
  net.init(rng);
  const auto s = tiny_corpus(1, 4)[0];
  const auto x = image_to_input<float>(s.pixels, c.input_height, c.input_width);
  const FeatureMap<float> zero(c.text_dim, c.output_height(), c.output_width());
  typename DetectorNet<float>::Workspace a, b;
  net.forward(x, nullptr, a);
  net.forward(x, &zero, b);
  EXPECT_EQ(a.head, b.head);

  DetectorModel m(c);
  m.net().set_params(net.params());
  const auto g = m.vh_map({});
  EXPECT_EQ(g, zero);
}

TEST(DetectorTraining, OverfitsOneSample) {
  const auto corpus = tiny_corpus(1, 5);
  DetectorTrainSettings st;
  st.epochs = 200;
  st.batch_size = 1;
  st.final_lr_fraction = 1.0;
  const auto res = train_detector(corpus, small_net(), st, 3);
  ASSERT_EQ(res.log.size(), 200u);
  EXPECT_LT(res.log.back().mean_loss.total, 0.1 * res.log.front().mean_loss.total);
}

TEST(DetectorTraining, LossFallsEveryStepAtSmallLearningRate) {
  // At the default rate Adam overshoots now and then; a small fixed rate gives a clean descent.
  const auto corpus = tiny_corpus(1, 5);
  DetectorTrainSettings st;
  st.epochs = 50;
  st.batch_size = 1;
  st.final_lr_fraction = 1.0;
  st.adam.learning_rate = 2e-4;
  const auto res = train_detector(corpus, small_net(), st, 3);
  for (std::size_t i = 1; i < res.log.size(); ++i) {
    EXPECT_LT(res.log[i].mean_loss.total, res.log[i - 1].mean_loss.total) << "step " << i;
  }
}

TEST(DetectorTraining, SameSeedSameLog) {
  const auto corpus = tiny_corpus(4, 6);
  DetectorTrainSettings st;
  st.epochs = 2;
  st.batch_size = 2;
  auto c = small_net();
  c.use_vh = true;
  st.rid_sampling = true;
  const auto a = train_detector(corpus, c, st, 7);
  const auto b = train_detector(corpus, c, st, 7);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].to_json(), b.log[i].to_json());
  EXPECT_EQ(a.model.net().params()[0].value, b.model.net().params()[0].value);
}

TEST(DetectorCheckpoint, SaveLoadPredictsIdentically) {
  auto c = small_net();
  c.use_vh = true;
  DetectorModel m(c);
  Rng rng(8);
  m.net().init(rng);
  const auto dir = fs::temp_directory_path() / "iconann_ckpt_test";
  fs::create_directories(dir);
  m.save(dir / "m.ckpt");
  const auto back = DetectorModel::load(dir / "m.ckpt");
  EXPECT_EQ(back.config().to_json(), c.to_json());
  const auto s = tiny_corpus(1, 9)[0];
  EXPECT_EQ(m.predict(s, 0.0), back.predict(s, 0.0));
  fs::remove_all(dir);
}

TEST(DetectorCheckpoint, CorruptionIsDetected) {
  const auto dir = fs::temp_directory_path() / "iconann_ckpt_corrupt";
  fs::create_directories(dir);
  DetectorModel(small_net()).save(dir / "m.ckpt");
  {
    std::fstream f(dir / "m.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-3, std::ios::end);
    f.put('\x7f');
  }
  EXPECT_THROW(DetectorModel::load(dir / "m.ckpt"), CheckpointError);
  {
    std::ofstream f(dir / "bad.ckpt", std::ios::binary);
    f << "NOTACKPT";
  }
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), CheckpointError);
  fs::remove_all(dir);
}

TEST(Config, JsonRoundTripAndValidation) {
  auto c = DetectorConfig::desk_scale();
  c.use_vh = true;
  c.fusion_normalization = FusionNormalization::kCoverageMean;
  EXPECT_EQ(DetectorConfig::from_json(c.to_json()).to_json(), c.to_json());
  c.stride = 8;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
