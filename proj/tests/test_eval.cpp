#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "checks.hpp"
#include "iconann/eval.hpp"
#include "iconann/rng.hpp"

using namespace iconann;

namespace {

MetricsReport run(const std::vector<Detection>& dets, const std::vector<IconAnnotation>& gt,
                  RecallMode mode = RecallMode::kStandard) {
  EvalOptions o;
  o.mode = mode;
  return evaluate({dets}, {gt}, o);
}

}  // namespace

TEST(Match, HandFixture) {
  const auto m = match(checks::eval_fixture_detections(), checks::eval_fixture_truth());
  EXPECT_EQ(m.detection_match[0], 0u);
  EXPECT_EQ(m.detection_match[1], 1u);
  EXPECT_FALSE(m.detection_match[2].has_value());
  const auto r = run(checks::eval_fixture_detections(), checks::eval_fixture_truth());
  EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_NEAR(r.f1, 0.8, 1e-12);
}

TEST(Match, HigherScoreWinsTheIcon) {
  const std::vector<IconAnnotation> gt{{{0.0, 0.0, 0.4, 0.4}, IconClass::kMenu, true}};
  const std::vector<Detection> dets{{{0.1, 0.1, 0.2, 0.2}, IconClass::kMenu, 0.4},
                                    {{0.2, 0.2, 0.3, 0.3}, IconClass::kMenu, 0.7}};
  const auto m = match(dets, gt);
  EXPECT_FALSE(m.detection_match[0].has_value());
  EXPECT_EQ(m.detection_match[1], 0u);
}

TEST(Match, ClassAwareness) {
  const std::vector<IconAnnotation> gt{{{0.0, 0.0, 0.4, 0.4}, IconClass::kMenu, true}};
  const std::vector<Detection> dets{{{0.1, 0.1, 0.2, 0.2}, IconClass::kSearch, 0.9}};
  EXPECT_EQ(match(dets, gt).true_positives(), 0u);
  EXPECT_EQ(match(dets, gt, false).true_positives(), 1u);
}

TEST(Match, InputOrderDoesNotMatter) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<IconAnnotation> gt;
    std::vector<Detection> dets;
    for (int i = 0; i < 5; ++i) {
      const double x = rng.uniform(0, 0.7), y = rng.uniform(0, 0.7);
      gt.push_back({{x, y, x + 0.3, y + 0.3}, IconClass::kMenu, true});
    }
    for (int i = 0; i < 8; ++i) {
      const double x = rng.uniform(0, 0.9), y = rng.uniform(0, 0.9);
      dets.push_back({{x, y, x + 0.1, y + 0.1}, IconClass::kMenu, std::round(rng.uniform(0, 4)) / 4});
    }
    auto shuffled = dets;
    std::reverse(shuffled.begin(), shuffled.end());
    EXPECT_EQ(match(dets, gt).true_positives(), match(shuffled, gt).true_positives());
    EXPECT_EQ(run(dets, gt).f1, run(shuffled, gt).f1);
  }
}

TEST(Metrics, NoDetections) {
  const auto r = run({}, checks::eval_fixture_truth());
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_TRUE(r.undefined_ratio);
}

TEST(Metrics, PerfectInBothModes) {
  std::vector<Detection> dets;
  for (const auto& a : checks::eval_fixture_truth()) dets.push_back({a.bbox, a.label, 0.9});
  for (auto mode : {RecallMode::kStandard, RecallMode::kStarred}) {
    const auto r = run(dets, checks::eval_fixture_truth(), mode);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.f1, 1.0);
  }
}

TEST(Metrics, StarredRecall) {
  const auto gt = checks::starred_fixture_truth();
  const auto dets = checks::starred_fixture_detections();
  EXPECT_DOUBLE_EQ(run(dets, gt).recall, 0.5);
  EXPECT_DOUBLE_EQ(run(dets, gt, RecallMode::kStarred).recall, 1.0);
}

TEST(Metrics, StarredNeverBelowStandard) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<IconAnnotation> gt;
    std::vector<Detection> dets;
    for (int i = 0; i < 6; ++i) {
      const double x = 0.15 * i;
      gt.push_back({{x, 0.1, x + 0.1, 0.2}, IconClass::kMenu, rng.bernoulli(0.6)});
      if (rng.bernoulli(0.5)) dets.push_back({{x + 0.02, 0.12, x + 0.08, 0.18}, IconClass::kMenu, rng.uniform(0.3, 1)});
    }
    // With no VH-matched icon at all the starred ratio is 0/0, reported as 0.
    if (std::none_of(gt.begin(), gt.end(), [](const IconAnnotation& a) { return a.vh_matched; })) continue;
    EXPECT_GE(run(dets, gt, RecallMode::kStarred).recall, run(dets, gt).recall);
    EXPECT_EQ(run(dets, gt, RecallMode::kStarred).precision, run(dets, gt).precision);
  }
}

TEST(Metrics, ThresholdDropsLowScores) {
  auto dets = checks::eval_fixture_detections();
  dets[2].score = 0.1;
  const auto r = run(dets, checks::eval_fixture_truth());
  EXPECT_EQ(r.precision, 1.0);
}

TEST(Metrics, MonotoneInFalseAndTruePositives) {
  const auto gt = checks::eval_fixture_truth();
  std::vector<Detection> dets{{{0.05, 0.05, 0.15, 0.15}, IconClass::kMenu, 0.9}};
  const double base = run(dets, gt).f1;
  auto with_fp = dets;
  with_fp.push_back({{0.8, 0.1, 0.9, 0.2}, IconClass::kStar, 0.9});
  EXPECT_LE(run(with_fp, gt).f1, base);
  auto with_tp = dets;
  with_tp.push_back({{0.55, 0.55, 0.65, 0.65}, IconClass::kSearch, 0.9});
  EXPECT_GE(run(with_tp, gt).f1, base);
}

TEST(AveragePrecision, IouStraddle) {
  const std::vector<IconAnnotation> gt{{{0.0, 0.0, 0.4, 0.4}, IconClass::kPlay, true}};
  const std::vector<Detection> good{{{0.0, 0.0, 0.4, 0.26}, IconClass::kPlay, 0.9}};  // IOU 0.65
  const std::vector<Detection> poor{{{0.0, 0.0, 0.4, 0.12}, IconClass::kPlay, 0.9}};  // IOU 0.3
  EXPECT_DOUBLE_EQ(mean_average_precision({good}, {gt}, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(mean_average_precision({poor}, {gt}, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(mean_average_precision({poor}, {gt}, 0.1), 1.0);
}

TEST(AveragePrecision, HandComputedArea) {
  EXPECT_NEAR(average_precision({true, false, true}, 2), checks::kMapFixtureArea, 1e-12);
  EXPECT_NEAR(mean_average_precision({checks::map_fixture_detections()}, {checks::map_fixture_truth()}, 0.5),
              checks::kMapFixtureArea, 1e-9);
  EXPECT_DOUBLE_EQ(average_precision({}, 3), 0.0);
  EXPECT_DOUBLE_EQ(average_precision({false, true}, 1), 0.5);
}

TEST(AveragePrecision, AveragesOverClassesInTruth) {
  const std::vector<IconAnnotation> gt{{{0.0, 0.0, 0.2, 0.2}, IconClass::kMenu, true},
                                       {{0.5, 0.5, 0.7, 0.7}, IconClass::kShare, true}};
  // Menu found, share missed, and a stray star that has no ground truth of its own.
  const std::vector<Detection> dets{{{0.0, 0.0, 0.2, 0.2}, IconClass::kMenu, 0.9},
                                    {{0.8, 0.8, 0.9, 0.9}, IconClass::kStar, 0.9}};
  EXPECT_DOUBLE_EQ(mean_average_precision({dets}, {gt}, 0.5), 0.5);
}

TEST(VhMatcher, Cases) {
  std::vector<IconAnnotation> anns{{{0.1, 0.1, 0.3, 0.3}, IconClass::kMenu, false}};
  default_vh_matcher(anns, {{"V", std::nullopt, {0.1, 0.1, 0.3, 0.3}}});
  EXPECT_TRUE(anns[0].vh_matched);
  default_vh_matcher(anns, {});
  EXPECT_FALSE(anns[0].vh_matched);
  default_vh_matcher(anns, {{"V", std::nullopt, {0.1, 0.1, 0.3, 0.18}}});
  EXPECT_FALSE(anns[0].vh_matched);
}

TEST(Report, JsonAndTable) {
  const auto r = run(checks::eval_fixture_detections(), checks::eval_fixture_truth());
  const auto j = r.to_json();
  EXPECT_NEAR(j.at("precision").get<double>(), 2.0 / 3.0, 1e-9);
  const auto table = render_table({{"detector-vh", r}});
  EXPECT_NE(table.find("detector-vh"), std::string::npos);
  EXPECT_NE(table.find("0.667"), std::string::npos);
  const auto csv = per_class_csv(r, {});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,train_count,precision,recall,f1");
}
