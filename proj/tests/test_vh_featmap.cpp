#include <gtest/gtest.h>

#include "checks.hpp"
#include "iconann/vh_featmap.hpp"
#include "oracles.hpp"

using namespace iconann;

namespace {

std::vector<std::pair<int, int>> ones(const FeatureMap<double>& o) {
  std::vector<std::pair<int, int>> cells;
  for (int p = 0; p < o.height(); ++p) {
    for (int q = 0; q < o.width(); ++q) {
      if (o(0, p, q) == 1.0) cells.emplace_back(p, q);
    }
  }
  return cells;
}

}  // namespace

TEST(Overlay, FullCover) {
  const auto o = calc_overlay({0, 0, 1, 1}, 2, 2, 3);
  for (double v : o.values()) EXPECT_EQ(v, 1.0);
}

TEST(Overlay, QuarterBox) {
  const auto o = calc_overlay({0, 0, 0.5, 0.5}, 4, 4, 1);
  EXPECT_EQ(ones(o), (std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
}

TEST(Overlay, OffsetBox) {
  const auto o = calc_overlay({0.5, 0.25, 1.0, 0.75}, 4, 4, 1);
  EXPECT_EQ(ones(o), (std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {2, 2}, {2, 3}}));
}

TEST(Overlay, ChannelsIdentical) {
  const auto o = calc_overlay({0.1, 0.3, 0.6, 0.9}, 7, 5, 4);
  for (int c = 1; c < 4; ++c) {
    for (int p = 0; p < 7; ++p) {
      for (int q = 0; q < 5; ++q) EXPECT_EQ(o(c, p, q), o(0, p, q));
    }
  }
}

TEST(Overlay, MatchesBruteForce) { EXPECT_EQ(checks::overlay_mismatches(1000, 1), 0); }

TEST(NodeFeature, Cases) {
  const auto all = node_feature({1.5, -2.0}, calc_overlay({0, 0, 1, 1}, 3, 2, 2));
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 2; ++q) {
      EXPECT_EQ(all(0, p, q), 1.5);
      EXPECT_EQ(all(1, p, q), -2.0);
    }
  }
  const auto none = node_feature({1.0, 2.0}, FeatureMap<double>(2, 2, 2));
  for (double v : none.values()) EXPECT_EQ(v, 0.0);

  const auto one = node_feature({1.0, 2.0}, calc_overlay({0.5, 0.5, 1.0, 1.0}, 2, 2, 2));
  EXPECT_EQ(one(0, 1, 1), 1.0);
  EXPECT_EQ(one(1, 1, 1), 2.0);
  EXPECT_EQ(one(0, 0, 0) + one(0, 0, 1) + one(0, 1, 0), 0.0);
}

TEST(NodeFeature, DimensionMismatchThrows) {
  EXPECT_THROW(node_feature({1.0, 2.0, 3.0}, calc_overlay({0, 0, 1, 1}, 2, 2, 2)), ShapeError);
}

TEST(Aggregate, HandFixtures) {
  const std::vector<double> t1{1.0, -2.0}, t2{0.5, 4.0};
  const auto single = aggregate({{t1, {0, 0, 1, 1}}}, 3, 3, 2);
  for (int p = 0; p < 3; ++p) EXPECT_EQ(single(1, p, 2), -2.0);

  const auto both = aggregate({{t1, {0, 0, 1, 1}}, {t2, {0, 0, 1, 1}}}, 2, 2, 2);
  EXPECT_EQ(both(0, 1, 1), 1.5);
  EXPECT_EQ(both(1, 0, 0), 2.0);

  const auto halves = aggregate({{t1, {0, 0, 0.5, 1}}, {t2, {0.5, 0, 1, 1}}}, 2, 4, 2);
  EXPECT_EQ(halves(0, 0, 0), 2.0);
  EXPECT_EQ(halves(1, 1, 1), -4.0);
  EXPECT_EQ(halves(0, 0, 3), 1.0);
  EXPECT_EQ(halves(1, 1, 2), 8.0);

  const auto mean = aggregate({{t1, {0, 0, 0.5, 1}}, {t2, {0.5, 0, 1, 1}}}, 2, 4, 2, FusionNormalization::kCoverageMean);
  EXPECT_EQ(mean(0, 0, 0), 1.0);
  EXPECT_EQ(mean(1, 1, 2), 4.0);
}

TEST(Aggregate, UncoveredCellsAreZero) {
  const auto g = aggregate({{{3.0}, {0, 0, 0.5, 0.5}}}, 4, 4, 1);
  EXPECT_EQ(g(0, 3, 3), 0.0);
  EXPECT_EQ(g(0, 0, 0), 3.0);
}

TEST(Aggregate, MatchesNaiveLoop) {
  const auto r = checks::aggregate_oracle(200, 20, 2);
  EXPECT_LE(r.max_error, 1e-9);
  EXPECT_TRUE(r.halves_fixture);
  EXPECT_TRUE(r.empty_is_zero);
}

TEST(Aggregate, PermutationInvariant) {
  Rng rng(5);
  std::vector<NodeEmbedding> nodes;
  for (int i = 0; i < 6; ++i) nodes.push_back({{rng.uniform(), rng.uniform()}, oracle::random_grid_box(rng, 6, 6)});
  const auto a = aggregate(nodes, 6, 6, 2);
  std::reverse(nodes.begin(), nodes.end());
  const auto b = aggregate(nodes, 6, 6, 2);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a.values()[j], b.values()[j], 1e-12);
}

TEST(Aggregate, OneCellTranslation) {
  const std::vector<double> t{0.7};
  const auto a = aggregate({{t, {0.25, 0.25, 0.5, 0.5}}}, 8, 8, 1);
  const auto b = aggregate({{t, {0.375, 0.25, 0.625, 0.5}}}, 8, 8, 1);
  for (int p = 0; p < 8; ++p) {
    for (int q = 0; q + 1 < 8; ++q) EXPECT_EQ(a(0, p, q), b(0, p, q + 1));
  }
}

TEST(Fusion, ZeroParamsIsIdentity) {
  FusionParams<double> fp(3, 3, 2);
  Rng rng(3);
  FeatureMap<double> g(3, 4, 5), c(2, 4, 5);
  for (auto& v : g.values()) v = rng.uniform(-1, 1);
  for (auto& v : c.values()) v = rng.uniform(-1, 1);
  EXPECT_EQ(project_and_fuse(g, c, fp.params, fp.layer), c);

  fp.layer.init(fp.params, rng);
  EXPECT_EQ(project_and_fuse(FeatureMap<double>(3, 4, 5), c, fp.params, fp.layer), c);
}

TEST(Fusion, MatchesNaiveLoop) {
  Rng rng(4);
  FusionParams<double> fp(4, 5, 3);
  for (std::size_t t = 0; t < fp.params.size(); ++t) {
    for (auto& v : fp.params[t].value) v = rng.uniform(-1, 1);
  }
  FeatureMap<double> g(4, 6, 7), c(3, 6, 7);
  for (auto& v : g.values()) v = rng.uniform(-1, 1);
  for (auto& v : c.values()) v = rng.uniform(-1, 1);
  // Repeated cell vectors exercise the deduplication path.
  for (int ch = 0; ch < 4; ++ch) g(ch, 5, 6) = g(ch, 0, 0);
  const auto& l = fp.layer;
  const auto want = oracle::fuse(g, c, fp.params[l.first.weight].value, fp.params[l.first.bias].value,
                                 fp.params[l.second.weight].value, fp.params[l.second.bias].value);
  const auto got = project_and_fuse(g, c, fp.params, fp.layer);
  for (std::size_t j = 0; j < want.size(); ++j) EXPECT_NEAR(got.values()[j], want.values()[j], 1e-10);
}

TEST(Fusion, SpatialMismatchThrows) {
  FusionParams<double> fp(2, 2, 2);
  EXPECT_THROW(project_and_fuse(FeatureMap<double>(2, 3, 3), FeatureMap<double>(2, 3, 4), fp.params, fp.layer),
               ShapeError);
}

TEST(Fusion, GradientMatchesFiniteDifferences) { EXPECT_LE(checks::fusion_gradient_error(6), 1e-4); }
