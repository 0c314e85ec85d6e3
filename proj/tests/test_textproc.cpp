#include <gtest/gtest.h>

#include <cmath>

#include "iconann/textproc.hpp"

using namespace iconann;

TEST(TextAttribute, Tails) {
  const auto a = extract_text_attribute({"android.support.AppImageButton", "com.sololearn.python:id/vote_down", {}});
  EXPECT_EQ(a.class_tail, "AppImageButton");
  EXPECT_EQ(a.resource_id_tail, "vote_down");
  EXPECT_EQ(class_name_tail("ImageView"), "ImageView");
  EXPECT_EQ(resource_id_tail("vote_down"), "vote_down");
  EXPECT_EQ(extract_text_attribute({"a.b.View", std::nullopt, {}}).resource_id_tail, "");
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("vote_down"), (TokenSequence{"vote", "down"}));
  EXPECT_EQ(tokenize("AppImageButton"), (TokenSequence{"app", "image", "button"}));
  EXPECT_EQ(tokenize("FloatingActionButton2"), (TokenSequence{"floating", "action", "button2"}));
  EXPECT_EQ(tokenize("URLBar"), (TokenSequence{"url", "bar"}));
  EXPECT_EQ(tokenize("ic_menu__white-24dp"), (TokenSequence{"ic", "menu", "white", "24dp"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("___").empty());
}

TEST(Tokenize, NodeTokensJoinClassAndId) {
  EXPECT_EQ(node_tokens("android.support.AppImageButton", "com.sololearn.python:id/vote_down"),
            (TokenSequence{"app", "image", "button", "vote", "down"}));
}

TEST(Tokenize, ReTokenizingIsStable) {
  for (const char* raw : {"AppImageButton", "vote_down", "btnShareNow_2", "HTTPServerURLs", "x"}) {
    const auto once = tokenize(raw);
    std::string joined;
    for (const auto& t : once) joined += (joined.empty() ? "" : " ") + t;
    EXPECT_EQ(tokenize(joined), once) << raw;
    for (const auto& t : once) {
      for (char c : t) EXPECT_FALSE(std::isupper(static_cast<unsigned char>(c)) || c == '_' || c == ' ');
    }
  }
}

TEST(Encoder, EmptyIsZero) {
  HashedTextEncoder enc(16);
  const auto e = enc.encode({});
  ASSERT_EQ(e.size(), 16u);
  for (double v : e) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, DeterministicAndOrderInvariant) {
  HashedTextEncoder enc(32, 4);
  EXPECT_EQ(enc.encode({"vote", "down"}), enc.encode({"vote", "down"}));
  const auto a = enc.encode({"vote", "down"});
  const auto b = enc.encode({"down", "vote"});
  const auto v = enc.token_vector("vote");
  const auto d = enc.token_vector("down");
  for (std::size_t k = 0; k < 32; ++k) {
    EXPECT_NEAR(a[k], b[k], 1e-15);
    EXPECT_NEAR(a[k], 0.5 * (v[k] + d[k]), 1e-15);
  }
}

TEST(Encoder, TokenVectorsAreUnitAndSeeded) {
  HashedTextEncoder a(64, 1), b(64, 2);
  const auto v = a.token_vector("menu");
  double norm = 0.0;
  for (double x : v) norm += x * x;
  EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-12);
  EXPECT_NE(v, b.token_vector("menu"));
  EXPECT_NE(v, a.token_vector("search"));
}

TEST(RidDictionary, Basics) {
  EXPECT_TRUE(build_rid_dictionary({}).empty(IconClass::kShare));

  UISample s;
  s.annotations = {{{0.1, 0.1, 0.2, 0.2}, IconClass::kShare, true}};
  s.vh_leaves = {{"android.widget.ImageButton", "com.app:id/share_btn", {0.1, 0.1, 0.2, 0.2}},
                 {"android.widget.TextView", "com.app:id/title", {0.5, 0.5, 0.9, 0.6}},
                 {"android.widget.ImageView", std::nullopt, {0.6, 0.1, 0.7, 0.2}}};
  const auto d = build_rid_dictionary({s});
  EXPECT_EQ(d.entries(IconClass::kShare), (ResourceIdDictionary::Multiset{{"share_btn", 1}}));
  EXPECT_EQ(d.entries(IconClass::kOther), (ResourceIdDictionary::Multiset{{"title", 1}}));
  EXPECT_TRUE(build_rid_dictionary({s}, false).empty(IconClass::kOther));
  EXPECT_EQ(ResourceIdDictionary::from_json(d.to_json()), d);
}

TEST(RidDictionary, Sampling) {
  ResourceIdDictionary d;
  Rng rng(11);
  d.add(IconClass::kMenu, "a");
  for (int i = 0; i < 20; ++i) EXPECT_EQ(d.sample(IconClass::kMenu, rng), "a");
  EXPECT_FALSE(d.sample(IconClass::kStar, rng).has_value());

  ResourceIdDictionary w;
  w.add(IconClass::kMenu, "a", 3);
  w.add(IconClass::kMenu, "b", 1);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += w.sample(IconClass::kMenu, rng) == "a";
  EXPECT_NEAR(hits / 10000.0, 0.75, 0.03);
}
