#include <gtest/gtest.h>

#include <map>

#include "crosearch/metrics.hpp"
#include "support/generators.hpp"

using namespace crosearch::metrics;

namespace {

// Trigram recall written out by hand: enumerate gold trigrams left to right
// and strike each one from a list of prediction trigrams.
double hand_recall(const std::u32string& p, const std::u32string& g) {
  std::vector<std::u32string> pool;
  for (std::size_t i = 0; i + 3 <= p.size(); ++i) pool.push_back(p.substr(i, 3));
  std::size_t total = 0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i + 3 <= g.size(); ++i) {
    ++total;
    for (auto it = pool.begin(); it != pool.end(); ++it) {
      if (*it == g.substr(i, 3)) {
        pool.erase(it);
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

TEST(Recall, KnownValues) {
  EXPECT_NEAR(char_3gram_recall("pari", "paris"), 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(char_3gram_recall("Paris!", "paris"), 1.0);
  EXPECT_DOUBLE_EQ(char_3gram_recall("", "paris"), 0.0);
  EXPECT_DOUBLE_EQ(char_3gram_recall("the city of paris", "paris"), 1.0);
  // repeated gold trigrams are counted with multiplicity
  EXPECT_DOUBLE_EQ(char_3gram_recall("aaa", "aaaaa"), 1.0 / 3.0);
}

TEST(Recall, ShortGoldFallsBackToExactMatch) {
  EXPECT_DOUBLE_EQ(char_3gram_recall("Au", "au"), 1.0);
  EXPECT_DOUBLE_EQ(char_3gram_recall("Au.", "Au"), 1.0);
  EXPECT_DOUBLE_EQ(char_3gram_recall("gold Au", "Au"), 0.0);
}

TEST(Recall, MatchesHandEnumeration) {
  testsupport::Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto p = testsupport::random_string(rng, 20);
    const auto g = testsupport::random_string(rng, 10);
    const auto gn = crosearch::text::decode(crosearch::text::normalize(g));
    if (gn.size() < 3) continue;
    const auto pn = crosearch::text::decode(crosearch::text::normalize(p));
    EXPECT_NEAR(char_3gram_recall(p, g), hand_recall(pn, gn), 1e-15) << p << " | " << g;
  }
}

TEST(Recall, ReflexiveAndBounded) {
  testsupport::Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const auto s = testsupport::random_string(rng);
    EXPECT_DOUBLE_EQ(char_3gram_recall(s, s), 1.0) << s;
    const auto t = testsupport::random_string(rng);
    const double r = char_3gram_recall(t, s);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
}

// Monotonicity holds wherever the gold has trigrams; shorter golds fall back
// to exact match, which appending can break (see ShortGoldFallback).
TEST(Recall, MonotoneUnderAppend) {
  testsupport::Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto p = testsupport::random_string(rng);
    const auto suffix = testsupport::random_string(rng);
    std::string g;
    do {
      g = testsupport::random_string(rng);
    } while (crosearch::text::decode(crosearch::text::normalize(g)).size() < 3);
    EXPECT_GE(char_3gram_recall(p + suffix, g), char_3gram_recall(p, g)) << p << " + " << suffix << " | " << g;
  }
}

TEST(Recall, ShortGoldFallback) {
  EXPECT_EQ(char_3gram_recall("Au", "au"), 1.0);
  EXPECT_EQ(char_3gram_recall("Au.", "au"), 1.0);
  EXPECT_EQ(char_3gram_recall("Au x", "au"), 0.0);
  EXPECT_EQ(char_3gram_recall("", ""), 1.0);
}

TEST(Fem, SubstringRule) {
  EXPECT_EQ(fem("It is Paris.", {"paris"}), 1);
  EXPECT_EQ(fem("Par", {"Paris"}), 0);
  EXPECT_EQ(fem("x", {"y", "X"}), 1);
  EXPECT_THROW(fem("x", {}), crosearch::Error);
}

TEST(Reward, FirstAnswerBestAlias) {
  const auto t = crosearch::protocol::parse_trajectory("<answer>le nil</answer><answer>Paris</answer>");
  EXPECT_DOUBLE_EQ(outcome_reward(t, {"Paris", "Nil"}), 1.0);
  EXPECT_DOUBLE_EQ(exact_outcome_reward(t, {"Paris"}), 0.0);
  EXPECT_DOUBLE_EQ(outcome_reward(crosearch::protocol::parse_trajectory("<think>x</think>"), {"Paris"}), 0.0);
}

TEST(Normalization, Wrapper) { EXPECT_EQ(normalize_text(" A,b ").value(), "ab"); }

}  // namespace
