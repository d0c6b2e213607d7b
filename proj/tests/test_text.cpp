#include <gtest/gtest.h>

#include "crosearch/text.hpp"
#include "support/generators.hpp"

using namespace crosearch::text;

namespace {

TEST(Normalize, Pipeline) {
  EXPECT_EQ(normalize("  Hello,   WORLD!  "), "hello world");
  EXPECT_EQ(normalize("Ｐａｒｉｓ"), "paris");  // full-width folds under NFKC
  EXPECT_EQ(normalize("Le Caire."), "le caire");
  EXPECT_EQ(normalize("ﬁne"), "fine");
  EXPECT_EQ(normalize("É"), "é");
  EXPECT_EQ(normalize("\t\n"), "");
}

TEST(Normalize, Idempotent) {
  testsupport::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto s = testsupport::random_string(rng);
    const auto once = normalize(s);
    EXPECT_EQ(normalize(once), once) << s;
  }
}

TEST(Tokenize, Words) {
  EXPECT_EQ(tokenize("The Nile, river-of Africa"), (std::vector<std::string>{"the", "nile", "river", "of", "africa"}));
  EXPECT_TRUE(tokenize(" ,.; ").empty());
}

TEST(Tokenize, Bigrams) {
  EXPECT_EQ(tokenize("ปารีส", TokenizerMode::Bigrams), (std::vector<std::string>{"ปา", "าร", "รี", "ีส"}));
  EXPECT_EQ(tokenize("a bc", TokenizerMode::Bigrams), (std::vector<std::string>{"a", "bc"}));
}

TEST(Utf8, RoundTripAndPrefix) {
  const std::string s = "aé日ب";
  EXPECT_EQ(encode(decode(s)), s);
  EXPECT_EQ(length(s), 4u);
  EXPECT_EQ(prefix(s, 2), "aé");
  EXPECT_EQ(prefix(s, 10), s);
}

}  // namespace
