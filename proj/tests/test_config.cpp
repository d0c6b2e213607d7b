#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "crosearch/config.hpp"

using namespace crosearch;
using namespace crosearch::config;
namespace fs = std::filesystem;

namespace {

const std::string kData = CROSEARCH_DATA_DIR;

fs::path scratch(const std::string& name, const std::string& body) {
  const auto dir = fs::temp_directory_path() / "crosearch_config_test";
  fs::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << body;
  return p;
}

std::string error_of(const fs::path& p) {
  try {
    load_config(p.string());
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    return e.what();
  }
  return "";
}

TEST(Load, BundledConfigs) {
  for (const char* name : {"run_scripted", "eval_gold", "train_synthetic", "train_synthetic_mono", "ablate_synthetic",
                           "eval_synthetic_toy"}) {
    const auto cfg = load_config(kData + "/configs/" + name + ".toml");
    EXPECT_NO_THROW(Experiment{cfg}) << name;
  }
}

TEST(Load, TrainingValues) {
  const auto cfg = load_config(kData + "/configs/train_synthetic.toml");
  EXPECT_EQ(cfg.clpo.group_size, 4u);
  EXPECT_EQ(cfg.clpo.updates, 500u);
  EXPECT_DOUBLE_EQ(cfg.clpo.learning_rate, 0.3);
  EXPECT_EQ(cfg.clpo.thinking_modes, (std::vector<std::string>{"en", "fr", "th", "ar"}));
  EXPECT_EQ(cfg.clpo.seed, 7u);
  ASSERT_TRUE(cfg.synthetic.has_value());
  EXPECT_EQ(cfg.synthetic->languages.size(), 4u);
  EXPECT_DOUBLE_EQ(cfg.synthetic->cross_fraction, 0.5);
  EXPECT_EQ(cfg.backends.generator, "toy");
}

TEST(Load, PathsResolveAgainstTheConfigFile) {
  const auto cfg = load_config(kData + "/configs/eval_gold.toml");
  ASSERT_TRUE(cfg.registry.has_value());
  ASSERT_EQ(cfg.registry->corpora.size(), 4u);
  EXPECT_TRUE(fs::exists(cfg.registry->corpora[0]));
  EXPECT_TRUE(fs::exists(*cfg.dataset));
}

TEST(Errors, UnknownKeysSectionsAndTypes) {
  EXPECT_NE(error_of(scratch("a.toml", "[synthetic]\n[loop]\nbudgett = 3\n")).find("unknown key 'budgett' in [loop]"),
            std::string::npos);
  EXPECT_NE(error_of(scratch("b.toml", "[synthetic]\n[extras]\n")).find("'extras'"), std::string::npos);
  EXPECT_NE(error_of(scratch("c.toml", "[synthetic]\n[loop]\nbudget = \"x\"\n")).find("budget has the wrong type"),
            std::string::npos);
  EXPECT_NE(error_of(scratch("d.toml", "[synthetic]\n[loop]\nbudget = -1\n")).find("non-negative"), std::string::npos);
  EXPECT_NE(error_of(scratch("e.toml", "[loop]\nbudget = 2\n")).find("[registry] or [synthetic]"), std::string::npos);
  EXPECT_NE(error_of(scratch("f.toml", "[registry]\ncorpus = [\"nope.jsonl\"]\n")).find("does not exist"),
            std::string::npos);
  EXPECT_NE(error_of(scratch("g.toml", "[synthetic]\n[clpo]\nreward = \"bleu\"\n")).find("reward"), std::string::npos);
  EXPECT_NE(error_of(scratch("h.toml", "[synthetic]\n[backends]\ngenerator = \"scripted\"\n")).find("scenario"),
            std::string::npos);
  EXPECT_NE(error_of(scratch("i.toml", "[registry]\ncorpus = [\"" + kData + "/corpus/en.jsonl\"]\n[backends]\n"
                                       "generator = \"toy\"\n"))
                .find("needs [synthetic]"),
            std::string::npos);
}

TEST(Errors, ParseErrorsCarryTheLine) {
  const auto msg = error_of(scratch("j.toml", "[synthetic]\n\n[loop]\nbudget = = 3\n"));
  EXPECT_NE(msg.find("j.toml:4:"), std::string::npos) << msg;
}

TEST(Errors, MutuallyExclusiveSources) {
  EXPECT_NE(error_of(scratch("k.toml", "[synthetic]\n[registry]\ncorpus = [\"" + kData + "/corpus/en.jsonl\"]\n"))
                .find("mutually exclusive"),
            std::string::npos);
}

TEST(Hash, StableAndSensitive) {
  const auto a = load_config(kData + "/configs/train_synthetic.toml");
  auto b = load_config(kData + "/configs/train_synthetic.toml");
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.clpo.seed = 8;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Experiment, GoldGeneratorAndAdhocQuestions) {
  Experiment ex(load_config(kData + "/configs/eval_gold.toml"));
  EXPECT_EQ(ex.dataset().size(), 40u);
  const auto q = ex.example_for("Who wrote Hamlet?", "en");
  EXPECT_EQ(q.id, "hamlet_author-en");
  auto gen = ex.make_generator(q);
  EXPECT_EQ(gen->complete({"p", {}, 100}), "<answer>William Shakespeare</answer>");
  EXPECT_EQ(ex.example_for("unknown", "en").id, "adhoc");
}

TEST(Experiment, TrainingNeedsSynthetic) {
  Experiment ex(load_config(kData + "/configs/eval_gold.toml"));
  EXPECT_THROW(ex.training_environment(), Error);
}

}  // namespace
