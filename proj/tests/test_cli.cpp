#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const std::string kCli = CROSEARCH_CLI;
const std::string kData = CROSEARCH_DATA_DIR;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  const std::string cmd = "'" + kCli + "' " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path out_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "crosearch_cli_test" / name;
  fs::remove_all(d);
  return d;
}

std::string cfg(const std::string& name) { return "--config '" + kData + "/configs/" + name + ".toml'"; }

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 64);
  EXPECT_EQ(run("bogus").code, 64);
  EXPECT_EQ(run("eval").code, 64);
  EXPECT_EQ(run("run " + cfg("run_scripted") + " --lang en").code, 64);
  const auto help = run("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("ablate"), std::string::npos);
}

TEST(Cli, IndexSummarizesCollections) {
  const auto d = out_dir("index");
  fs::create_directories(d);
  const auto r = run("index --corpus '" + kData + "/corpus/en.jsonl' --corpus '" + kData +
                     "/corpus/th.jsonl' --bigram-langs th --out '" + (d / "index.json").string() + "'");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("en\tdocs=7\t"), std::string::npos) << r.out;
  EXPECT_NE(slurp(d / "index.json").find("\"bigrams\""), std::string::npos);
}

TEST(Cli, RunScriptedEpisode) {
  const auto r = run("run " + cfg("run_scripted") + " --question 'What is the capital of Egypt?' --lang en --trace");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("\"operators\":[\"ar\",\"en\",\"fr\",\"th\"]"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.substr(r.out.size() - 6), "Cairo\n");
}

TEST(Cli, RunWithoutAnswerExitsThree) {
  const auto d = out_dir("no_answer");
  fs::create_directories(d);
  std::ofstream(d / "searches.jsonl") << "{\"step\": 1, \"text\": \"<search>capital Egypt</search>\"}\n"
                                      << "{\"step\": 2, \"text\": \"<search>Cairo</search>\"}\n"
                                      << "{\"step\": 3, \"text\": \"<search>Nile</search>\"}\n";
  std::ofstream(d / "c.toml") << "[registry]\ncorpus = [\"" << kData << "/corpus/en.jsonl\"]\n"
                              << "[loop]\nbudget = 1\n[backends]\ngenerator = \"scripted\"\nscenario = \""
                              << (d / "searches.jsonl").string() << "\"\nreconstructor = \"echo\"\n";
  const auto r = run("run --config '" + (d / "c.toml").string() + "' --question q --lang en");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("no answer"), std::string::npos) << r.out;
}

TEST(Cli, ErrorsMapToExitCodes) {
  EXPECT_EQ(run("run " + cfg("run_scripted") + " --question q --lang de").code, 2);
  EXPECT_EQ(run("eval --config /nonexistent.toml --out /tmp/x").code, 2);
  const auto d = out_dir("http");
  fs::create_directories(d);
  std::ofstream(d / "http.toml") << "[registry]\ncorpus = [\"" << kData << "/corpus/en.jsonl\"]\n"
                                 << "[backends]\ngenerator = \"http\"\nendpoint = \"http://127.0.0.1:1\"\n"
                                 << "timeout_seconds = 1\n";
  EXPECT_EQ(run("run --config '" + (d / "http.toml").string() + "' --question q --lang en").code, 4);
  // a huge init_scale overflows the logits on the first update
  std::ifstream in(kData + "/configs/train_synthetic.toml");
  std::ofstream nf(d / "nonfinite.toml");
  for (std::string line; std::getline(in, line);) {
    nf << (line.rfind("init_scale", 0) == 0 ? "init_scale = 1e308" : line) << "\n";
  }
  nf.close();
  const auto r = run("train --config '" + (d / "nonfinite.toml").string() + "' --out '" + (d / "t").string() + "'");
  EXPECT_EQ(r.code, 5) << r.out;
  EXPECT_NE(r.out.find("NonFiniteLoss: update 0"), std::string::npos) << r.out;
}

TEST(Cli, EvalGoldGolden) {
  const auto d = out_dir("eval_gold");
  const auto r = run("eval " + cfg("eval_gold") + " --out '" + d.string() + "'");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(d / "eval_report.csv"),
            "lang,n,fem_mean,c3recall_mean\nar,10,1.000000,1.000000\nen,10,1.000000,1.000000\n"
            "fr,10,1.000000,1.000000\nth,10,1.000000,1.000000\nALL,40,1.000000,1.000000\nAVG,40,1.000000,1.000000\n");
  EXPECT_NE(slurp(d / "eval_report.json").find("\"config_hash\""), std::string::npos);
}

TEST(Cli, TrainWritesLogAndCheckpoint) {
  const auto d = out_dir("train");
  const auto r = run("train " + cfg("train_synthetic") + " --out '" + d.string() + "' --updates 10");
  EXPECT_EQ(r.code, 0) << r.out;
  const auto log = slurp(d / "training_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 11);
  EXPECT_NE(slurp(d / "policy.json").find("\"embedding\""), std::string::npos);
  EXPECT_NE(r.out.find("updates=10"), std::string::npos);
}

TEST(Cli, AblateWritesMatrixAndCurves) {
  const auto d = out_dir("ablate");
  const auto r = run("ablate " + cfg("ablate_synthetic") + " --out '" + d.string() + "'");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(d / "ablation.csv").substr(0, 23), "query_lang,ar,en,fr,th\n");
  EXPECT_TRUE(fs::exists(d / "scaling.csv"));
  EXPECT_TRUE(fs::exists(d / "scaling_cross.csv"));
}

TEST(Cli, FlagsOverrideConfig) {
  const auto a = out_dir("seed_a");
  const auto b = out_dir("seed_b");
  run("train " + cfg("train_synthetic") + " --out '" + a.string() + "' --updates 5");
  run("train " + cfg("train_synthetic") + " --out '" + b.string() + "' --updates 5 --seed 8");
  EXPECT_NE(slurp(a / "training_log.csv"), slurp(b / "training_log.csv"));
}

}  // namespace
