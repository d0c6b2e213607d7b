// crosearch: index, run, train, eval and ablate from the command line.
//
// Exit codes: 0 ok, 2 config/schema/language error, 3 budget exhausted
// without an answer, 4 backend unavailable, 5 non-finite training loss,
// 64 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crosearch/crosearch.hpp"

namespace fs = std::filesystem;
using namespace crosearch;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNoAnswer = 3;
constexpr int kBackend = 4;
constexpr int kNonFinite = 5;
constexpr int kUsage = 64;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BackendUnavailable:
    case ErrorKind::ScenarioExhausted: return kBackend;
    case ErrorKind::NonFiniteLoss: return kNonFinite;
    default: return kConfig;
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << content;
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> updates;
  std::optional<double> learning_rate;
  std::vector<std::string> modes;
};

config::RunConfig load(const std::string& path, const Overrides& o) {
  auto cfg = config::load_config(path);
  if (o.seed) cfg.clpo.seed = *o.seed;
  if (o.budget) cfg.loop.max_budget = *o.budget;
  if (o.top_k) cfg.loop.top_k = *o.top_k;
  if (o.updates) cfg.clpo.updates = *o.updates;
  if (o.learning_rate) cfg.clpo.learning_rate = *o.learning_rate;
  if (!o.modes.empty()) cfg.clpo.thinking_modes = o.modes;
  return cfg;
}

int cmd_index(const std::vector<std::string>& corpora, const std::string& out, const std::vector<std::string>& bigram) {
  std::vector<corpus::Document> docs;
  for (const auto& p : corpora) {
    auto part = corpus::load_corpus_jsonl(p);
    docs.insert(docs.end(), part.begin(), part.end());
  }
  const auto reg = corpus::build_registry(docs, "en", {bigram.begin(), bigram.end()});
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& lang : reg.languages()) {
    const auto& c = reg.collection(lang);
    std::printf("%s\tdocs=%zu\tterms=%zu\tavg_len=%.4f\n", lang.c_str(), c.size(), c.postings().size(),
                c.avg_doc_length());
    summary.push_back({{"lang", lang},
                       {"docs", c.size()},
                       {"terms", c.postings().size()},
                       {"avg_doc_length", c.avg_doc_length()},
                       {"tokenizer", c.mode() == text::TokenizerMode::Bigrams ? "bigrams" : "words"}});
  }
  if (!out.empty()) write_file(out, summary.dump(2) + "\n");
  return kOk;
}

int cmd_run(const std::string& cfg_path, const Overrides& o, const std::string& question, const std::string& lang,
            bool trace) {
  config::Experiment exp(load(cfg_path, o));
  if (!exp.registry().contains(lang)) {
    throw Error(ErrorKind::UnknownLanguage, "language '" + lang + "' is not registered");
  }
  const auto ex = exp.example_for(question, lang);
  auto gen = exp.make_generator(ex);
  auto cfg = exp.config().loop;
  cfg.query_lang = lang;
  const auto r = loop::run_episode(question, cfg, exp.registry(), {gen.get(), &exp.translator(), exp.reconstructor()});
  if (trace) std::cout << loop::trace_jsonl(r);
  if (!r.answer) {
    std::cerr << "no answer: " << loop::to_string(r.terminated_by) << "\n";
    return kNoAnswer;
  }
  std::cout << *r.answer << "\n";
  return kOk;
}

int cmd_train(const std::string& cfg_path, const Overrides& o, const std::string& out) {
  config::Experiment exp(load(cfg_path, o));
  const auto dir = prepare_out_dir(out);
  const auto env = exp.training_environment();
  const auto result = clpo::train(env, exp.config().clpo);
  write_file(dir / "training_log.csv", clpo::training_log_csv(result.log));
  write_file(dir / "policy.json", policy::to_checkpoint(result.params, result.seed).dump() + "\n");
  const std::size_t n = result.log.size();
  const std::size_t w = std::min<std::size_t>(50, n);
  std::printf("updates=%zu first_window_reward=%.4f last_window_reward=%.4f\n", n, clpo::window_mean(result.log, 0, w),
              clpo::window_mean(result.log, n - w, n));
  return kOk;
}

int cmd_eval(const std::string& cfg_path, const Overrides& o, const std::string& out) {
  config::Experiment exp(load(cfg_path, o));
  const auto dir = prepare_out_dir(out);
  if (exp.dataset().empty()) throw Error(ErrorKind::ConfigError, "evaluation needs a dataset ([eval] or [synthetic])");
  const auto rep = eval::evaluate(exp.dataset(), exp.registry(), exp.config().loop, exp.eval_backends(),
                                  {config::config_hash(exp.config()), exp.config().clpo.seed});
  write_file(dir / "eval_report.csv", eval::report_csv(rep));
  write_file(dir / "eval_report.json", eval::report_json(rep).dump(2) + "\n");
  std::printf("examples=%zu fem=%.4f c3recall=%.4f failures=%zu\n", rep.overall.n, rep.overall.fem_mean,
              rep.overall.c3recall_mean, rep.failures());
  return kOk;
}

int cmd_ablate(const std::string& cfg_path, const Overrides& o, const std::string& out) {
  config::Experiment exp(load(cfg_path, o));
  const auto dir = prepare_out_dir(out);
  if (exp.dataset().empty()) throw Error(ErrorKind::ConfigError, "ablation needs a dataset ([eval] or [synthetic])");
  const auto be = exp.eval_backends();
  const auto& loop_cfg = exp.config().loop;
  const auto m = eval::ablation_matrix(exp.dataset(), exp.registry(), loop_cfg, be);
  write_file(dir / "ablation.csv", eval::ablation_csv(m));
  write_file(dir / "scaling.csv", eval::scaling_csv(eval::scaling_curve(exp.dataset(), exp.registry(), loop_cfg, be)));
  if (const auto& env = exp.synthetic_env()) {
    std::vector<dataset::QAExample> cross;
    for (const auto& ex : exp.dataset()) {
      if (env->planted.at(ex.id).cross) cross.push_back(ex);
    }
    write_file(dir / "scaling_cross.csv", eval::scaling_csv(eval::scaling_curve(cross, exp.registry(), loop_cfg, be)));
  }
  std::printf("rows=%zu cols=%zu\n", m.rows.size(), m.cols.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual multi-turn retrieval agent: indexing, episodes, training, evaluation"};
  app.require_subcommand(1);

  Overrides o;
  std::string cfg_path;
  std::string out;
  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", cfg_path, "TOML run configuration")->required();
    if (with_out) sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--seed", o.seed, "overrides [clpo] seed");
    sub->add_option("--budget", o.budget, "overrides [loop] budget");
    sub->add_option("--top-k", o.top_k, "overrides [loop] top_k");
  };

  std::vector<std::string> corpora;
  std::vector<std::string> bigram;
  std::string index_out;
  auto* index = app.add_subcommand("index", "validate corpora and summarize their collections");
  index->add_option("--corpus", corpora, "corpus JSONL file (repeatable)")->required();
  index->add_option("--out", index_out, "write the summary as JSON");
  index->add_option("--bigram-langs", bigram, "languages indexed with character bigrams");

  std::string question;
  std::string lang;
  bool trace = false;
  auto* run = app.add_subcommand("run", "answer one question");
  add_common(run, false);
  run->add_option("--question", question, "question text")->required();
  run->add_option("--lang", lang, "question language code")->required();
  run->add_flag("--trace", trace, "print the JSONL turn trace before the answer");

  auto* train = app.add_subcommand("train", "train the toy policy on the synthetic environment");
  add_common(train, true);
  train->add_option("--updates", o.updates, "overrides [clpo] updates");
  train->add_option("--lr", o.learning_rate, "overrides [clpo] learning_rate");
  train->add_option("--modes", o.modes, "overrides [clpo] modes");

  auto* ev = app.add_subcommand("eval", "evaluate on the configured dataset");
  add_common(ev, true);

  auto* ablate = app.add_subcommand("ablate", "collection-removal matrix and collection-count curve");
  add_common(ablate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*index) return cmd_index(corpora, index_out, bigram);
    if (*run) return cmd_run(cfg_path, o, question, lang, trace);
    if (*train) return cmd_train(cfg_path, o, out);
    if (*ev) return cmd_eval(cfg_path, o, out);
    if (*ablate) return cmd_ablate(cfg_path, o, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kUsage;
}
