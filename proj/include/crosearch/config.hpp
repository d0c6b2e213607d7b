#pragma once

// TOML run configuration and the experiment it describes: registry,
// dataset, translator and per-example generators. Layout in docs/formats.md.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "crosearch/backends.hpp"
#include "crosearch/clpo.hpp"
#include "crosearch/corpus.hpp"
#include "crosearch/dataset.hpp"
#include "crosearch/error.hpp"
#include "crosearch/eval.hpp"
#include "crosearch/knowledge.hpp"
#include "crosearch/policy.hpp"
#include "crosearch/retrieval_loop.hpp"
#include "crosearch/synthetic.hpp"
#include "crosearch/toy_agent.hpp"

namespace crosearch::config {

namespace fs = std::filesystem;

struct RegistryConfig {
  std::vector<std::string> corpora;  ///< resolved paths
  std::string fallback_lang = "en";
  std::set<std::string> bigram_langs;
};

struct BackendsConfig {
  std::string generator = "scripted";  ///< scripted | http | gold | oracle | toy
  std::optional<std::string> scenario;
  std::string translator = "identity";  ///< identity | dictionary | http
  std::optional<std::string> lexicon_dir;
  std::optional<std::string> endpoint;             ///< generator base URL
  std::optional<std::string> translator_endpoint;  ///< defaults to `endpoint`
  std::optional<std::string> bearer_token;
  std::int64_t timeout_seconds = 30;
  std::string reconstructor = "generator";  ///< generator | echo
};

struct RunConfig {
  std::optional<RegistryConfig> registry;
  std::optional<synthetic::SyntheticSpec> synthetic;
  loop::LoopConfig loop;
  clpo::CLPOConfig clpo;
  std::optional<std::string> checkpoint;
  std::optional<std::string> dataset;
  BackendsConfig backends;
};

namespace detail {

// Reads one table and rejects keys it was not asked about.
class Section {
 public:
  Section(const toml::table* table, std::string name, fs::path base)
      : table_(table), name_(std::move(name)), base_(std::move(base)) {}

  bool present() const { return table_ != nullptr; }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    if (!table_) return std::nullopt;
    const toml::node* n = table_->get(key);
    if (!n) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = n->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (n->is_boolean()) return n->value<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (n->is_integer()) {
        const auto v = *n->value<std::int64_t>();
        if (v < 0) fail(key, "must be non-negative");
        return static_cast<T>(v);
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (n->is_string()) return *n->value<std::string>();
    }
    fail(key, "has the wrong type");
  }

  std::optional<std::vector<std::string>> strings(const std::string& key) {
    seen_.insert(key);
    if (!table_) return std::nullopt;
    const toml::node* n = table_->get(key);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "must be an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *arr) {
      if (!item.is_string()) fail(key, "must be an array of strings");
      out.push_back(*item.value<std::string>());
    }
    return out;
  }

  const toml::table* subtable(const std::string& key) {
    seen_.insert(key);
    if (!table_) return nullptr;
    const toml::node* n = table_->get(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail(key, "must be a table");
    return n->as_table();
  }

  const toml::node* raw(const std::string& key) {
    seen_.insert(key);
    return table_ ? table_->get(key) : nullptr;
  }

  /// Path relative to the config file; must exist.
  std::optional<std::string> path(const std::string& key) {
    auto p = get<std::string>(key);
    if (!p) return std::nullopt;
    return resolve(*p, key);
  }

  std::string resolve(const std::string& p, const std::string& key) const {
    fs::path full = fs::path(p).is_absolute() ? fs::path(p) : base_ / p;
    if (!fs::exists(full)) fail(key, "path '" + full.string() + "' does not exist");
    return full.lexically_normal().string();
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, _] : *table_) {
      const std::string key(k.str());
      if (!seen_.count(key)) throw Error(ErrorKind::ConfigError, "unknown key '" + key + "' in [" + name_ + "]");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorKind::ConfigError, "[" + name_ + "] " + key + " " + what);
  }

 private:
  const toml::table* table_;
  std::string name_;
  fs::path base_;
  std::set<std::string> seen_;
};

inline const toml::table* section(const toml::table& root, const std::string& name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw Error(ErrorKind::ConfigError, "[" + name + "] must be a table");
  return n->as_table();
}

}  // namespace detail

inline RunConfig parse_config(const toml::table& root, const fs::path& base_dir) {
  static const std::set<std::string> known{"registry", "synthetic", "loop", "clpo", "policy", "eval", "backends"};
  for (const auto& [k, _] : root) {
    if (!known.count(std::string(k.str()))) {
      throw Error(ErrorKind::ConfigError, "unknown section or key '" + std::string(k.str()) + "'");
    }
  }
  RunConfig cfg;

  detail::Section reg(detail::section(root, "registry"), "registry", base_dir);
  if (reg.present()) {
    RegistryConfig rc;
    if (const toml::node* c = reg.raw("corpus")) {
      if (const auto* arr = c->as_array()) {
        for (const auto& item : *arr) {
          if (!item.is_string()) reg.fail("corpus", "must list file paths");
          rc.corpora.push_back(reg.resolve(*item.value<std::string>(), "corpus"));
        }
      } else if (const auto* tbl = c->as_table()) {
        for (const auto& [lang, item] : *tbl) {
          if (!item.is_string()) reg.fail("corpus", "must map languages to file paths");
          rc.corpora.push_back(reg.resolve(*item.value<std::string>(), "corpus." + std::string(lang.str())));
        }
      } else {
        reg.fail("corpus", "must be an array of paths or a table of language = path");
      }
    }
    if (rc.corpora.empty()) reg.fail("corpus", "must name at least one corpus file");
    if (auto v = reg.get<std::string>("fallback_lang")) rc.fallback_lang = *v;
    if (auto v = reg.strings("bigram_langs")) rc.bigram_langs = {v->begin(), v->end()};
    reg.finish();
    cfg.registry = rc;
  }

  detail::Section syn(detail::section(root, "synthetic"), "synthetic", base_dir);
  if (syn.present()) {
    synthetic::SyntheticSpec s;
    if (auto v = syn.strings("languages")) s.languages = *v;
    if (auto v = syn.strings("question_langs")) s.question_langs = *v;
    if (auto v = syn.get<std::size_t>("questions_per_lang")) s.questions_per_lang = *v;
    if (auto v = syn.get<double>("cross_fraction")) s.cross_fraction = *v;
    if (auto v = syn.get<std::size_t>("filler_docs")) s.filler_docs = *v;
    if (auto v = syn.strings("bigram_langs")) s.bigram_langs = {v->begin(), v->end()};
    if (auto v = syn.get<std::uint64_t>("seed")) s.seed = *v;
    if (const toml::table* p = syn.subtable("planting")) {
      detail::Section planting(p, "synthetic.planting", base_dir);
      for (const auto& [lang, _] : *p) {
        const std::string l(lang.str());
        s.planting[l] = *planting.strings(l);
      }
    }
    syn.finish();
    cfg.synthetic = s;
  }
  if (cfg.registry && cfg.synthetic) {
    throw Error(ErrorKind::ConfigError, "[registry] and [synthetic] are mutually exclusive");
  }

  detail::Section lp(detail::section(root, "loop"), "loop", base_dir);
  if (auto v = lp.get<std::size_t>("budget")) cfg.loop.max_budget = *v;
  if (auto v = lp.get<std::size_t>("top_k")) cfg.loop.top_k = *v;
  if (auto v = lp.get<bool>("normalize")) cfg.loop.normalize = *v;
  if (auto v = lp.get<bool>("reconstruct")) cfg.loop.reconstruct = *v;
  if (auto v = lp.get<std::size_t>("max_generations")) cfg.loop.max_generations = *v;
  if (auto v = lp.get<std::size_t>("max_new_chars")) cfg.loop.max_new_chars = *v;
  if (auto v = lp.get<std::string>("fallback_lang")) cfg.loop.fallback_lang = *v;
  lp.finish();
  if (cfg.loop.max_budget == 0) throw Error(ErrorKind::ConfigError, "[loop] budget must be >= 1");
  if (cfg.loop.top_k == 0) throw Error(ErrorKind::ConfigError, "[loop] top_k must be >= 1");

  detail::Section cl(detail::section(root, "clpo"), "clpo", base_dir);
  if (auto v = cl.get<std::size_t>("group_size")) cfg.clpo.group_size = *v;
  if (auto v = cl.get<double>("delta")) cfg.clpo.clip_delta = *v;
  if (auto v = cl.get<double>("lambda")) cfg.clpo.kl_coef = *v;
  if (auto v = cl.get<double>("learning_rate")) cfg.clpo.learning_rate = *v;
  if (auto v = cl.get<double>("advantage_epsilon")) cfg.clpo.advantage_epsilon = *v;
  if (auto v = cl.get<std::size_t>("updates")) cfg.clpo.updates = *v;
  if (auto v = cl.strings("modes")) cfg.clpo.thinking_modes = *v;
  if (auto v = cl.get<std::uint64_t>("seed")) cfg.clpo.seed = *v;
  if (auto v = cl.get<std::string>("reward")) {
    if (*v == "c3recall") {
      cfg.clpo.reward = clpo::RewardKind::C3Recall;
    } else if (*v == "fem") {
      cfg.clpo.reward = clpo::RewardKind::ExactMatch;
    } else {
      cl.fail("reward", "must be \"c3recall\" or \"fem\"");
    }
  }
  cl.finish();

  detail::Section pol(detail::section(root, "policy"), "policy", base_dir);
  if (auto v = pol.get<std::size_t>("hidden")) cfg.clpo.hidden = *v;
  if (auto v = pol.get<double>("init_scale")) cfg.clpo.init_scale = *v;
  cfg.checkpoint = pol.path("checkpoint");
  pol.finish();

  detail::Section ev(detail::section(root, "eval"), "eval", base_dir);
  cfg.dataset = ev.path("dataset");
  ev.finish();

  detail::Section be(detail::section(root, "backends"), "backends", base_dir);
  if (auto v = be.get<std::string>("generator")) cfg.backends.generator = *v;
  cfg.backends.scenario = be.path("scenario");
  if (auto v = be.get<std::string>("translator")) cfg.backends.translator = *v;
  cfg.backends.lexicon_dir = be.path("lexicon_dir");
  cfg.backends.endpoint = be.get<std::string>("endpoint");
  cfg.backends.translator_endpoint = be.get<std::string>("translator_endpoint");
  cfg.backends.bearer_token = be.get<std::string>("bearer_token");
  if (auto v = be.get<std::int64_t>("timeout_seconds")) cfg.backends.timeout_seconds = *v;
  if (auto v = be.get<std::string>("reconstructor")) cfg.backends.reconstructor = *v;
  be.finish();

  if (!cfg.registry && !cfg.synthetic) throw Error(ErrorKind::ConfigError, "config needs [registry] or [synthetic]");

  static const std::set<std::string> generators{"scripted", "http", "gold", "oracle", "toy"};
  static const std::set<std::string> translators{"identity", "dictionary", "http"};
  if (!generators.count(cfg.backends.generator)) {
    throw Error(ErrorKind::ConfigError, "[backends] generator '" + cfg.backends.generator + "' is not one of "
                                        "scripted, http, gold, oracle, toy");
  }
  if (!translators.count(cfg.backends.translator)) {
    throw Error(ErrorKind::ConfigError, "[backends] translator '" + cfg.backends.translator +
                                            "' is not one of identity, dictionary, http");
  }
  if (cfg.backends.reconstructor != "generator" && cfg.backends.reconstructor != "echo") {
    throw Error(ErrorKind::ConfigError, "[backends] reconstructor must be \"generator\" or \"echo\"");
  }
  if (cfg.backends.generator == "scripted" && !cfg.backends.scenario) {
    throw Error(ErrorKind::ConfigError, "[backends] generator \"scripted\" needs a scenario file");
  }
  if (cfg.backends.translator == "dictionary" && !cfg.backends.lexicon_dir && !cfg.synthetic) {
    throw Error(ErrorKind::ConfigError, "[backends] translator \"dictionary\" needs lexicon_dir");
  }
  const bool needs_http = cfg.backends.generator == "http" || cfg.backends.translator == "http";
  if (needs_http && !cfg.backends.endpoint && !cfg.backends.translator_endpoint) {
    throw Error(ErrorKind::ConfigError, "[backends] http backends need an endpoint");
  }
  if ((cfg.backends.generator == "oracle" || cfg.backends.generator == "toy") && !cfg.synthetic) {
    throw Error(ErrorKind::ConfigError, "[backends] generator \"" + cfg.backends.generator + "\" needs [synthetic]");
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  toml::table root;
  try {
    root = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path << ":" << e.source().begin.line << ": " << e.description();
    throw Error(ErrorKind::ConfigError, msg.str());
  }
  return parse_config(root, fs::absolute(fs::path(path)).parent_path());
}

/// Canonical JSON of the effective configuration; hashed into reports.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  if (c.registry) {
    std::vector<std::string> names;
    for (const auto& p : c.registry->corpora) names.push_back(fs::path(p).filename().string());
    j["registry"] = {{"corpus", names},
                     {"fallback_lang", c.registry->fallback_lang},
                     {"bigram_langs", c.registry->bigram_langs}};
  }
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["synthetic"] = {{"languages", s.languages},       {"question_langs", s.question_langs},
                      {"questions_per_lang", s.questions_per_lang}, {"cross_fraction", s.cross_fraction},
                      {"planting", s.planting},          {"filler_docs", s.filler_docs},
                      {"bigram_langs", s.bigram_langs},  {"seed", s.seed}};
  }
  j["loop"] = {{"budget", c.loop.max_budget},
               {"top_k", c.loop.top_k},
               {"normalize", c.loop.normalize},
               {"reconstruct", c.loop.reconstruct},
               {"max_generations", c.loop.max_generations},
               {"max_new_chars", c.loop.max_new_chars},
               {"fallback_lang", c.loop.fallback_lang ? nlohmann::json(*c.loop.fallback_lang) : nlohmann::json()}};
  j["clpo"] = {{"group_size", c.clpo.group_size},
               {"delta", c.clpo.clip_delta},
               {"lambda", c.clpo.kl_coef},
               {"learning_rate", c.clpo.learning_rate},
               {"advantage_epsilon", c.clpo.advantage_epsilon},
               {"updates", c.clpo.updates},
               {"modes", c.clpo.thinking_modes},
               {"seed", c.clpo.seed},
               {"reward", c.clpo.reward == clpo::RewardKind::C3Recall ? "c3recall" : "fem"}};
  j["policy"] = {{"hidden", c.clpo.hidden}, {"init_scale", c.clpo.init_scale}};
  j["backends"] = {{"generator", c.backends.generator},
                   {"translator", c.backends.translator},
                   {"reconstructor", c.backends.reconstructor}};
  return j;
}

inline std::string config_hash(const RunConfig& c) { return eval::fnv1a_hex(to_json(c).dump()); }

/// Everything a command needs, materialized from a RunConfig.
class Experiment {
 public:
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  explicit Experiment(RunConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.synthetic) {
      env_ = synthetic::build_synthetic_env(*cfg_.synthetic);
      registry_ = env_->registry;
      dataset_ = env_->dataset;
    } else {
      std::vector<corpus::Document> docs;
      for (const auto& p : cfg_.registry->corpora) {
        auto part = corpus::load_corpus_jsonl(p);
        docs.insert(docs.end(), part.begin(), part.end());
      }
      registry_ = corpus::build_registry(docs, cfg_.registry->fallback_lang, cfg_.registry->bigram_langs);
      if (!registry_.contains(registry_.fallback_lang())) {
        throw Error(ErrorKind::UnknownLanguage, "fallback language '" + registry_.fallback_lang() + "' has no corpus");
      }
    }
    if (cfg_.dataset) dataset_ = dataset::load_dataset(*cfg_.dataset);

    const auto& be = cfg_.backends;
    if (be.translator == "identity") {
      translator_ = std::make_unique<backends::IdentityTranslator>();
    } else if (be.translator == "dictionary") {
      if (be.lexicon_dir) {
        translator_ = std::make_unique<backends::DictionaryTranslator>(backends::load_lexicon_dir(*be.lexicon_dir));
      } else {
        translator_ = std::make_unique<backends::DictionaryTranslator>(env_->translator);
      }
    } else {
      translator_ = std::make_unique<backends::HttpTranslator>(endpoint(be.translator_endpoint ? be.translator_endpoint
                                                                                                : be.endpoint));
    }
    if (be.scenario) scenario_ = backends::load_scenario_jsonl(*be.scenario);
    if (be.reconstructor == "echo") reconstructor_ = std::make_unique<knowledge::EvidenceEchoReconstructor>();
    if (be.generator == "toy") {
      layout_.emplace(registry_.languages(), cfg_.loop.max_budget);
      params_ = cfg_.checkpoint ? policy::load_checkpoint(*cfg_.checkpoint)
                                : clpo::initial_parameters(training_environment(), cfg_.clpo);
    }
  }

  const RunConfig& config() const noexcept { return cfg_; }
  RunConfig& config() noexcept { return cfg_; }
  const corpus::CollectionRegistry& registry() const noexcept { return registry_; }
  const std::vector<dataset::QAExample>& dataset() const noexcept { return dataset_; }
  backends::Translator& translator() { return *translator_; }
  const std::optional<synthetic::SyntheticEnv>& synthetic_env() const noexcept { return env_; }

  /// Generator for one question. Toy and oracle generators need the question
  /// to be part of the synthetic dataset.
  std::unique_ptr<backends::Generator> make_generator(const dataset::QAExample& ex) const {
    const auto& kind = cfg_.backends.generator;
    if (kind == "scripted") return std::make_unique<backends::ScriptedGenerator>(scenario_);
    if (kind == "http") return std::make_unique<backends::HttpGenerator>(endpoint(cfg_.backends.endpoint));
    if (kind == "gold") {
      return std::make_unique<backends::ScriptedGenerator>(
          std::vector<std::string>{"<answer>" + ex.gold_aliases.front() + "</answer>"});
    }
    const auto it = env_->tasks.find(ex.id);
    if (it == env_->tasks.end()) {
      throw Error(ErrorKind::ConfigError, "question '" + ex.question + "' is not part of the synthetic dataset");
    }
    if (kind == "oracle") return std::make_unique<toy::OracleAnswerer>(it->second);
    return std::make_unique<toy::ToyPolicyGenerator>(*params_, *layout_, it->second, ex.lang,
                                                     policy::derive_seed(cfg_.clpo.seed, 0x72756e));
  }

  /// Finds a dataset example by question text and language, or wraps a free
  /// question (gold unknown) into one.
  dataset::QAExample example_for(const std::string& question, const std::string& lang) const {
    for (const auto& ex : dataset_) {
      if (ex.question == question && ex.lang == lang) return ex;
    }
    return {"adhoc", lang, question, {""}, {}};
  }

  eval::EvalBackends eval_backends() {
    return {[this](const dataset::QAExample& ex) { return make_generator(ex); }, translator_.get(),
            reconstructor_.get()};
  }

  backends::Generator* reconstructor() { return reconstructor_.get(); }

  clpo::TrainingEnvironment training_environment() {
    if (!env_) throw Error(ErrorKind::ConfigError, "training needs a [synthetic] environment");
    return {&registry_, &dataset_, &env_->tasks, translator_.get(), cfg_.loop};
  }

 private:
  backends::HttpEndpoint endpoint(const std::optional<std::string>& url) const {
    if (!url) throw Error(ErrorKind::ConfigError, "[backends] endpoint is required for http backends");
    return {*url, cfg_.backends.bearer_token, std::chrono::seconds(cfg_.backends.timeout_seconds)};
  }

  RunConfig cfg_;
  std::optional<synthetic::SyntheticEnv> env_;
  corpus::CollectionRegistry registry_;
  std::vector<dataset::QAExample> dataset_;
  std::unique_ptr<backends::Translator> translator_;
  std::unique_ptr<backends::Generator> reconstructor_;
  std::vector<std::string> scenario_;
  std::optional<policy::PolicyParameters> params_;
  std::optional<toy::FeatureLayout> layout_;
};

}  // namespace crosearch::config
