#pragma once

// End-to-end evaluation (fEM and c3Recall per language), the collection-count
// scaling curve and the collection-removal ablation matrix.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crosearch/backends.hpp"
#include "crosearch/corpus.hpp"
#include "crosearch/dataset.hpp"
#include "crosearch/error.hpp"
#include "crosearch/metrics.hpp"
#include "crosearch/retrieval_loop.hpp"

namespace crosearch::eval {

/// Builds the generator for one example; called once per episode.
using GeneratorFactory = std::function<std::unique_ptr<backends::Generator>(const dataset::QAExample&)>;

struct EvalBackends {
  GeneratorFactory generator;
  backends::Translator* translator = nullptr;
  backends::Generator* reconstructor = nullptr;  ///< null: the example's generator
};

struct ExampleScore {
  std::string id;
  std::string lang;
  std::optional<std::string> answer;
  int fem = 0;
  double c3recall = 0.0;
  std::optional<std::string> error;  ///< set when the episode failed
};

struct LangRow {
  std::string lang;
  std::size_t n = 0;
  double fem_mean = 0.0;
  double c3recall_mean = 0.0;
};

struct RunMetadata {
  std::string config_hash;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<LangRow> rows;  ///< one per question language, ascending code
  LangRow overall;            ///< "ALL": mean over examples
  LangRow macro;              ///< "AVG": mean over language rows
  RunMetadata metadata;
  std::vector<ExampleScore> examples;

  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [](const ExampleScore& e) { return e.error.has_value(); }));
  }
};

/// Runs one episode and scores it. Library errors are caught and scored 0.
inline ExampleScore score_example(const dataset::QAExample& ex, const corpus::CollectionRegistry& registry,
                                  const loop::LoopConfig& base, const EvalBackends& be) {
  ExampleScore s;
  s.id = ex.id;
  s.lang = ex.lang;
  try {
    auto gen = be.generator(ex);
    loop::LoopConfig cfg = base;
    cfg.query_lang = ex.lang;
    const auto r = loop::run_episode(ex.question, cfg, registry, {gen.get(), be.translator, be.reconstructor});
    s.answer = r.answer;
  } catch (const Error& e) {
    s.error = e.what();
    return s;
  }
  const std::string pred = s.answer.value_or("");
  s.fem = metrics::fem(pred, ex.gold_aliases);
  s.c3recall = metrics::best_alias_recall(pred, ex.gold_aliases);
  return s;
}

inline EvalReport aggregate(std::vector<ExampleScore> scores, RunMetadata metadata = {}) {
  EvalReport rep;
  rep.metadata = std::move(metadata);
  std::map<std::string, LangRow> by_lang;
  for (const auto& s : scores) {
    auto& row = by_lang[s.lang];
    row.lang = s.lang;
    ++row.n;
    row.fem_mean += s.fem;
    row.c3recall_mean += s.c3recall;
    ++rep.overall.n;
    rep.overall.fem_mean += s.fem;
    rep.overall.c3recall_mean += s.c3recall;
  }
  for (auto& [lang, row] : by_lang) {
    row.fem_mean /= static_cast<double>(row.n);
    row.c3recall_mean /= static_cast<double>(row.n);
    rep.rows.push_back(row);
    rep.macro.fem_mean += row.fem_mean;
    rep.macro.c3recall_mean += row.c3recall_mean;
    rep.macro.n += row.n;
  }
  rep.overall.lang = "ALL";
  if (rep.overall.n) {
    rep.overall.fem_mean /= static_cast<double>(rep.overall.n);
    rep.overall.c3recall_mean /= static_cast<double>(rep.overall.n);
  }
  rep.macro.lang = "AVG";
  if (!rep.rows.empty()) {
    rep.macro.fem_mean /= static_cast<double>(rep.rows.size());
    rep.macro.c3recall_mean /= static_cast<double>(rep.rows.size());
  }
  rep.examples = std::move(scores);
  return rep;
}

inline EvalReport evaluate(const std::vector<dataset::QAExample>& data, const corpus::CollectionRegistry& registry,
                           const loop::LoopConfig& config, const EvalBackends& be, RunMetadata metadata = {}) {
  std::vector<ExampleScore> scores;
  scores.reserve(data.size());
  for (const auto& ex : data) scores.push_back(score_example(ex, registry, config, be));
  return aggregate(std::move(scores), std::move(metadata));
}

/// [L, en, remaining languages ascending], restricted to `available`.
inline std::vector<std::string> default_order(const std::string& query_lang, const std::vector<std::string>& available) {
  std::vector<std::string> out{query_lang};
  if (query_lang != "en" && std::find(available.begin(), available.end(), "en") != available.end()) out.push_back("en");
  std::vector<std::string> rest;
  for (const auto& l : available) {
    if (std::find(out.begin(), out.end(), l) == out.end()) rest.push_back(l);
  }
  std::sort(rest.begin(), rest.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

struct ScalingPoint {
  std::size_t collections = 0;
  double c3recall_mean = 0.0;
  double fem_mean = 0.0;
};

/// For n = 1..|languages|, evaluates every question with only the first n
/// collections of its order registered. The order of a question is its own
/// language followed by `order` (default: en, then the rest ascending).
inline std::vector<ScalingPoint> scaling_curve(const std::vector<dataset::QAExample>& data,
                                               const corpus::CollectionRegistry& registry,
                                               const loop::LoopConfig& config, const EvalBackends& be,
                                               const std::vector<std::string>& order = {}) {
  const auto langs = registry.languages();
  if (!order.empty()) {
    std::set<std::string> a(order.begin(), order.end());
    if (a != std::set<std::string>(langs.begin(), langs.end()) || a.size() != order.size()) {
      throw Error(ErrorKind::ConfigError, "scaling order must be a permutation of the registered languages");
    }
  }
  std::vector<ScalingPoint> curve;
  for (std::size_t n = 1; n <= langs.size(); ++n) {
    std::vector<ExampleScore> scores;
    for (const auto& ex : data) {
      if (!registry.contains(ex.lang)) {
        throw Error(ErrorKind::UnknownLanguage, "question language '" + ex.lang + "' is not registered");
      }
      std::vector<std::string> full{ex.lang};
      const auto tail = order.empty() ? default_order(ex.lang, langs) : order;
      for (const auto& l : tail) {
        if (l != ex.lang) full.push_back(l);
      }
      full.resize(n);
      scores.push_back(score_example(ex, registry.subset(full), config, be));
    }
    const auto rep = aggregate(std::move(scores));
    curve.push_back({n, rep.overall.c3recall_mean, rep.overall.fem_mean});
  }
  return curve;
}

struct AblationMatrix {
  std::vector<std::string> rows;  ///< query languages
  std::vector<std::string> cols;  ///< removed collection languages
  std::vector<std::vector<double>> cells;  ///< full minus reduced mean c3Recall

  double at(const std::string& row, const std::string& col) const {
    const auto r = std::find(rows.begin(), rows.end(), row);
    const auto c = std::find(cols.begin(), cols.end(), col);
    if (r == rows.end() || c == cols.end()) throw std::out_of_range("no ablation cell " + row + "/" + col);
    return cells[static_cast<std::size_t>(r - rows.begin())][static_cast<std::size_t>(c - cols.begin())];
  }
};

inline AblationMatrix ablation_matrix(const std::vector<dataset::QAExample>& data,
                                      const corpus::CollectionRegistry& registry, const loop::LoopConfig& config,
                                      const EvalBackends& be) {
  const auto langs = registry.languages();
  if (langs.size() < 2) throw Error(ErrorKind::ConfigError, "ablation needs at least two registered languages");
  auto per_lang = [&](const corpus::CollectionRegistry& reg) {
    std::map<std::string, double> out;
    for (const auto& row : evaluate(data, reg, config, be).rows) out[row.lang] = row.c3recall_mean;
    return out;
  };
  const auto full = per_lang(registry);
  AblationMatrix m;
  for (const auto& [lang, _] : full) m.rows.push_back(lang);
  m.cols = langs;
  m.cells.assign(m.rows.size(), std::vector<double>(m.cols.size(), 0.0));
  for (std::size_t c = 0; c < m.cols.size(); ++c) {
    const auto reduced = per_lang(registry.without(m.cols[c]));
    for (std::size_t r = 0; r < m.rows.size(); ++r) m.cells[r][c] = full.at(m.rows[r]) - reduced.at(m.rows[r]);
  }
  return m;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// lang,n,fem_mean,c3recall_mean; per-language rows, then ALL and AVG.
inline std::string report_csv(const EvalReport& rep) {
  std::string out = "lang,n,fem_mean,c3recall_mean\n";
  auto line = [&](const LangRow& r) {
    out += r.lang + "," + std::to_string(r.n) + "," + fmt(r.fem_mean) + "," + fmt(r.c3recall_mean) + "\n";
  };
  for (const auto& r : rep.rows) line(r);
  line(rep.overall);
  line(rep.macro);
  return out;
}

inline nlohmann::json report_json(const EvalReport& rep) {
  auto row = [](const LangRow& r) {
    return nlohmann::json{{"lang", r.lang}, {"n", r.n}, {"fem_mean", r.fem_mean}, {"c3recall_mean", r.c3recall_mean}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) rows.push_back(row(r));
  nlohmann::json examples = nlohmann::json::array();
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& e : rep.examples) {
    examples.push_back({{"id", e.id},
                        {"lang", e.lang},
                        {"answer", e.answer ? nlohmann::json(*e.answer) : nlohmann::json(nullptr)},
                        {"fem", e.fem},
                        {"c3recall", e.c3recall}});
    if (e.error) failures.push_back({{"id", e.id}, {"error", *e.error}});
  }
  return {{"rows", rows},
          {"overall", row(rep.overall)},
          {"macro", row(rep.macro)},
          {"metadata", {{"config_hash", rep.metadata.config_hash}, {"seed", rep.metadata.seed}, {"failures", failures}}},
          {"examples", examples}};
}

/// Header row "query_lang,<removed langs...>", one row per query language.
inline std::string ablation_csv(const AblationMatrix& m) {
  std::string out = "query_lang";
  for (const auto& c : m.cols) out += "," + c;
  out += "\n";
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out += m.rows[r];
    for (double v : m.cells[r]) out += "," + fmt(v);
    out += "\n";
  }
  return out;
}

inline std::string scaling_csv(const std::vector<ScalingPoint>& curve) {
  std::string out = "collections,c3recall_mean,fem_mean\n";
  for (const auto& p : curve) out += std::to_string(p.collections) + "," + fmt(p.c3recall_mean) + "," + fmt(p.fem_mean) + "\n";
  return out;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace crosearch::eval
