#pragma once

// Synthetic cross-lingual QA environment. Every language writes with its own
// alphabet, so a string in one language shares no character with another;
// entity names use a separate alphabet common to all languages. Each
// question's fact is planted in exactly one collection, either the query
// language's own or another one.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crosearch/backends.hpp"
#include "crosearch/corpus.hpp"
#include "crosearch/dataset.hpp"
#include "crosearch/error.hpp"
#include "crosearch/metrics.hpp"
#include "crosearch/policy.hpp"
#include "crosearch/text.hpp"
#include "crosearch/toy_agent.hpp"

namespace crosearch::synthetic {

struct SyntheticSpec {
  std::vector<std::string> languages{"en", "fr", "th", "ar"};
  std::vector<std::string> question_langs;  ///< empty: every language
  std::size_t questions_per_lang = 4;
  double cross_fraction = 0.5;
  /// Query language -> languages that may hold its cross-lingual facts, used
  /// round-robin. Missing entries default to every other language.
  std::map<std::string, std::vector<std::string>> planting;
  std::size_t filler_docs = 1;
  std::set<std::string> bigram_langs{"th"};
  std::uint64_t seed = 7;
};

struct Planted {
  std::string lang;
  std::string doc_id;
  bool cross = false;
};

struct SyntheticEnv {
  corpus::CollectionRegistry registry;
  std::vector<dataset::QAExample> dataset;
  std::map<std::string, toy::ToyTask> tasks;  ///< by example id
  std::map<std::string, Planted> planted;     ///< by example id
  backends::DictionaryTranslator translator;
  std::vector<corpus::Document> documents;
};

namespace detail {

struct Alphabet {
  std::vector<std::u32string> consonants;
  std::vector<std::u32string> vowels;  ///< empty: letters drawn uniformly
};

inline std::vector<std::u32string> letters(std::u32string_view s) {
  std::vector<std::u32string> out;
  for (char32_t c : s) out.emplace_back(1, c);
  return out;
}

inline std::vector<std::u32string> letter_range(char32_t first, char32_t last, std::u32string_view skip = U"") {
  std::vector<std::u32string> out;
  for (char32_t c = first; c <= last; ++c) {
    if (skip.find(c) == std::u32string_view::npos) out.emplace_back(1, c);
  }
  return out;
}

inline const std::map<std::string, Alphabet>& alphabets() {
  static const std::map<std::string, Alphabet> table{
      {"en", {letters(U"bdkmnrt"), letters(U"ao")}},
      {"fr", {letters(U"fglpsvz"), letters(U"eiu")}},
      {"th", {letter_range(U'ก', U'ฮ'), {}}},
      {"ar", {letter_range(U'ب', U'ي', U"ػؼؽؾؿـ"), {}}},
      {"ru", {letter_range(U'а', U'я'), {}}},
      {"el", {letter_range(U'α', U'ω', U"ς"), {}}},
  };
  return table;
}

inline const Alphabet& entity_alphabet() {
  static const Alphabet a{letters(U"chjqwxy"), {}};
  return a;
}

inline std::string word(const Alphabet& a, std::size_t len, policy::Rng& rng) {
  std::u32string w;
  for (std::size_t i = 0; i < len; ++i) {
    const auto& pool = (!a.vowels.empty() && i % 2 == 1) ? a.vowels : a.consonants;
    w += pool[rng.below(pool.size())];
  }
  return text::encode(w);
}

class Words {
 public:
  Words(const Alphabet& a, policy::Rng& rng) : alphabet_(a), rng_(rng) {}
  std::string fresh(std::size_t len) {
    for (int tries = 0; tries < 1000; ++tries) {
      auto w = word(alphabet_, len, rng_);
      if (used_.insert(w).second) return w;
    }
    throw Error(ErrorKind::SpecError, "alphabet too small for the requested vocabulary");
  }

 private:
  const Alphabet& alphabet_;
  policy::Rng& rng_;
  std::set<std::string> used_;
};

inline void validate(const SyntheticSpec& shape, const std::vector<std::string>& qlangs) {
  if (shape.languages.empty()) throw Error(ErrorKind::SpecError, "no synthetic languages listed");
  std::set<std::string> langs;
  for (const auto& l : shape.languages) {
    if (!alphabets().count(l)) throw Error(ErrorKind::SpecError, "no synthetic alphabet for language '" + l + "'");
    if (!langs.insert(l).second) throw Error(ErrorKind::SpecError, "language '" + l + "' listed twice");
  }
  for (const auto& l : qlangs) {
    if (!langs.count(l)) throw Error(ErrorKind::SpecError, "question language '" + l + "' is not in languages");
  }
  if (shape.questions_per_lang == 0) throw Error(ErrorKind::SpecError, "questions_per_lang must be >= 1");
  if (!(shape.cross_fraction >= 0.0 && shape.cross_fraction <= 1.0)) {
    throw Error(ErrorKind::SpecError, "cross_fraction must lie in [0, 1]");
  }
  for (const auto& [l, targets] : shape.planting) {
    if (!langs.count(l)) throw Error(ErrorKind::SpecError, "planting names unknown language '" + l + "'");
    if (targets.empty()) throw Error(ErrorKind::SpecError, "planting for '" + l + "' is empty");
    for (const auto& t : targets) {
      if (!langs.count(t) || t == l) {
        throw Error(ErrorKind::SpecError, "planting target '" + t + "' for '" + l + "' must be another listed language");
      }
    }
  }
  for (const auto& l : shape.bigram_langs) {
    if (!langs.count(l)) throw Error(ErrorKind::SpecError, "bigram language '" + l + "' is not in languages");
  }
}

inline std::vector<std::string> planting_targets(const SyntheticSpec& shape, const std::string& l) {
  if (auto it = shape.planting.find(l); it != shape.planting.end()) return it->second;
  std::vector<std::string> out;
  for (const auto& x : shape.languages) {
    if (x != l) out.push_back(x);
  }
  return out;
}

// One attempt; returns false when a planted fact is not ranked first by its
// own question.
inline bool try_build(const SyntheticSpec& shape, const std::vector<std::string>& qlangs, std::uint64_t seed,
                      SyntheticEnv& env) {
  policy::Rng rng(seed);
  std::map<std::string, Words> words;
  for (const auto& l : shape.languages) words.emplace(l, Words(alphabets().at(l), rng));
  Words entities(entity_alphabet(), rng);

  // a concept has one surface word per language
  using Concept = std::map<std::string, std::string>;
  auto concept_words = [&](std::size_t len) {
    Concept c;
    for (const auto& l : shape.languages) c[l] = words.at(l).fresh(len);
    return c;
  };
  std::vector<Concept> concepts;
  const Concept qword = concept_words(4);
  concepts.push_back(qword);
  std::vector<Concept> relations;
  for (int i = 0; i < 6; ++i) relations.push_back(concept_words(6));
  concepts.insert(concepts.end(), relations.begin(), relations.end());
  std::vector<Concept> filler;
  for (int i = 0; i < 8; ++i) filler.push_back(concept_words(5));
  concepts.insert(concepts.end(), filler.begin(), filler.end());

  std::map<std::string, std::vector<corpus::Document>> docs;
  auto add_doc = [&](const std::string& lang, const std::string& title, const std::string& body) {
    auto& list = docs[lang];
    corpus::Document d{lang + "-" + std::to_string(list.size() + 1), lang, title, body};
    list.push_back(d);
    return d.id;
  };
  auto filler_text = [&](const std::string& lang, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + filler[rng.below(filler.size())].at(lang);
    return s;
  };

  env = SyntheticEnv{};
  // cross-lingual questions are spread evenly: question q is cross-lingual
  // when floor((q + 1) f) > floor(q f)
  auto is_cross = [&](std::size_t q) {
    return std::floor(static_cast<double>(q + 1) * shape.cross_fraction) >
           std::floor(static_cast<double>(q) * shape.cross_fraction);
  };
  for (const auto& lang : qlangs) {
    const auto targets = planting_targets(shape, lang);
    std::size_t n_cross = 0;
    for (std::size_t q = 0; q < shape.questions_per_lang; ++q) {
      const bool cross = is_cross(q);
      if (cross && targets.empty()) throw Error(ErrorKind::SpecError, "cross-lingual questions need a second language");
      const std::string host = cross ? targets[n_cross++ % targets.size()] : lang;
      const std::string entity = entities.fresh(5);
      const std::size_t r = rng.below(relations.size());
      const Concept answer = concept_words(8);
      concepts.push_back(answer);

      const std::string fact = entity + " " + relations[r].at(host) + " " + answer.at(host) + " .";
      const std::string doc_id = add_doc(host, entity, fact + " " + filler_text(host, 2));
      if (cross) {
        const std::size_t r2 = (r + 1 + rng.below(relations.size() - 1)) % relations.size();
        const Concept other = concept_words(8);
        concepts.push_back(other);
        add_doc(lang, entity,
                entity + " " + relations[r2].at(lang) + " " + other.at(lang) + " . " + filler_text(lang, 2));
      }

      dataset::QAExample ex;
      ex.id = lang + "-q" + std::to_string(q + 1);
      ex.lang = lang;
      ex.question = qword.at(lang) + " " + relations[r].at(lang) + " " + entity;
      ex.gold_aliases = {answer.at(lang)};
      for (const auto& [l, w] : answer) ex.answers_by_lang[l] = {w};

      toy::ToyTask task;
      task.question = ex.question;
      task.gold = answer.at(lang);
      task.answer_prefix = entity + " " + relations[r].at(lang) + " ";
      for (const auto& mode : shape.languages) {
        if (mode != lang) {
          task.memory[mode] = words.at(mode).fresh(8);
          continue;
        }
        // a near miss sharing half of the gold's trigrams
        const auto gold = text::decode(task.gold);
        std::string guess;
        for (int tries = 0; tries < 200 && guess.empty(); ++tries) {
          auto candidate = text::decode(words.at(lang).fresh(8));
          std::u32string g = gold.substr(0, 5) + candidate.substr(5);
          if (metrics::char_3gram_recall(text::encode(g), task.gold) == 0.5) guess = text::encode(g);
        }
        if (guess.empty()) return false;
        task.memory[mode] = guess;
      }
      env.planted[ex.id] = Planted{host, doc_id, cross};
      env.tasks[ex.id] = task;
      env.dataset.push_back(std::move(ex));
    }
  }
  for (const auto& lang : shape.languages) {
    for (std::size_t i = 0; i < shape.filler_docs; ++i) add_doc(lang, "notes", filler_text(lang, 5));
  }

  for (const auto& lang : shape.languages) {
    for (const auto& d : docs[lang]) env.documents.push_back(d);
  }
  const std::string fallback =
      std::find(shape.languages.begin(), shape.languages.end(), "en") != shape.languages.end() ? "en" : shape.languages[0];
  env.registry = corpus::build_registry(env.documents, fallback, shape.bigram_langs);

  for (const auto& src : shape.languages) {
    for (const auto& tgt : shape.languages) {
      if (src == tgt) continue;
      backends::Lexicon lex;
      for (const auto& c : concepts) lex[c.at(src)] = c.at(tgt);
      env.translator.add_lexicon(src, tgt, std::move(lex));
    }
  }

  for (const auto& ex : env.dataset) {
    const auto& p = env.planted.at(ex.id);
    const auto hits = env.registry.collection(p.lang).search(ex.question, 3);
    if (hits.empty() || hits.front().doc_id != p.doc_id) return false;
    if (hits.size() > 1 && hits[1].score == hits[0].score) return false;
    const auto& task = env.tasks.at(ex.id);
    for (const auto& [mode, guess] : task.memory) {
      if (mode != ex.lang && metrics::char_3gram_recall(guess, task.gold) != 0.0) return false;
    }
    if (metrics::char_3gram_recall(std::string(toy::kNoAnswer), task.gold) != 0.0) return false;
  }
  return true;
}

}  // namespace detail

/// Deterministic in `shape.seed`. Retries with derived seeds until every
/// planted fact ranks first for its own question.
inline SyntheticEnv build_synthetic_env(const SyntheticSpec& shape) {
  const std::vector<std::string> qlangs = shape.question_langs.empty() ? shape.languages : shape.question_langs;
  detail::validate(shape, qlangs);
  SyntheticEnv env;
  for (std::uint64_t attempt = 0; attempt < 32; ++attempt) {
    if (detail::try_build(shape, qlangs, policy::derive_seed(shape.seed, attempt), env)) return env;
  }
  throw Error(ErrorKind::SpecError, "could not build a synthetic environment with retrievable facts");
}

/// Corpus as JSONL lines, for export.
inline std::string corpus_jsonl(const SyntheticEnv& env) {
  std::string out;
  for (const auto& d : env.documents) {
    out += nlohmann::json{{"id", d.id}, {"lang", d.lang}, {"title", d.title}, {"text", d.text}}.dump() + "\n";
  }
  return out;
}

}  // namespace crosearch::synthetic
