#pragma once

// Per-language document collections with Okapi BM25 search, and the registry
// mapping each language code to its search operator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "crosearch/error.hpp"
#include "crosearch/text.hpp"

namespace crosearch::corpus {

struct Document {
  std::string id;
  std::string lang;
  std::string title;
  std::string text;
  bool operator==(const Document&) const = default;
};

struct Posting {
  std::string doc_id;
  std::uint32_t tf = 0;
  bool operator==(const Posting&) const = default;
};

struct ScoredHit {
  std::string doc_id;
  std::string lang;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
  bool operator==(const ScoredHit&) const = default;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Non-negative BM25 idf, ln(1 + (N - df + 0.5) / (df + 0.5)).
inline double bm25_idf(std::size_t num_docs, std::size_t df) {
  const double n = static_cast<double>(num_docs);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

inline double bm25_term(double tf, double doc_len, double avg_doc_len, const Bm25Params& p) {
  const double norm = avg_doc_len > 0.0 ? doc_len / avg_doc_len : 0.0;
  return tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

/// Immutable after build.
class Collection {
 public:
  static Collection build(std::vector<Document> docs, std::string lang,
                          text::TokenizerMode mode = text::TokenizerMode::Words) {
    Collection c;
    c.lang_ = std::move(lang);
    c.mode_ = mode;
    double total = 0.0;
    for (auto& doc : docs) {
      if (doc.id.empty()) throw Error(ErrorKind::DuplicateId, "document id must be non-empty");
      if (doc.lang != c.lang_) {
        throw Error(ErrorKind::LanguageMismatch,
                    "document '" + doc.id + "' has lang '" + doc.lang + "', collection is '" + c.lang_ + "'");
      }
      if (c.docs_.count(doc.id)) throw Error(ErrorKind::DuplicateId, "duplicate document id '" + doc.id + "'");
      const auto tokens = text::tokenize(doc.text, mode);
      std::map<std::string, std::uint32_t> tf;
      for (const auto& t : tokens) ++tf[t];
      for (const auto& [term, count] : tf) c.postings_[term].push_back(Posting{doc.id, count});
      c.doc_lengths_[doc.id] = tokens.size();
      total += static_cast<double>(tokens.size());
      const std::string id = doc.id;
      c.docs_.emplace(id, std::move(doc));
    }
    c.avg_doc_length_ = c.docs_.empty() ? 0.0 : total / static_cast<double>(c.docs_.size());
    return c;
  }

  const std::string& lang() const noexcept { return lang_; }
  text::TokenizerMode mode() const noexcept { return mode_; }
  const std::map<std::string, Document>& docs() const noexcept { return docs_; }
  const std::map<std::string, std::vector<Posting>>& postings() const noexcept { return postings_; }
  const std::map<std::string, std::size_t>& doc_lengths() const noexcept { return doc_lengths_; }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  std::size_t size() const noexcept { return docs_.size(); }

  const Document* find(std::string_view id) const {
    auto it = docs_.find(std::string(id));
    return it == docs_.end() ? nullptr : &it->second;
  }

  /// Top-k by BM25 over the distinct query terms; ties by ascending doc id.
  std::vector<ScoredHit> search(std::string_view query, std::size_t k, const Bm25Params& params = {}) const {
    if (k == 0) throw std::invalid_argument("search: k must be >= 1");
    const auto raw_terms = text::tokenize(query, mode_);
    if (raw_terms.empty()) throw Error(ErrorKind::EmptyQuery, "query has no indexable terms");
    const std::set<std::string> terms(raw_terms.begin(), raw_terms.end());

    std::map<std::string, double> scores;
    for (const auto& term : terms) {
      auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      const double idf = bm25_idf(docs_.size(), it->second.size());
      for (const auto& p : it->second) {
        const double dl = static_cast<double>(doc_lengths_.at(p.doc_id));
        scores[p.doc_id] += idf * bm25_term(static_cast<double>(p.tf), dl, avg_doc_length_, params);
      }
    }
    std::vector<ScoredHit> hits;
    hits.reserve(scores.size());
    for (const auto& [id, s] : scores) {
      if (s > 0.0) hits.push_back(ScoredHit{id, lang_, s, 0});
    }
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.doc_id < b.doc_id;
    });
    if (hits.size() > k) hits.resize(k);
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
    return hits;
  }

 private:
  std::string lang_;
  text::TokenizerMode mode_ = text::TokenizerMode::Words;
  std::map<std::string, Document> docs_;
  std::map<std::string, std::vector<Posting>> postings_;
  std::map<std::string, std::size_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
};

/// ω_l: (query, k) -> ranked hits from one language's collection.
using SearchOperator = std::function<std::vector<ScoredHit>(std::string_view query, std::size_t k)>;

/// Language code -> collection and search operator. Build fully, then share
/// read-only; mutation is not synchronized with searches.
class CollectionRegistry {
 public:
  CollectionRegistry() = default;
  explicit CollectionRegistry(std::string fallback_lang) : fallback_(std::move(fallback_lang)) {}

  void add(Collection collection) {
    auto shared = std::make_shared<const Collection>(std::move(collection));
    const std::string lang = shared->lang();
    entries_[lang] = Entry{shared, [shared](std::string_view q, std::size_t k) { return shared->search(q, k); }};
  }

  /// Replaces the operator for an already registered language, e.g. to wrap
  /// it with instrumentation or swap in a different retriever.
  void set_operator(const std::string& lang, SearchOperator op) {
    auto it = entries_.find(lang);
    if (it == entries_.end()) throw Error(ErrorKind::UnknownLanguage, "language '" + lang + "' is not registered");
    it->second.op = std::move(op);
  }

  SearchOperator get(const std::string& lang) const {
    auto it = entries_.find(lang);
    if (it == entries_.end()) throw Error(ErrorKind::UnknownLanguage, "language '" + lang + "' is not registered");
    return it->second.op;
  }

  const Collection& collection(const std::string& lang) const {
    auto it = entries_.find(lang);
    if (it == entries_.end()) throw Error(ErrorKind::UnknownLanguage, "language '" + lang + "' is not registered");
    return *it->second.collection;
  }

  const Document* document(const std::string& lang, std::string_view id) const {
    auto it = entries_.find(lang);
    return it == entries_.end() ? nullptr : it->second.collection->find(id);
  }

  bool contains(const std::string& lang) const { return entries_.count(lang) != 0; }

  /// Registered languages in ascending code order.
  std::vector<std::string> languages() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [lang, _] : entries_) out.push_back(lang);
    return out;
  }

  const std::string& fallback_lang() const noexcept { return fallback_; }
  void set_fallback_lang(std::string lang) { fallback_ = std::move(lang); }

  /// Registry restricted to `langs` (in that order of preference). If the
  /// fallback language is dropped, the first kept language takes its place.
  CollectionRegistry subset(const std::vector<std::string>& langs) const {
    CollectionRegistry out(fallback_);
    for (const auto& l : langs) {
      auto it = entries_.find(l);
      if (it == entries_.end()) throw Error(ErrorKind::UnknownLanguage, "language '" + l + "' is not registered");
      out.entries_[l] = it->second;
    }
    if (!out.contains(fallback_) && !langs.empty()) out.fallback_ = langs.front();
    return out;
  }

  CollectionRegistry without(const std::string& lang) const {
    std::vector<std::string> keep;
    if (contains(fallback_) && fallback_ != lang) keep.push_back(fallback_);
    for (const auto& l : languages()) {
      if (l != lang && l != fallback_) keep.push_back(l);
    }
    auto out = subset(keep);
    return out;
  }

 private:
  struct Entry {
    std::shared_ptr<const Collection> collection;
    SearchOperator op;
  };
  std::map<std::string, Entry> entries_;
  std::string fallback_ = "en";
};

/// Reads a JSONL corpus: one {"id","lang","title","text"} object per line.
/// Blank lines are skipped.
inline std::vector<Document> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open corpus file '" + path + "'");
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError(path, lineno, "expected a JSON object");
    Document d;
    for (auto [key, field] : {std::pair{"id", &d.id}, {"lang", &d.lang}, {"title", &d.title}, {"text", &d.text}}) {
      if (!j.contains(key) || !j[key].is_string()) {
        throw SchemaError(path, lineno, std::string("missing or non-string \"") + key + "\"");
      }
      *field = j[key].get<std::string>();
    }
    if (d.id.empty()) throw SchemaError(path, lineno, "\"id\" must be non-empty");
    if (d.lang.empty()) throw SchemaError(path, lineno, "\"lang\" must be non-empty");
    docs.push_back(std::move(d));
  }
  return docs;
}

/// Groups documents by language and builds one collection per language.
inline CollectionRegistry build_registry(const std::vector<Document>& docs, std::string fallback_lang = "en",
                                         const std::set<std::string>& bigram_langs = {}) {
  std::map<std::string, std::vector<Document>> by_lang;
  for (const auto& d : docs) by_lang[d.lang].push_back(d);
  CollectionRegistry reg(std::move(fallback_lang));
  for (auto& [lang, group] : by_lang) {
    const auto mode = bigram_langs.count(lang) ? text::TokenizerMode::Bigrams : text::TokenizerMode::Words;
    reg.add(Collection::build(std::move(group), lang, mode));
  }
  return reg;
}

}  // namespace crosearch::corpus
