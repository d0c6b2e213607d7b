#pragma once

// Generator and translator backends: deterministic mocks for tests and
// experiments, plus JSON-over-HTTP clients for real services.
//
// Wire protocol (UTF-8, Content-Type: application/json):
//   POST /generate  {"prompt","stop","max_new_chars"}        -> {"text"}
//   POST /translate {"text","source_lang","target_lang"}     -> {"text"}
// Any transport failure or non-200 status is BackendUnavailable.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "crosearch/error.hpp"
#include "crosearch/text.hpp"

namespace crosearch::backends {

struct GeneratorRequest {
  std::string prompt;
  std::vector<std::string> stop_sequences;
  std::size_t max_new_chars = 4096;
};

class Generator {
 public:
  virtual ~Generator() = default;

  /// Raw completion; callers go through generate(), which enforces the
  /// stop-sequence and length contract.
  virtual std::string complete(const GeneratorRequest& request) = 0;

  /// Called by the retrieval loop at the start of every episode.
  virtual void begin_episode() {}
};

/// Cuts `text` before the earliest stop sequence, then to `max_chars` code points.
inline std::string truncate_generation(std::string_view text, const std::vector<std::string>& stops,
                                       std::size_t max_chars) {
  std::size_t cut = text.size();
  for (const auto& s : stops) {
    const auto at = text.find(s);
    if (at != std::string_view::npos) cut = std::min(cut, at);
  }
  return text::prefix(text.substr(0, cut), max_chars);
}

inline std::string generate(Generator& backend, const GeneratorRequest& request) {
  if (request.max_new_chars == 0) throw std::invalid_argument("GeneratorRequest.max_new_chars must be >= 1");
  for (const auto& s : request.stop_sequences) {
    if (s.empty()) throw std::invalid_argument("GeneratorRequest.stop_sequences must be non-empty strings");
  }
  return truncate_generation(backend.complete(request), request.stop_sequences, request.max_new_chars);
}

/// Replays a fixed list of generations; the cursor rewinds at each episode.
class ScriptedGenerator : public Generator {
 public:
  ScriptedGenerator() = default;
  explicit ScriptedGenerator(std::vector<std::string> steps) : steps_(std::move(steps)) {}

  std::string complete(const GeneratorRequest&) override {
    if (cursor_ >= steps_.size()) {
      throw Error(ErrorKind::ScenarioExhausted, "scripted scenario has only " + std::to_string(steps_.size()) + " steps");
    }
    return steps_[cursor_++];
  }

  void begin_episode() override { cursor_ = 0; }

  std::size_t cursor() const noexcept { return cursor_; }
  const std::vector<std::string>& steps() const noexcept { return steps_; }

 private:
  std::vector<std::string> steps_;
  std::size_t cursor_ = 0;
};

/// Scenario file: JSONL of {"step": k, "text": "..."} with k = 1, 2, ... in order.
inline std::vector<std::string> load_scenario_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open scenario file '" + path + "'");
  std::vector<std::string> steps;
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
    if (!j.is_object() || !j.contains("step") || !j["step"].is_number_integer() || !j.contains("text") ||
        !j["text"].is_string()) {
      throw SchemaError(path, lineno, "expected {\"step\": int, \"text\": string}");
    }
    if (j["step"].get<long long>() != static_cast<long long>(steps.size()) + 1) {
      throw SchemaError(path, lineno, "steps must be numbered 1, 2, ... in order");
    }
    steps.push_back(j["text"].get<std::string>());
  }
  return steps;
}

struct HttpEndpoint {
  std::string base_url;  ///< e.g. "http://127.0.0.1:8080"
  std::optional<std::string> bearer_token;
  std::chrono::seconds timeout{30};
};

namespace detail {

inline nlohmann::json post_json(const HttpEndpoint& ep, const std::string& path, const nlohmann::json& body) {
  httplib::Client client(ep.base_url);
  client.set_connection_timeout(ep.timeout);
  client.set_read_timeout(ep.timeout);
  client.set_write_timeout(ep.timeout);
  if (ep.bearer_token) client.set_bearer_token_auth(*ep.bearer_token);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorKind::BackendUnavailable, "POST " + ep.base_url + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::BackendUnavailable, "POST " + ep.base_url + path + ": HTTP " + std::to_string(res->status));
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw Error(ErrorKind::BackendUnavailable, "POST " + ep.base_url + path + ": response lacks string \"text\"");
    }
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BackendUnavailable, "POST " + ep.base_url + path + ": malformed JSON: " + e.what());
  }
}

}  // namespace detail

class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::string complete(const GeneratorRequest& request) override {
    const nlohmann::json body{
        {"prompt", request.prompt}, {"stop", request.stop_sequences}, {"max_new_chars", request.max_new_chars}};
    return detail::post_json(endpoint_, "/generate", body)["text"].get<std::string>();
  }

 private:
  HttpEndpoint endpoint_;
};

struct TranslatorSpec {
  std::string source_lang;
  std::string target_lang;
  std::string text;
};

class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string translate_text(const TranslatorSpec& request) = 0;
};

/// Equal languages short-circuit to the input regardless of backend.
inline std::string translate(Translator& backend, const TranslatorSpec& request) {
  if (request.source_lang == request.target_lang) return request.text;
  return backend.translate_text(request);
}

class IdentityTranslator : public Translator {
 public:
  std::string translate_text(const TranslatorSpec& request) override { return request.text; }
};

using Lexicon = std::map<std::string, std::string, std::less<>>;

/// Word-for-word lexicon translation over whitespace tokens. Unknown tokens
/// pass through; edge punctuation is kept around a translated core. Output
/// tokens are joined by single spaces.
class DictionaryTranslator : public Translator {
 public:
  void add_lexicon(const std::string& source, const std::string& target, Lexicon lexicon) {
    lexicons_[{source, target}] = std::move(lexicon);
  }

  bool has_lexicon(const std::string& source, const std::string& target) const {
    return lexicons_.count({source, target}) != 0;
  }

  std::string translate_text(const TranslatorSpec& request) override {
    auto it = lexicons_.find({request.source_lang, request.target_lang});
    if (it == lexicons_.end()) {
      throw Error(ErrorKind::MissingLexicon, "no lexicon for " + request.source_lang + "->" + request.target_lang);
    }
    const Lexicon& lex = it->second;
    std::string out;
    for (const auto& token : split_whitespace(request.text)) {
      if (!out.empty()) out += ' ';
      out += map_token(lex, token);
    }
    return out;
  }

 private:
  static std::vector<std::u32string> split_whitespace(std::string_view s) {
    std::vector<std::u32string> tokens;
    std::u32string cur;
    for (char32_t c : text::decode(s)) {
      if (text::is_space(c)) {
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
  }

  static std::string map_token(const Lexicon& lex, const std::u32string& token) {
    const std::string whole = text::encode(token);
    if (auto hit = lex.find(whole); hit != lex.end()) return hit->second;
    std::size_t b = 0;
    std::size_t e = token.size();
    while (b < e && text::is_punct(token[b])) ++b;
    while (e > b && text::is_punct(token[e - 1])) --e;
    if (b == e || (b == 0 && e == token.size())) return whole;
    const std::string core = text::encode(token.substr(b, e - b));
    auto hit = lex.find(core);
    if (hit == lex.end()) return whole;
    return text::encode(token.substr(0, b)) + hit->second + text::encode(token.substr(e));
  }

  std::map<std::pair<std::string, std::string>, Lexicon> lexicons_;
};

/// Lexicon file: UTF-8 TSV, "source<TAB>target" per line.
inline Lexicon load_lexicon_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open lexicon file '" + path + "'");
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw SchemaError(path, lineno, "expected \"source<TAB>target\"");
    }
    lex[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return lex;
}

/// Loads every "<src>-<tgt>.tsv" file in `dir` into a dictionary translator.
inline DictionaryTranslator load_lexicon_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "lexicon directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tsv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  DictionaryTranslator out;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    const auto dash = stem.find('-');
    if (dash == std::string::npos) continue;
    out.add_lexicon(stem.substr(0, dash), stem.substr(dash + 1), load_lexicon_tsv(f.string()));
  }
  return out;
}

class HttpTranslator : public Translator {
 public:
  explicit HttpTranslator(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::string translate_text(const TranslatorSpec& request) override {
    const nlohmann::json body{
        {"text", request.text}, {"source_lang", request.source_lang}, {"target_lang", request.target_lang}};
    return detail::post_json(endpoint_, "/translate", body)["text"].get<std::string>();
  }

 private:
  HttpEndpoint endpoint_;
};

}  // namespace crosearch::backends
