#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crosearch/error.hpp"
#include "crosearch/text.hpp"

namespace crosearch::dataset {

struct QAExample {
  std::string id;
  std::string lang;
  std::string question;
  std::vector<std::string> gold_aliases;
  std::map<std::string, std::vector<std::string>> answers_by_lang;
  bool operator==(const QAExample&) const = default;
};

inline nlohmann::json to_json(const QAExample& ex) {
  nlohmann::json j{{"id", ex.id}, {"lang", ex.lang}, {"question", ex.question}, {"answers", ex.gold_aliases}};
  if (!ex.answers_by_lang.empty()) j["answers_by_lang"] = ex.answers_by_lang;
  return j;
}

/// JSONL, one {"id","lang","question","answers":[..],"answers_by_lang":{..}?}
/// object per line. Blank lines are skipped.
inline std::vector<QAExample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open dataset '" + path + "'");
  std::vector<QAExample> out;
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
    QAExample ex;
    for (auto [key, field] : {std::pair{"id", &ex.id}, {"lang", &ex.lang}, {"question", &ex.question}}) {
      if (!j.contains(key) || !j[key].is_string()) {
        throw SchemaError(path, lineno, std::string("missing or non-string \"") + key + "\"");
      }
      *field = j[key].get<std::string>();
    }
    if (!j.contains("answers") || !j["answers"].is_array()) {
      throw SchemaError(path, lineno, "missing \"answers\" array");
    }
    for (const auto& a : j["answers"]) {
      if (!a.is_string()) throw SchemaError(path, lineno, "\"answers\" must contain strings");
      ex.gold_aliases.push_back(a.get<std::string>());
    }
    if (ex.gold_aliases.empty()) throw SchemaError(path, lineno, "\"answers\" must be non-empty");
    if (j.contains("answers_by_lang")) {
      const auto& m = j["answers_by_lang"];
      if (!m.is_object()) throw SchemaError(path, lineno, "\"answers_by_lang\" must be an object");
      for (const auto& [lang, list] : m.items()) {
        if (!list.is_array()) throw SchemaError(path, lineno, "\"answers_by_lang\" values must be arrays");
        for (const auto& a : list) {
          if (!a.is_string()) throw SchemaError(path, lineno, "\"answers_by_lang\" must contain strings");
          ex.answers_by_lang[lang].push_back(a.get<std::string>());
        }
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace crosearch::dataset
