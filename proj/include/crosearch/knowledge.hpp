#pragma once

// Cross-lingual knowledge integration: translate non-native evidence into the
// query language, then ask the generator to restate it as short facts that are
// checked against the first-round native evidence.

#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "crosearch/backends.hpp"
#include "crosearch/corpus.hpp"
#include "crosearch/error.hpp"
#include "crosearch/protocol.hpp"
#include "crosearch/text.hpp"

namespace crosearch::knowledge {

struct NormalizedDoc {
  std::string id;
  std::string text;
  bool operator==(const NormalizedDoc&) const = default;
};

struct EvidenceSet {
  std::vector<corpus::Document> native;      ///< query-language results of the first turn
  std::vector<corpus::Document> global;      ///< other-language results
  std::vector<NormalizedDoc> normalized;     ///< `global` mapped into the query language, same order
};

struct FactStatements {
  std::vector<std::string> facts;
  int source_turn = 0;
};

/// Maps each document's text into `target_lang`, preserving order. Documents
/// already in the target language pass through unchanged. Any translator
/// failure aborts the whole batch.
inline std::vector<NormalizedDoc> normalize_evidence(const std::vector<corpus::Document>& global_docs,
                                                     const std::string& target_lang,
                                                     backends::Translator& translator) {
  std::vector<NormalizedDoc> out;
  out.reserve(global_docs.size());
  for (const auto& d : global_docs) {
    out.push_back(NormalizedDoc{d.id, backends::translate(translator, {d.lang, target_lang, d.text})});
  }
  return out;
}

inline constexpr std::string_view kReconstructionInstruction =
    "Compare the translated cross-lingual evidence below against the first-round evidence. Resolve "
    "contradictions, prefer claims supported by both, and restate the useful content as short numbered "
    "facts in the query language.";

inline constexpr std::string_view kNoCrossLingualEvidence = "(no cross-lingual evidence)";
inline constexpr std::string_view kNoNativeEvidence = "(no first-round evidence)";

/// Fixed template; see docs/formats.md for the exact layout.
inline std::string build_reconstruction_prompt(const std::string& query, const std::vector<corpus::Document>& native,
                                               const std::vector<NormalizedDoc>& normalized) {
  if (native.empty() && normalized.empty()) {
    throw Error(ErrorKind::NoEvidence, "reconstruction needs native or cross-lingual evidence");
  }
  std::ostringstream p;
  p << kReconstructionInstruction << "\n\n";
  p << "Question: " << protocol::escape_tags(query) << "\n\n";
  p << "First-round evidence:\n";
  if (native.empty()) p << kNoNativeEvidence << "\n";
  for (std::size_t i = 0; i < native.size(); ++i) {
    p << "Doc " << i + 1 << " (" << protocol::escape_tags(native[i].title) << "): "
      << protocol::escape_tags(native[i].text) << "\n";
  }
  p << "\nTranslated cross-lingual evidence:\n";
  if (normalized.empty()) p << kNoCrossLingualEvidence << "\n";
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    p << "Doc " << i + 1 << " (" << protocol::escape_tags(normalized[i].id) << "): "
      << protocol::escape_tags(normalized[i].text) << "\n";
  }
  p << "\nWrite the numbered facts, one per line, inside <think> and </think>.\n";
  return p.str();
}

/// Lines of the form "<n>. fact" or "<n>) fact", in order.
inline FactStatements extract_facts(const std::string& think_text, int source_turn = 0) {
  static const std::regex numbered(R"(^\s*\d+[.)]\s+(.+)$)");
  FactStatements out;
  out.source_turn = source_turn;
  std::istringstream in(think_text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, numbered)) {
      auto fact = text::trim(m[1].str());
      if (!fact.empty()) out.facts.push_back(std::move(fact));
    }
  }
  return out;
}

inline std::string render_facts(const std::vector<std::string>& facts) {
  std::string out;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (i > 0) out += '\n';
    out += std::to_string(i + 1) + ". " + facts[i];
  }
  return out;
}

inline constexpr std::string_view kFactsLabel = "reconstructed facts";

/// <information> block carrying reconstructed facts back into the context.
inline std::string render_fact_block(const std::vector<std::string>& facts) {
  return protocol::open_tag(protocol::SegmentKind::Information) + std::string(kFactsLabel) + ":\n" +
         protocol::escape_tags(render_facts(facts)) + protocol::close_tag(protocol::SegmentKind::Information);
}

/// Deterministic stand-in for the reconstruction model: restates every
/// translated cross-lingual document of a reconstruction prompt as one fact.
class EvidenceEchoReconstructor : public backends::Generator {
 public:
  std::string complete(const backends::GeneratorRequest& request) override {
    static const std::string header = "Translated cross-lingual evidence:\n";
    std::vector<std::string> facts;
    const auto at = request.prompt.find(header);
    if (at != std::string::npos) {
      std::istringstream in(request.prompt.substr(at + header.size()));
      std::string line;
      while (std::getline(in, line) && !line.empty()) {
        if (line.rfind("Doc ", 0) != 0) continue;
        const auto colon = line.find("): ");
        if (colon != std::string::npos) facts.push_back(line.substr(colon + 3));
      }
    }
    return "<think>\n" + render_facts(facts) + "\n</think>";
  }
};

}  // namespace crosearch::knowledge
