#pragma once

// Multi-turn retrieval episode: the generator alternates with search, turn b
// is routed local -> all languages -> fallback, non-native evidence is
// normalized into the query language and distilled into facts once.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crosearch/backends.hpp"
#include "crosearch/corpus.hpp"
#include "crosearch/error.hpp"
#include "crosearch/knowledge.hpp"
#include "crosearch/protocol.hpp"

namespace crosearch::loop {

struct LoopConfig {
  std::size_t max_budget = 4;  ///< B
  std::size_t top_k = 3;
  std::string query_lang;
  std::optional<std::string> fallback_lang;  ///< unset: the registry's fallback
  std::optional<std::string> thinking_mode;
  bool normalize = true;
  bool reconstruct = true;
  std::size_t max_generations = 0;  ///< 0 means 2B + 4
  std::size_t max_new_chars = 4096;

  std::size_t generation_cap() const { return max_generations ? max_generations : 2 * max_budget + 4; }
};

enum class Termination { Answer, BudgetExhausted };

constexpr std::string_view to_string(Termination t) noexcept {
  return t == Termination::Answer ? "Answer" : "BudgetExhausted";
}

struct TurnRecord {
  std::size_t turn = 0;
  std::string query;
  std::vector<std::string> operators;  ///< languages searched, in invocation order
  std::vector<corpus::ScoredHit> hits;  ///< merged, as shown to the generator
  bool reconstructed = false;
};

struct EpisodeResult {
  std::optional<std::string> answer;
  protocol::Trajectory trajectory;
  std::vector<TurnRecord> turns;
  std::size_t budget_used = 0;
  std::size_t generations = 0;
  Termination terminated_by = Termination::BudgetExhausted;
  std::string context;  ///< full final context, initial prompt included
};

struct Backends {
  backends::Generator* generator = nullptr;
  backends::Translator* translator = nullptr;
  backends::Generator* reconstructor = nullptr;  ///< null: use `generator`
};

inline const std::string& resolve_fallback(const corpus::CollectionRegistry& registry,
                                           const std::optional<std::string>& fallback) {
  return fallback ? *fallback : registry.fallback_lang();
}

/// Languages whose operators serve turn `b`: {L}, then every registered
/// language, then {fallback}.
inline std::vector<std::string> route_turn(std::size_t b, const std::string& query_lang,
                                           const corpus::CollectionRegistry& registry,
                                           const std::optional<std::string>& fallback = std::nullopt) {
  if (b == 0) throw std::invalid_argument("route_turn: turns are numbered from 1");
  const std::string& fb = resolve_fallback(registry, fallback);
  if (!registry.contains(query_lang)) {
    throw Error(ErrorKind::UnknownLanguage, "query language '" + query_lang + "' is not registered");
  }
  if (!registry.contains(fb)) throw Error(ErrorKind::UnknownLanguage, "fallback language '" + fb + "' is not registered");
  if (b == 1) return {query_lang};
  if (b == 2) return registry.languages();
  return {fb};
}

inline std::string language_name(const std::string& code) {
  static const std::map<std::string, std::string> names{
      {"ar", "Arabic"}, {"de", "German"}, {"el", "Greek"}, {"en", "English"}, {"es", "Spanish"},
      {"fr", "French"}, {"hi", "Hindi"},  {"ja", "Japanese"}, {"ru", "Russian"}, {"th", "Thai"},
      {"zh", "Chinese"}};
  auto it = names.find(code);
  return it == names.end() ? code : it->second;
}

inline std::string thinking_directive(const std::string& lang) {
  return "Reason and formulate your search queries in " + language_name(lang) + ".";
}

inline constexpr std::string_view kNoDocuments = "<information>No documents found.</information>";

/// Shown once the search budget is spent, before the final generation.
inline const std::string& budget_exhausted_notice() {
  static const std::string msg =
      "The search budget is exhausted. Give your final answer now inside ⟨answer⟩ and ⟨/answer⟩.";
  return msg;
}

inline void validate(const LoopConfig& cfg, const corpus::CollectionRegistry& registry) {
  if (cfg.max_budget == 0) throw Error(ErrorKind::ConfigError, "loop budget B must be >= 1");
  if (cfg.top_k == 0) throw Error(ErrorKind::ConfigError, "loop top_k must be >= 1");
  if (cfg.max_new_chars == 0) throw Error(ErrorKind::ConfigError, "loop max_new_chars must be >= 1");
  if (!registry.contains(cfg.query_lang)) {
    throw Error(ErrorKind::UnknownLanguage, "query language '" + cfg.query_lang + "' is not registered");
  }
  const std::string& fb = resolve_fallback(registry, cfg.fallback_lang);
  if (!registry.contains(fb)) throw Error(ErrorKind::UnknownLanguage, "fallback language '" + fb + "' is not registered");
  if (cfg.thinking_mode && !registry.contains(*cfg.thinking_mode)) {
    throw Error(ErrorKind::UnknownLanguage, "thinking mode '" + *cfg.thinking_mode + "' is not registered");
  }
}

/// Interleaves per-language result lists one hit at a time, in the order the
/// lists are given, dropping repeated (lang, doc_id) pairs. Ranks are
/// reassigned 1..n.
inline std::vector<corpus::ScoredHit> round_robin_merge(const std::vector<std::vector<corpus::ScoredHit>>& lists) {
  std::vector<corpus::ScoredHit> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t longest = 0;
  for (const auto& l : lists) longest = std::max(longest, l.size());
  for (std::size_t i = 0; i < longest; ++i) {
    for (const auto& l : lists) {
      if (i >= l.size()) continue;
      if (seen.insert({l[i].lang, l[i].doc_id}).second) out.push_back(l[i]);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

namespace detail {

// The stop sequences cut the closing tag of the action; put it back.
inline std::string close_pending_action(std::string text) {
  std::optional<protocol::SegmentKind> open;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    auto tag = protocol::detail::match_tag(text, pos);
    if (!tag) {
      ++pos;
      continue;
    }
    auto kind = protocol::detail::known_kind(tag->name);
    if (kind) open = tag->closing ? std::nullopt : kind;
    pos = tag->end;
  }
  if (open && (*open == protocol::SegmentKind::Search || *open == protocol::SegmentKind::Answer)) {
    text += protocol::close_tag(*open);
  }
  return text;
}

class Episode {
 public:
  Episode(const std::string& question, const LoopConfig& cfg, const corpus::CollectionRegistry& registry,
          const Backends& be)
      : question_(question), cfg_(cfg), registry_(registry), be_(be) {}

  EpisodeResult run() {
    validate(cfg_, registry_);
    if (!be_.generator) throw std::invalid_argument("run_episode: generator backend is required");
    if (!be_.translator && cfg_.normalize) throw std::invalid_argument("run_episode: translator backend is required");
    be_.generator->begin_episode();
    if (be_.reconstructor && be_.reconstructor != be_.generator) be_.reconstructor->begin_episode();

    if (cfg_.thinking_mode) ctx_ += thinking_directive(*cfg_.thinking_mode) + "\n";
    ctx_ += protocol::escape_tags(question_) + "\n";
    traj_start_ = ctx_.size();

    const std::vector<std::string> stops{protocol::close_tag(protocol::SegmentKind::Search),
                                         protocol::close_tag(protocol::SegmentKind::Answer)};
    while (true) {
      if (result_.generations >= cfg_.generation_cap()) return finish_exhausted();
      const std::string out = generate(stops);
      const auto event = protocol::classify(out);
      if (auto* ans = std::get_if<protocol::FinalResponseAction>(&event)) {
        result_.answer = ans->answer;
        result_.terminated_by = Termination::Answer;
        return finish();
      }
      if (auto* search = std::get_if<protocol::SearchAction>(&event)) {
        if (result_.budget_used >= cfg_.max_budget) return finish_exhausted();
        search_turn(search->query);
        continue;
      }
      append_env("\n" + protocol::self_correction_message() + "\n", false);
    }
  }

 private:
  std::string generate(const std::vector<std::string>& stops) {
    std::string out = backends::generate(*be_.generator, {ctx_, stops, cfg_.max_new_chars});
    ++result_.generations;
    out = close_pending_action(std::move(out));
    append_generation(out);
    return out;
  }

  void append_generation(const std::string& out) {
    const std::size_t base = ctx_.size() - traj_start_;
    ctx_ += out;
    try {
      auto parsed = protocol::parse_trajectory(out);
      for (auto& seg : parsed.segments) {
        seg.span.start += base;
        seg.span.end += base;
        result_.trajectory.segments.push_back(std::move(seg));
      }
    } catch (const protocol::ParseError&) {
      // kept as raw text only; the loop treats it as malformed
    }
  }

  // Environment text. Information blocks become segments of the trajectory.
  void append_env(const std::string& text, bool is_information) {
    const std::size_t base = ctx_.size() - traj_start_;
    ctx_ += text;
    if (!is_information) return;
    auto parsed = protocol::parse_trajectory(text);
    for (auto& seg : parsed.segments) {
      seg.span.start += base;
      seg.span.end += base;
      result_.trajectory.segments.push_back(std::move(seg));
    }
  }

  void search_turn(const std::string& query) {
    const std::size_t b = ++result_.budget_used;
    TurnRecord rec;
    rec.turn = b;
    rec.query = query;
    rec.operators = route_turn(b, cfg_.query_lang, registry_, cfg_.fallback_lang);

    std::vector<std::vector<corpus::ScoredHit>> lists;
    std::vector<std::string> order = rec.operators;
    // query language first, the rest in registry order
    auto own = std::find(order.begin(), order.end(), cfg_.query_lang);
    if (own != order.end()) std::rotate(order.begin(), own, own + 1);
    std::map<std::string, std::vector<corpus::ScoredHit>> by_lang;
    for (const auto& lang : rec.operators) {
      try {
        by_lang[lang] = registry_.get(lang)(query, cfg_.top_k);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyQuery) throw;
        by_lang[lang] = {};
      }
    }
    for (const auto& lang : order) lists.push_back(by_lang[lang]);
    rec.hits = round_robin_merge(lists);

    std::vector<corpus::Document> native;
    std::vector<corpus::Document> global;
    for (const auto& h : rec.hits) {
      const corpus::Document* d = registry_.document(h.lang, h.doc_id);
      if (!d) throw Error(ErrorKind::UnknownLanguage, "hit '" + h.doc_id + "' not found in '" + h.lang + "'");
      (h.lang == cfg_.query_lang ? native : global).push_back(*d);
    }
    if (b == 1) first_native_ = native;

    std::string block;
    if (!native.empty()) block += render_docs(native, native_texts(native));
    if (!global.empty()) {
      std::vector<knowledge::NormalizedDoc> normalized;
      if (cfg_.normalize) {
        normalized = knowledge::normalize_evidence(global, cfg_.query_lang, *be_.translator);
      } else {
        for (const auto& d : global) normalized.push_back({d.id, d.text});
      }
      std::optional<std::vector<std::string>> facts;
      if (cfg_.reconstruct && !reconstructed_) facts = reconstruct(first_native_.empty() ? native : first_native_,
                                                                   normalized);
      if (facts) {
        if (!block.empty()) block += "\n";
        block += knowledge::render_fact_block(*facts);
        reconstructed_ = true;
        rec.reconstructed = true;
      } else {
        std::vector<std::string> texts;
        for (const auto& n : normalized) texts.push_back(n.text);
        if (!block.empty()) block += "\n";
        block += render_docs(global, texts);
      }
    }
    if (block.empty()) block = std::string(kNoDocuments);
    append_env("\n" + block + "\n", true);
    result_.turns.push_back(std::move(rec));
  }

  static std::vector<std::string> native_texts(const std::vector<corpus::Document>& docs) {
    std::vector<std::string> out;
    for (const auto& d : docs) out.push_back(d.text);
    return out;
  }

  static std::string render_docs(const std::vector<corpus::Document>& docs, const std::vector<std::string>& texts) {
    std::vector<protocol::EvidenceEntry> entries;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      entries.push_back({docs[i].title + " [" + docs[i].lang + "]", texts[i]});
    }
    return protocol::render_information(entries);
  }

  std::optional<std::vector<std::string>> reconstruct(const std::vector<corpus::Document>& native,
                                                      const std::vector<knowledge::NormalizedDoc>& normalized) {
    backends::Generator& gen = be_.reconstructor ? *be_.reconstructor : *be_.generator;
    const std::string prompt = knowledge::build_reconstruction_prompt(question_, native, normalized);
    const std::string out = backends::generate(gen, {prompt, {}, cfg_.max_new_chars});
    std::vector<std::string> facts;
    try {
      for (const auto& seg : protocol::parse_trajectory(out).segments) {
        if (seg.kind != protocol::SegmentKind::Think) continue;
        auto f = knowledge::extract_facts(seg.body, static_cast<int>(result_.budget_used)).facts;
        facts.insert(facts.end(), f.begin(), f.end());
      }
    } catch (const protocol::ParseError&) {
      return std::nullopt;
    }
    if (facts.empty()) return std::nullopt;
    return facts;
  }

  EpisodeResult finish_exhausted() {
    result_.terminated_by = Termination::BudgetExhausted;
    append_env("\n" + budget_exhausted_notice() + "\n", false);
    const std::string out = generate({protocol::close_tag(protocol::SegmentKind::Answer)});
    const auto event = protocol::classify(out);
    if (const auto* ans = std::get_if<protocol::FinalResponseAction>(&event)) {
      result_.answer = ans->answer;
    }
    return finish();
  }

  EpisodeResult finish() {
    result_.trajectory.raw = ctx_.substr(traj_start_);
    result_.context = ctx_;
    return std::move(result_);
  }

  const std::string& question_;
  const LoopConfig& cfg_;
  const corpus::CollectionRegistry& registry_;
  Backends be_;
  std::string ctx_;
  std::size_t traj_start_ = 0;
  std::vector<corpus::Document> first_native_;
  bool reconstructed_ = false;
  EpisodeResult result_;
};

}  // namespace detail

/// Runs one episode. Backend failures propagate; malformed generations are
/// answered with the self-correction message.
inline EpisodeResult run_episode(const std::string& question, const LoopConfig& config,
                                 const corpus::CollectionRegistry& registry, const Backends& backends) {
  return detail::Episode(question, config, registry, backends).run();
}

inline nlohmann::json to_json(const TurnRecord& t) {
  nlohmann::json hits = nlohmann::json::array();
  for (const auto& h : t.hits) {
    hits.push_back({{"rank", h.rank}, {"lang", h.lang}, {"doc_id", h.doc_id}, {"score", h.score}});
  }
  return {{"turn", t.turn},
          {"query", t.query},
          {"operators", t.operators},
          {"hits", hits},
          {"reconstructed", t.reconstructed}};
}

/// Trace: one TurnRecord per line, then a summary line (docs/trace.md).
inline std::string trace_jsonl(const EpisodeResult& r) {
  std::string out;
  for (const auto& t : r.turns) out += to_json(t).dump() + "\n";
  nlohmann::json summary{{"summary", true},
                         {"answer", r.answer ? nlohmann::json(*r.answer) : nlohmann::json(nullptr)},
                         {"budget_used", r.budget_used},
                         {"generations", r.generations},
                         {"terminated_by", std::string(to_string(r.terminated_by))}};
  out += summary.dump() + "\n";
  return out;
}

}  // namespace crosearch::loop
