#pragma once

// Answer metrics: character 3-gram recall (training reward and c3Recall) and
// flexible exact match. Both share text::normalize.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crosearch/error.hpp"
#include "crosearch/protocol.hpp"
#include "crosearch/text.hpp"

namespace crosearch::metrics {

/// Text after the canonical normalization pipeline.
class NormalizedText {
 public:
  explicit NormalizedText(std::string_view raw) : value_(text::normalize(raw)) {}
  const std::string& value() const noexcept { return value_; }

 private:
  std::string value_;
};

inline NormalizedText normalize_text(std::string_view s) { return NormalizedText(s); }

/// Multiset of overlapping code-point trigrams (spaces included).
inline std::map<std::u32string, std::size_t> char_trigrams(std::u32string_view s) {
  std::map<std::u32string, std::size_t> grams;
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) ++grams[std::u32string(s.substr(i, 3))];
  return grams;
}

/// |G(pred) ∩ G(gold)| / |G(gold)| over trigram multisets of the normalized
/// strings. Golds shorter than three normalized characters fall back to
/// normalized exact match.
inline double char_3gram_recall(std::string_view pred, std::string_view gold) {
  const auto p = text::decode(text::normalize(pred));
  const auto g = text::decode(text::normalize(gold));
  if (g.size() < 3) return p == g ? 1.0 : 0.0;
  const auto gold_grams = char_trigrams(g);
  const auto pred_grams = char_trigrams(p);
  std::size_t total = 0;
  std::size_t hit = 0;
  for (const auto& [gram, count] : gold_grams) {
    total += count;
    if (auto it = pred_grams.find(gram); it != pred_grams.end()) hit += std::min(count, it->second);
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

/// Best recall over gold aliases.
inline double best_alias_recall(std::string_view pred, const std::vector<std::string>& golds) {
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, char_3gram_recall(pred, g));
  return best;
}

/// 1 iff some normalized alias occurs in the normalized prediction.
inline int fem(std::string_view pred, const std::vector<std::string>& golds) {
  if (golds.empty()) throw Error(ErrorKind::EmptyGolds, "fem needs at least one gold alias");
  const std::string p = text::normalize(pred);
  for (const auto& g : golds) {
    if (p.find(text::normalize(g)) != std::string::npos) return 1;
  }
  return 0;
}

struct RewardRecord {
  std::string trajectory_id;
  std::optional<std::string> extracted_answer;
  double r_out = 0.0;
};

/// Char-3-gram recall of the trajectory's (first) answer against the best
/// gold alias; 0 when there is no Answer segment.
inline double outcome_reward(const protocol::Trajectory& traj, const std::vector<std::string>& gold_aliases) {
  const auto answer = protocol::first_answer(traj);
  if (!answer) return 0.0;
  return best_alias_recall(*answer, gold_aliases);
}

/// Reward variant used by the "exact match" ablation: fem on the extracted answer.
inline double exact_outcome_reward(const protocol::Trajectory& traj, const std::vector<std::string>& gold_aliases) {
  const auto answer = protocol::first_answer(traj);
  if (!answer) return 0.0;
  return static_cast<double>(fem(*answer, gold_aliases));
}

}  // namespace crosearch::metrics
