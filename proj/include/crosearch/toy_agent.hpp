#pragma once

// Generators driven by the toy policy (or a fixed rule) over synthetic QA
// tasks. Each call reads the context, builds StateFeatures, picks one action
// token and renders it as protocol text.

#include <map>
#include <string>
#include <vector>

#include "crosearch/backends.hpp"
#include "crosearch/knowledge.hpp"
#include "crosearch/policy.hpp"
#include "crosearch/protocol.hpp"

namespace crosearch::toy {

/// What the environment knows about one question.
struct ToyTask {
  std::string question;
  std::string gold;
  std::string answer_prefix;                    ///< "entity relation " in the query language
  std::map<std::string, std::string> memory;    ///< thinking mode -> parametric guess
};

enum Action : std::size_t { Think = 0, Search, AnswerContext, AnswerMemory, AnswerNone, kNumActions };

inline const policy::MicroVocabulary& vocabulary() {
  static const policy::MicroVocabulary v(
      {"EMIT_THINK", "EMIT_SEARCH", "EMIT_ANSWER_CONTEXT", "EMIT_ANSWER_MEMORY", "EMIT_ANSWER_NONE"});
  return v;
}

inline constexpr std::string_view kNoAnswer = "no answer";

/// StateFeatures layout: [bias | turn one-hot 0..B | mode one-hot |
/// evidence count per language / 3 | answer-present flag].
class FeatureLayout {
 public:
  FeatureLayout(std::vector<std::string> languages, std::size_t budget)
      : languages_(std::move(languages)), budget_(budget) {}

  std::size_t dim() const { return 1 + (budget_ + 1) + 2 * languages_.size() + 1; }
  const std::vector<std::string>& languages() const { return languages_; }
  std::size_t budget() const { return budget_; }

  policy::Vector encode(std::size_t turn, const std::string& mode, const std::vector<double>& counts, bool flag) const {
    policy::Vector s = policy::Vector::Zero(static_cast<Eigen::Index>(dim()));
    Eigen::Index k = 0;
    s(k++) = 1.0;
    s(k + static_cast<Eigen::Index>(std::min(turn, budget_))) = 1.0;
    k += static_cast<Eigen::Index>(budget_ + 1);
    for (const auto& l : languages_) s(k++) = l == mode ? 1.0 : 0.0;
    for (std::size_t i = 0; i < languages_.size(); ++i) s(k++) = counts[i] / 3.0;
    s(k) = flag ? 1.0 : 0.0;
    return s;
  }

  /// Reads turn, evidence counts and the answer flag off the context text.
  policy::Vector observe(const std::string& prompt, const std::string& mode, const ToyTask& task) const {
    std::size_t turn = 0;
    const std::string close = protocol::close_tag(protocol::SegmentKind::Search);
    for (auto at = prompt.find(close); at != std::string::npos; at = prompt.find(close, at + 1)) ++turn;
    std::vector<double> counts;
    for (const auto& l : languages_) {
      const std::string label = " [" + l + "]): ";
      double n = 0;
      for (auto at = prompt.find(label); at != std::string::npos; at = prompt.find(label, at + 1)) n += 1;
      counts.push_back(n);
    }
    const bool flag = prompt.find(task.gold) != std::string::npos;
    return encode(turn, mode, counts, flag);
  }

 private:
  std::vector<std::string> languages_;
  std::size_t budget_;
};

/// Text of the word following `task.answer_prefix` in the context, if any.
inline std::string context_answer(const std::string& prompt, const ToyTask& task) {
  const auto at = prompt.rfind(task.answer_prefix);
  if (at == std::string::npos) return std::string(kNoAnswer);
  const std::size_t b = at + task.answer_prefix.size();
  std::size_t e = b;
  while (e < prompt.size() && prompt[e] != ' ' && prompt[e] != '\n' && prompt[e] != '<') ++e;
  return e == b ? std::string(kNoAnswer) : prompt.substr(b, e - b);
}

inline std::string render_action(std::size_t token, const std::string& prompt, const std::string& mode,
                                 const ToyTask& task) {
  auto answer = [](const std::string& a) { return "<answer>" + a + "</answer>"; };
  switch (token) {
    case Think: return "<think>not sure yet</think>";
    case Search: return "<search>" + task.question + "</search>";
    case AnswerContext: return answer(context_answer(prompt, task));
    case AnswerMemory: {
      auto it = task.memory.find(mode);
      return answer(it == task.memory.end() ? std::string(kNoAnswer) : it->second);
    }
    default: return answer(std::string(kNoAnswer));
  }
}

/// Samples one action per call from the policy and records it.
class ToyPolicyGenerator : public backends::Generator {
 public:
  ToyPolicyGenerator(const policy::PolicyParameters& params, const FeatureLayout& layout, ToyTask task,
                     std::string mode, std::uint64_t seed)
      : params_(params), layout_(layout), task_(std::move(task)), mode_(std::move(mode)), rng_(seed) {}

  std::string complete(const backends::GeneratorRequest& request) override {
    policy::TokenRecord r;
    r.state = layout_.observe(request.prompt, mode_, task_);
    r.token = policy::sample_token(params_, r.state, rng_, &r.behavior_log_prob);
    records_.push_back(r);
    return render_action(r.token, request.prompt, mode_, task_);
  }

  const std::vector<policy::TokenRecord>& records() const noexcept { return records_; }

 private:
  const policy::PolicyParameters& params_;
  const FeatureLayout& layout_;
  ToyTask task_;
  std::string mode_;
  policy::Rng rng_;
  std::vector<policy::TokenRecord> records_;
};

/// Fixed rule: search until the answer is visible (at most `max_searches`
/// times), then answer from context.
class OracleAnswerer : public backends::Generator {
 public:
  OracleAnswerer(ToyTask task, std::size_t max_searches = 2) : task_(std::move(task)), max_searches_(max_searches) {}

  std::string complete(const backends::GeneratorRequest& request) override {
    std::size_t turn = 0;
    const std::string close = protocol::close_tag(protocol::SegmentKind::Search);
    for (auto at = request.prompt.find(close); at != std::string::npos; at = request.prompt.find(close, at + 1)) {
      ++turn;
    }
    const bool visible = request.prompt.find(task_.gold) != std::string::npos;
    const std::size_t token = visible || turn >= max_searches_ ? AnswerContext : Search;
    return render_action(token, request.prompt, "", task_);
  }

 private:
  ToyTask task_;
  std::size_t max_searches_;
};

}  // namespace crosearch::toy
