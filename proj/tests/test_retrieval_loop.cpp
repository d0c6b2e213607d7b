#include <gtest/gtest.h>

#include "crosearch/retrieval_loop.hpp"
#include "support/routing.hpp"

using namespace crosearch;
using namespace crosearch::loop;

namespace {

corpus::CollectionRegistry small_registry() {
  return corpus::build_registry({{"en-nile", "en", "Nile", "the nile is the longest river"},
                                 {"en-gold", "en", "Gold", "gold has symbol au"},
                                 {"fr-nil", "fr", "Nil", "le nile est un fleuve"},
                                 {"fr-or", "fr", "Or", "or symbole au"},
                                 {"th-x", "th", "X", "nile ไนล์"}},
                                "en");
}

backends::DictionaryTranslator fr_en() {
  backends::DictionaryTranslator t;
  t.add_lexicon("fr", "en", {{"fleuve", "river"}, {"le", "the"}, {"est", "is"}, {"un", "a"}});
  t.add_lexicon("th", "en", {{"ไนล์", "Nile"}});
  t.add_lexicon("en", "fr", {{"river", "fleuve"}});
  t.add_lexicon("th", "fr", {});
  return t;
}

TEST(Route, Schedule) {
  const auto reg = small_registry();
  EXPECT_EQ(route_turn(1, "fr", reg), (std::vector<std::string>{"fr"}));
  EXPECT_EQ(route_turn(2, "fr", reg), (std::vector<std::string>{"en", "fr", "th"}));
  for (std::size_t b = 3; b < 8; ++b) EXPECT_EQ(route_turn(b, "fr", reg), (std::vector<std::string>{"en"}));
  EXPECT_EQ(route_turn(3, "fr", reg, std::string("th")), (std::vector<std::string>{"th"}));
  EXPECT_THROW(route_turn(0, "fr", reg), std::invalid_argument);
  EXPECT_THROW(route_turn(1, "de", reg), Error);
  EXPECT_THROW(route_turn(3, "fr", reg, std::string("de")), Error);
}

TEST(Route, RandomizedEpisodesInvokeExactlyTheRoutedOperators) {
  const auto stats = testsupport::run_routing_episodes(100, 99);
  EXPECT_EQ(stats.violations, 0u) << (stats.messages.empty() ? "" : stats.messages.front());
  EXPECT_GT(stats.turns, 100u);
}

TEST(Merge, RoundRobinDedupedAndReranked) {
  using H = corpus::ScoredHit;
  const auto out = round_robin_merge({{H{"a", "fr", 3, 1}, H{"b", "fr", 2, 2}, H{"c", "fr", 1, 3}},
                                      {H{"x", "en", 9, 1}},
                                      {H{"a", "fr", 3, 1}, H{"y", "th", 1, 2}}});
  std::vector<std::string> ids;
  for (const auto& h : out) ids.push_back(h.doc_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "x", "b", "y", "c"}));
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].rank, i + 1);
}

TEST(Episode, SearchThenAnswer) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<think>look</think><search>nile river</search>", "<answer>the Nile</answer>"});
  auto t = fr_en();
  LoopConfig cfg;
  cfg.query_lang = "en";
  const auto r = run_episode("Longest river?", cfg, reg, {&gen, &t, nullptr});
  EXPECT_EQ(r.answer, "the Nile");
  EXPECT_EQ(r.terminated_by, Termination::Answer);
  EXPECT_EQ(r.budget_used, 1u);
  EXPECT_EQ(r.generations, 2u);
  ASSERT_EQ(r.turns.size(), 1u);
  EXPECT_EQ(r.turns[0].operators, (std::vector<std::string>{"en"}));
  EXPECT_EQ(r.turns[0].hits[0].doc_id, "en-nile");
  EXPECT_EQ(r.context.rfind("Longest river?\n", 0), 0u);
  EXPECT_NE(r.context.find("<information>Doc 1 (Nile [en]): the nile is the longest river</information>"),
            std::string::npos);
  EXPECT_EQ(protocol::render_trajectory(r.trajectory), r.trajectory.raw);
  EXPECT_EQ(protocol::first_answer(r.trajectory), "the Nile");
}

TEST(Episode, SecondTurnNormalizesAndReconstructsOnce) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<search>nile</search>", "<search>nile</search>", "<search>nile</search>",
                                   "<answer>x</answer>"});
  auto t = fr_en();
  knowledge::EvidenceEchoReconstructor echo;
  LoopConfig cfg;
  cfg.query_lang = "fr";
  const auto r = run_episode("q", cfg, reg, {&gen, &t, &echo});
  ASSERT_EQ(r.turns.size(), 3u);
  EXPECT_FALSE(r.turns[0].reconstructed);
  EXPECT_TRUE(r.turns[1].reconstructed);
  EXPECT_FALSE(r.turns[2].reconstructed);
  // turn 2: native first, then the others in registry order
  ASSERT_GE(r.turns[1].hits.size(), 3u);
  EXPECT_EQ(r.turns[1].hits[0].lang, "fr");
  EXPECT_EQ(r.turns[1].hits[1].lang, "en");
  EXPECT_EQ(r.turns[1].hits[2].lang, "th");
  EXPECT_NE(r.context.find("reconstructed facts:\n1. the nile is the longest fleuve\n2. nile ไนล์"), std::string::npos);
  // turn 3 (fallback en) shows translated documents instead of facts
  EXPECT_NE(r.context.find("<information>Doc 1 (Nile [en]): the nile is the longest fleuve</information>"),
            std::string::npos);
}

TEST(Episode, ReconstructionDefaultsToTheGenerator) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<search>nile</search>", "<search>nile</search>", "<think>\n1. fact one\n</think>",
                                   "<answer>x</answer>"});
  auto t = fr_en();
  LoopConfig cfg;
  cfg.query_lang = "fr";
  const auto r = run_episode("q", cfg, reg, {&gen, &t, nullptr});
  EXPECT_NE(r.context.find("reconstructed facts:\n1. fact one</information>"), std::string::npos);
  EXPECT_EQ(r.answer, "x");
}

TEST(Episode, NoFactsFallsBackToDocuments) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<search>nile</search>", "<search>nile</search>", "<think>nothing</think>",
                                   "<answer>x</answer>"});
  auto t = fr_en();
  LoopConfig cfg;
  cfg.query_lang = "fr";
  const auto r = run_episode("q", cfg, reg, {&gen, &t, nullptr});
  EXPECT_FALSE(r.turns[1].reconstructed);
  EXPECT_EQ(r.context.find("reconstructed facts"), std::string::npos);
  EXPECT_NE(r.context.find("(Nile [en]): the nile is the longest fleuve"), std::string::npos);
}

TEST(Episode, NormalizationOffKeepsSourceText) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<search>nile</search>", "<search>nile</search>", "<answer>x</answer>"});
  LoopConfig cfg;
  cfg.query_lang = "fr";
  cfg.normalize = false;
  cfg.reconstruct = false;
  const auto r = run_episode("q", cfg, reg, {&gen, nullptr, nullptr});
  EXPECT_NE(r.context.find("(Nile [en]): the nile is the longest river"), std::string::npos);
  EXPECT_NE(r.context.find("(X [th]): nile ไนล์"), std::string::npos);
}

TEST(Episode, MalformedOutputGetsSelfCorrection) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"just text", "<think>open", "<answer>Nile</answer>"});
  backends::IdentityTranslator t;
  LoopConfig cfg;
  cfg.query_lang = "en";
  const auto r = run_episode("q", cfg, reg, {&gen, &t, nullptr});
  EXPECT_EQ(r.answer, "Nile");
  EXPECT_EQ(r.generations, 3u);
  std::size_t count = 0;
  for (std::size_t at = r.context.find(protocol::self_correction_message()); at != std::string::npos;
       at = r.context.find(protocol::self_correction_message(), at + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 2u);
}

TEST(Episode, SearchBeyondBudgetForcesFinalAnswer) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<search>nile</search>", "<search>gold</search>", "<answer>Au</answer> extra"});
  backends::IdentityTranslator t;
  LoopConfig cfg;
  cfg.query_lang = "en";
  cfg.max_budget = 1;
  const auto r = run_episode("q", cfg, reg, {&gen, &t, nullptr});
  EXPECT_EQ(r.terminated_by, Termination::BudgetExhausted);
  EXPECT_EQ(r.budget_used, 1u);
  EXPECT_EQ(r.answer, "Au");
  EXPECT_NE(r.context.find(budget_exhausted_notice()), std::string::npos);
  EXPECT_EQ(r.context.find("extra"), std::string::npos);
}

TEST(Episode, GenerationCapEndsMalformedLoops) {
  const auto reg = small_registry();
  std::vector<std::string> steps(30, "no action");
  backends::ScriptedGenerator gen(steps);
  backends::IdentityTranslator t;
  LoopConfig cfg;
  cfg.query_lang = "en";
  cfg.max_budget = 2;
  const auto r = run_episode("q", cfg, reg, {&gen, &t, nullptr});
  EXPECT_EQ(r.terminated_by, Termination::BudgetExhausted);
  EXPECT_EQ(r.generations, cfg.generation_cap() + 1);
  EXPECT_FALSE(r.answer.has_value());
}

TEST(Episode, EmptyQueryYieldsNoDocuments) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<search>?!</search>", "<answer>a</answer>"});
  backends::IdentityTranslator t;
  LoopConfig cfg;
  cfg.query_lang = "en";
  const auto r = run_episode("q", cfg, reg, {&gen, &t, nullptr});
  EXPECT_NE(r.context.find(kNoDocuments), std::string::npos);
  EXPECT_TRUE(r.turns[0].hits.empty());
}

TEST(Episode, ThinkingDirectiveAndEscapedQuestion) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<answer>a</answer>"});
  backends::IdentityTranslator t;
  LoopConfig cfg;
  cfg.query_lang = "en";
  cfg.thinking_mode = "th";
  const auto r = run_episode("what <answer>?", cfg, reg, {&gen, &t, nullptr});
  EXPECT_EQ(r.context.rfind("Reason and formulate your search queries in Thai.\nwhat ⟨answer⟩?\n", 0), 0u);
}

TEST(Episode, ConfigValidation) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<answer>a</answer>"});
  backends::IdentityTranslator t;
  LoopConfig cfg;
  cfg.query_lang = "de";
  EXPECT_THROW(run_episode("q", cfg, reg, {&gen, &t, nullptr}), Error);
  cfg.query_lang = "en";
  cfg.max_budget = 0;
  EXPECT_THROW(run_episode("q", cfg, reg, {&gen, &t, nullptr}), Error);
  cfg.max_budget = 2;
  cfg.thinking_mode = "de";
  EXPECT_THROW(run_episode("q", cfg, reg, {&gen, &t, nullptr}), Error);
}

TEST(Trace, OneLinePerTurnPlusSummary) {
  const auto reg = small_registry();
  backends::ScriptedGenerator gen({"<search>nile</search>", "<answer>a</answer>"});
  backends::IdentityTranslator t;
  LoopConfig cfg;
  cfg.query_lang = "en";
  const auto r = run_episode("q", cfg, reg, {&gen, &t, nullptr});
  const auto trace = trace_jsonl(r);
  std::istringstream in(trace);
  std::string line;
  std::vector<nlohmann::json> lines;
  while (std::getline(in, line)) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0]["turn"], 1);
  EXPECT_EQ(lines[0]["query"], "nile");
  EXPECT_EQ(lines[1]["summary"], true);
  EXPECT_EQ(lines[1]["answer"], "a");
  EXPECT_EQ(lines[1]["terminated_by"], "Answer");
}

}  // namespace
