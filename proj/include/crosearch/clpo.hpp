#pragma once

// Cross-lingual group policy optimization for the toy policy: one query per
// update, G rollouts each steered into its own thinking-mode language,
// group-normalized advantages, clipped ratio surrogate with an exact KL
// penalty against the step-0 policy, and a plain gradient step.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crosearch/backends.hpp"
#include "crosearch/corpus.hpp"
#include "crosearch/dataset.hpp"
#include "crosearch/error.hpp"
#include "crosearch/knowledge.hpp"
#include "crosearch/metrics.hpp"
#include "crosearch/policy.hpp"
#include "crosearch/retrieval_loop.hpp"
#include "crosearch/toy_agent.hpp"

namespace crosearch::clpo {

enum class RewardKind { C3Recall, ExactMatch };

/// Thinking-mode entry meaning "the question's own language".
inline constexpr std::string_view kQueryLanguage = "query";

struct CLPOConfig {
  std::size_t group_size = 4;  ///< G
  double clip_delta = 0.2;     ///< δ
  double kl_coef = 1e-3;       ///< λ
  double learning_rate = 0.05;
  double advantage_epsilon = 1e-8;
  std::size_t updates = 500;
  std::vector<std::string> thinking_modes{"en", "fr", "th", "ar"};
  std::uint64_t seed = 7;
  RewardKind reward = RewardKind::C3Recall;
  std::size_t hidden = 16;
  double init_scale = 0.1;
};

inline void validate(const CLPOConfig& c) {
  if (c.group_size < 2) throw Error(ErrorKind::GroupTooSmall, "group_size must be >= 2");
  if (!(c.clip_delta > 0.0 && c.clip_delta < 1.0)) throw Error(ErrorKind::ConfigError, "clip delta must lie in (0, 1)");
  if (!(c.kl_coef >= 0.0)) throw Error(ErrorKind::ConfigError, "kl coefficient must be >= 0");
  if (!(c.learning_rate > 0.0)) throw Error(ErrorKind::ConfigError, "learning_rate must be > 0");
  if (!(c.advantage_epsilon > 0.0)) throw Error(ErrorKind::ConfigError, "advantage_epsilon must be > 0");
  if (c.thinking_modes.empty()) throw Error(ErrorKind::ConfigError, "thinking_modes must be non-empty");
  if (c.hidden == 0) throw Error(ErrorKind::ConfigError, "policy hidden size must be >= 1");
}

struct Rollout {
  std::string mode;
  std::vector<policy::TokenRecord> tokens;
  double reward = 0.0;
  std::map<std::string, std::size_t> evidence;  ///< hits seen per language
};

struct RolloutGroup {
  std::string query_id;
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;
};

/// thinking_modes[i mod |thinking_modes|].
inline std::string assign_modes(const CLPOConfig& config, std::size_t i) {
  if (config.thinking_modes.empty()) throw Error(ErrorKind::ConfigError, "thinking_modes must be non-empty");
  return config.thinking_modes[i % config.thinking_modes.size()];
}

/// (r - mean) / (std_pop + ε); all zero when std_pop < ε.
inline std::vector<double> compute_advantages(const std::vector<double>& rewards, double eps = 1e-8) {
  if (rewards.size() < 2) throw Error(ErrorKind::GroupTooSmall, "advantages need a group of at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (sd < eps) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / (sd + eps);
  return out;
}

struct LossAndGrad {
  double loss = 0.0;       ///< minimized: -objective
  double objective = 0.0;  ///< surrogate minus KL penalty
  double mean_kl = 0.0;    ///< (1/G) Σ_i KL_i
  policy::PolicyParameters grad;  ///< gradient of `loss`
};

inline LossAndGrad clpo_loss_and_grad(const RolloutGroup& group, const policy::PolicyParameters& current,
                                      const policy::PolicyParameters& behavior,
                                      const policy::PolicyParameters& reference, const CLPOConfig& config) {
  const std::size_t g = group.rollouts.size();
  if (g == 0) throw Error(ErrorKind::GroupTooSmall, "empty rollout group");
  if (group.advantages.size() != g) {
    throw Error(ErrorKind::DimensionMismatch, "group has " + std::to_string(g) + " rollouts but " +
                                                  std::to_string(group.advantages.size()) + " advantages");
  }
  for (const auto* p : {&behavior, &reference}) {
    if (p->embedding.rows() != current.embedding.rows() || p->embedding.cols() != current.embedding.cols() ||
        p->output.rows() != current.output.rows() || p->output.cols() != current.output.cols()) {
      throw Error(ErrorKind::DimensionMismatch, "parameter sets have different shapes");
    }
  }
  LossAndGrad out;
  out.grad = current.zeros_like();
  const double lo = 1.0 - config.clip_delta;
  const double hi = 1.0 + config.clip_delta;
  const double inv_g = 1.0 / static_cast<double>(g);
  for (std::size_t i = 0; i < g; ++i) {
    const Rollout& r = group.rollouts[i];
    const double adv = group.advantages[i];
    std::size_t n_live = 0;
    for (const auto& t : r.tokens) n_live += t.masked ? 0 : 1;
    if (n_live == 0) throw Error(ErrorKind::EmptyTokenSet, "rollout " + std::to_string(i) + " has no unmasked tokens");
    const double w = inv_g / static_cast<double>(n_live);

    double surrogate = 0.0;
    double kl = 0.0;
    for (const auto& t : r.tokens) {
      if (t.masked) continue;
      const double lp_cur = policy::log_prob(current, t.state, t.token);
      const double lp_beh = policy::log_prob(behavior, t.state, t.token);
      const double rho = std::exp(lp_cur - lp_beh);
      const double unclipped = rho * adv;
      const double clipped = std::clamp(rho, lo, hi) * adv;
      surrogate += std::min(unclipped, clipped);
      // gradient flows through ρ only where the unclipped branch is the min
      if (unclipped <= clipped) {
        auto gl = policy::grad_log_prob(current, t.state, t.token);
        gl *= -w * adv * rho;
        out.grad += gl;
      }
      kl += policy::kl_exact(current, reference, t.state);
      if (config.kl_coef != 0.0) {
        auto gk = policy::grad_kl(current, reference, t.state);
        gk *= config.kl_coef * w;
        out.grad += gk;
      }
    }
    out.objective += w * surrogate;
    const double kl_i = kl / static_cast<double>(n_live);
    out.mean_kl += inv_g * kl_i;
    out.objective -= config.kl_coef * inv_g * kl_i;
  }
  out.loss = -out.objective;
  return out;
}

/// Plain descent on the loss: params -= learning_rate * grad.
inline void gradient_step(policy::PolicyParameters& params, policy::PolicyParameters grad, double learning_rate) {
  grad *= -learning_rate;
  params += grad;
}

/// Everything a training run reads; nothing here is mutated.
struct TrainingEnvironment {
  const corpus::CollectionRegistry* registry = nullptr;
  const std::vector<dataset::QAExample>* dataset = nullptr;
  const std::map<std::string, toy::ToyTask>* tasks = nullptr;
  backends::Translator* translator = nullptr;
  loop::LoopConfig loop;  ///< query_lang and thinking_mode are set per rollout
};

struct LogRecord {
  std::size_t update = 0;
  double mean_reward = 0.0;
  double objective = 0.0;
  double mean_kl = 0.0;
  double grad_norm = 0.0;
};

struct TrainingResult {
  std::vector<LogRecord> log;
  policy::PolicyParameters params;
  std::uint64_t seed = 0;
};

inline toy::FeatureLayout feature_layout(const TrainingEnvironment& env) {
  return toy::FeatureLayout(env.registry->languages(), env.loop.max_budget);
}

inline policy::PolicyParameters initial_parameters(const TrainingEnvironment& env, const CLPOConfig& config) {
  return policy::init_parameters(feature_layout(env).dim(), config.hidden, toy::kNumActions,
                                 policy::derive_seed(config.seed, 0x706f6c), config.init_scale);
}

inline double score(const loop::EpisodeResult& r, const dataset::QAExample& ex, RewardKind kind) {
  return kind == RewardKind::C3Recall ? metrics::outcome_reward(r.trajectory, ex.gold_aliases)
                                      : metrics::exact_outcome_reward(r.trajectory, ex.gold_aliases);
}

/// One rollout of the toy policy on `ex` under thinking mode `mode`.
inline Rollout collect_rollout(const TrainingEnvironment& env, const toy::FeatureLayout& layout,
                               const policy::PolicyParameters& params, const dataset::QAExample& ex,
                               const std::string& mode, std::uint64_t seed, RewardKind reward) {
  const auto task = env.tasks->find(ex.id);
  if (task == env.tasks->end()) throw Error(ErrorKind::SpecError, "no toy task for example '" + ex.id + "'");
  toy::ToyPolicyGenerator gen(params, layout, task->second, mode, seed);
  knowledge::EvidenceEchoReconstructor recon;
  loop::LoopConfig cfg = env.loop;
  cfg.query_lang = ex.lang;
  cfg.thinking_mode = mode;
  const auto result = loop::run_episode(ex.question, cfg, *env.registry, {&gen, env.translator, &recon});
  Rollout r;
  r.mode = mode;
  r.tokens = gen.records();
  r.reward = score(result, ex, reward);
  for (const auto& t : result.turns) {
    for (const auto& h : t.hits) ++r.evidence[h.lang];
  }
  return r;
}

namespace detail {

inline std::string dump_group(const RolloutGroup& group, const LossAndGrad& lg) {
  std::ostringstream s;
  s << "query " << group.query_id << ": loss " << lg.loss << ", mean_kl " << lg.mean_kl << "; rollouts:";
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    s << " [" << group.rollouts[i].mode << " reward " << group.rollouts[i].reward << " adv " << group.advantages[i]
      << " tokens " << group.rollouts[i].tokens.size() << "]";
  }
  return s.str();
}

}  // namespace detail

/// Runs `config.updates` updates from freshly initialized parameters, or from
/// `start` when given. Bit-identical for identical inputs.
inline TrainingResult train(const TrainingEnvironment& env, const CLPOConfig& config,
                            const policy::PolicyParameters* start = nullptr) {
  validate(config);
  if (!env.registry || !env.dataset || !env.tasks || !env.translator) {
    throw std::invalid_argument("train: incomplete training environment");
  }
  if (env.dataset->empty()) throw Error(ErrorKind::ConfigError, "training dataset is empty");
  const auto layout = feature_layout(env);
  TrainingResult out;
  out.seed = config.seed;
  out.params = start ? *start : initial_parameters(env, config);
  const policy::PolicyParameters reference = out.params;
  policy::Rng picker(policy::derive_seed(config.seed, 0x717565));

  for (std::size_t u = 0; u < config.updates; ++u) {
    const auto& ex = (*env.dataset)[picker.below(env.dataset->size())];
    RolloutGroup group;
    group.query_id = ex.id;
    std::vector<double> rewards;
    for (std::size_t i = 0; i < config.group_size; ++i) {
      std::string mode = assign_modes(config, i);
      if (mode == kQueryLanguage) mode = ex.lang;
      group.rollouts.push_back(collect_rollout(env, layout, out.params, ex, mode, policy::derive_seed(config.seed, u + 1, i),
                                               config.reward));
      rewards.push_back(group.rollouts.back().reward);
    }
    group.advantages = compute_advantages(rewards, config.advantage_epsilon);
    const policy::PolicyParameters behavior = out.params;
    auto lg = clpo_loss_and_grad(group, out.params, behavior, reference, config);
    if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
      throw Error(ErrorKind::NonFiniteLoss, "update " + std::to_string(u) + ": " + detail::dump_group(group, lg));
    }
    LogRecord rec;
    rec.update = u;
    double mean = 0.0;
    for (double r : rewards) mean += r;
    rec.mean_reward = mean / static_cast<double>(rewards.size());
    rec.objective = lg.objective;
    rec.mean_kl = lg.mean_kl;
    rec.grad_norm = std::sqrt(lg.grad.squared_norm());
    out.log.push_back(rec);
    gradient_step(out.params, std::move(lg.grad), config.learning_rate);
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// CSV with header "update,mean_reward,loss,mean_kl,grad_norm". The loss
/// column carries the objective being maximized.
inline std::string training_log_csv(const std::vector<LogRecord>& log) {
  std::string out = "update,mean_reward,loss,mean_kl,grad_norm\n";
  for (const auto& r : log) {
    out += std::to_string(r.update) + "," + format_double(r.mean_reward) + "," + format_double(r.objective) + "," +
           format_double(r.mean_kl) + "," + format_double(r.grad_norm) + "\n";
  }
  return out;
}

/// Mean reward over log[begin, end).
inline double window_mean(const std::vector<LogRecord>& log, std::size_t begin, std::size_t end) {
  end = std::min(end, log.size());
  if (begin >= end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += log[i].mean_reward;
  return s / static_cast<double>(end - begin);
}

}  // namespace crosearch::clpo
