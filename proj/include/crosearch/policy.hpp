#pragma once

// Small categorical policy: logits = Oᵀ tanh(Eᵀ s), with exact
// log-probabilities, analytic gradients, seeded sampling and exact KL.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

// <resolv.h> (pulled in by httplib.h) defines _res, a parameter name inside Eigen.
#pragma push_macro("_res")
#undef _res
#include <Eigen/Dense>
#pragma pop_macro("_res")
#include <nlohmann/json.hpp>

#include "crosearch/error.hpp"

namespace crosearch::policy {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct PolicyParameters {
  Matrix embedding;  ///< F x H
  Matrix output;     ///< H x V

  std::size_t features() const { return static_cast<std::size_t>(embedding.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(embedding.cols()); }
  std::size_t vocab() const { return static_cast<std::size_t>(output.cols()); }

  static PolicyParameters zeros(std::size_t f, std::size_t h, std::size_t v) {
    return {Matrix::Zero(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(h)),
            Matrix::Zero(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(v))};
  }

  PolicyParameters zeros_like() const { return zeros(features(), hidden(), vocab()); }

  PolicyParameters& operator+=(const PolicyParameters& o) {
    embedding += o.embedding;
    output += o.output;
    return *this;
  }
  PolicyParameters& operator*=(double c) {
    embedding *= c;
    output *= c;
    return *this;
  }

  double squared_norm() const { return embedding.squaredNorm() + output.squaredNorm(); }
  bool all_finite() const { return embedding.allFinite() && output.allFinite(); }
  bool operator==(const PolicyParameters& o) const {
    return embedding.rows() == o.embedding.rows() && embedding.cols() == o.embedding.cols() &&
           output.rows() == o.output.rows() && output.cols() == o.output.cols() && embedding == o.embedding &&
           output == o.output;
  }
};

/// splitmix64 step; also used to derive independent per-rollout seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

/// Deterministic generator with a fixed double mapping, independent of the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix64(state_ - 0x9E3779B97F4A7C15ULL);
  }
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::uint64_t state_;
};

/// Entries i.i.d. uniform on [-scale, scale].
inline PolicyParameters init_parameters(std::size_t f, std::size_t h, std::size_t v, std::uint64_t seed,
                                        double scale = 0.1) {
  auto p = PolicyParameters::zeros(f, h, v);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.embedding.size(); ++i) p.embedding.data()[i] = rng.uniform(-scale, scale);
  for (Eigen::Index i = 0; i < p.output.size(); ++i) p.output.data()[i] = rng.uniform(-scale, scale);
  return p;
}

namespace detail {

inline void check_dims(const PolicyParameters& p, const Vector& state) {
  if (p.output.rows() != p.embedding.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "embedding is F x H but output has " +
                                                  std::to_string(p.output.rows()) + " rows");
  }
  if (state.size() != p.embedding.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "state has dimension " + std::to_string(state.size()) + ", expected " +
                                                  std::to_string(p.embedding.rows()));
  }
}

inline void check_token(const PolicyParameters& p, std::size_t token) {
  if (token >= p.vocab()) {
    throw Error(ErrorKind::DimensionMismatch,
                "token " + std::to_string(token) + " outside vocabulary of size " + std::to_string(p.vocab()));
  }
}

}  // namespace detail

struct Forward {
  Vector hidden;     ///< tanh(Eᵀ s)
  Vector log_probs;  ///< log softmax of the logits
};

inline Forward forward(const PolicyParameters& p, const Vector& state) {
  detail::check_dims(p, state);
  Forward f;
  f.hidden = (p.embedding.transpose() * state).array().tanh().matrix();
  const Vector logits = p.output.transpose() * f.hidden;
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  f.log_probs = logits.array() - lse;
  return f;
}

inline Vector log_probs(const PolicyParameters& p, const Vector& state) { return forward(p, state).log_probs; }

inline double log_prob(const PolicyParameters& p, const Vector& state, std::size_t token) {
  detail::check_token(p, token);
  return forward(p, state).log_probs(static_cast<Eigen::Index>(token));
}

/// Pulls a gradient with respect to the logits back to both matrices.
inline PolicyParameters backprop_logits(const PolicyParameters& p, const Vector& state, const Forward& f,
                                        const Vector& d_logits) {
  PolicyParameters g;
  g.output = f.hidden * d_logits.transpose();
  const Vector d_hidden = p.output * d_logits;
  const Vector d_pre = d_hidden.array() * (1.0 - f.hidden.array().square());
  g.embedding = state * d_pre.transpose();
  return g;
}

inline PolicyParameters grad_log_prob(const PolicyParameters& p, const Vector& state, std::size_t token) {
  detail::check_token(p, token);
  const Forward f = forward(p, state);
  Vector d = -f.log_probs.array().exp();
  d(static_cast<Eigen::Index>(token)) += 1.0;
  return backprop_logits(p, state, f, d);
}

/// Σ_a p(a) log(p(a)/q(a)) for the two policies at one state.
inline double kl_exact(const PolicyParameters& p, const PolicyParameters& q, const Vector& state) {
  if (p.vocab() != q.vocab()) throw Error(ErrorKind::DimensionMismatch, "policies have different vocabularies");
  const Vector lp = log_probs(p, state);
  const Vector lq = log_probs(q, state);
  return (lp.array().exp() * (lp - lq).array()).sum();
}

/// Gradient of kl_exact with respect to the parameters of `p`.
inline PolicyParameters grad_kl(const PolicyParameters& p, const PolicyParameters& q, const Vector& state) {
  if (p.vocab() != q.vocab()) throw Error(ErrorKind::DimensionMismatch, "policies have different vocabularies");
  const Forward f = forward(p, state);
  const Vector lq = log_probs(q, state);
  const Vector pr = f.log_probs.array().exp();
  const Vector diff = f.log_probs - lq;
  const double kl = pr.dot(diff);
  const Vector d = pr.array() * (diff.array() - kl);
  return backprop_logits(p, state, f, d);
}

/// Inverse-CDF draw from the policy at `state`.
inline std::size_t sample_token(const PolicyParameters& p, const Vector& state, Rng& rng, double* log_prob_out = nullptr) {
  const Vector lp = log_probs(p, state);
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t token = p.vocab() - 1;
  for (Eigen::Index a = 0; a < lp.size(); ++a) {
    acc += std::exp(lp(a));
    if (u < acc) {
      token = static_cast<std::size_t>(a);
      break;
    }
  }
  if (log_prob_out) *log_prob_out = lp(static_cast<Eigen::Index>(token));
  return token;
}

struct TokenRecord {
  Vector state;
  std::size_t token = 0;
  double behavior_log_prob = 0.0;
  bool masked = false;
};

/// Environment side of autoregressive sampling.
class SequenceHooks {
 public:
  virtual ~SequenceHooks() = default;
  virtual Vector state() = 0;
  /// Applies the sampled token; returns false once the sequence is complete.
  virtual bool step(std::size_t token) = 0;
};

inline std::vector<TokenRecord> sample_sequence(const PolicyParameters& p, SequenceHooks& hooks, std::uint64_t seed,
                                                std::size_t max_length) {
  if (max_length == 0) throw std::invalid_argument("sample_sequence: max_length must be >= 1");
  Rng rng(seed);
  std::vector<TokenRecord> out;
  while (out.size() < max_length) {
    TokenRecord r;
    r.state = hooks.state();
    r.token = sample_token(p, r.state, rng, &r.behavior_log_prob);
    out.push_back(r);
    if (!hooks.step(r.token)) break;
  }
  return out;
}

/// Ordered, duplicate-free action tokens.
class MicroVocabulary {
 public:
  explicit MicroVocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2) throw Error(ErrorKind::DimensionMismatch, "vocabulary needs at least two tokens");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (tokens_[i] == tokens_[j]) throw Error(ErrorKind::DuplicateId, "duplicate token '" + tokens_[i] + "'");
      }
    }
  }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& operator[](std::size_t i) const { return tokens_.at(i); }
  std::size_t index(const std::string& token) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i] == token) return i;
    }
    throw Error(ErrorKind::DimensionMismatch, "unknown token '" + token + "'");
  }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
};

/// Checkpoint JSON: {"F","H","V","seed","embedding","output"}, matrices as
/// flat row-major arrays.
inline nlohmann::json to_checkpoint(const PolicyParameters& p, std::uint64_t seed) {
  auto flat = [](const Matrix& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    }
    return v;
  };
  return {{"F", p.features()}, {"H", p.hidden()},       {"V", p.vocab()},
          {"seed", seed},      {"embedding", flat(p.embedding)}, {"output", flat(p.output)}};
}

inline PolicyParameters from_checkpoint(const nlohmann::json& j) {
  try {
    const auto f = j.at("F").get<std::size_t>();
    const auto h = j.at("H").get<std::size_t>();
    const auto v = j.at("V").get<std::size_t>();
    auto p = PolicyParameters::zeros(f, h, v);
    auto fill = [](Matrix& m, const std::vector<double>& flat, const char* name) {
      if (flat.size() != static_cast<std::size_t>(m.size())) {
        throw Error(ErrorKind::DimensionMismatch, std::string("checkpoint '") + name + "' has wrong length");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[k++];
      }
    };
    fill(p.embedding, j.at("embedding").get<std::vector<double>>(), "embedding");
    fill(p.output, j.at("output").get<std::vector<double>>(), "output");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("malformed policy checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const PolicyParameters& p, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint '" + path + "'");
  out << to_checkpoint(p, seed).dump() << "\n";
}

inline PolicyParameters load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaError, "checkpoint '" + path + "': " + e.what());
  }
  return from_checkpoint(j);
}

}  // namespace crosearch::policy
