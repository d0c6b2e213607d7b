#pragma once

// Unicode helpers shared by the tokenizer and the answer metrics. Backed by ICU.

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <string>
#include <string_view>
#include <vector>

#include "crosearch/error.hpp"

namespace crosearch::text {

inline std::u32string decode(std::string_view utf8) {
  const auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  std::u32string out;
  out.reserve(static_cast<std::size_t>(u.length()));
  for (int32_t i = 0; i < u.length();) {
    const UChar32 c = u.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

inline std::string encode(std::u32string_view cps) {
  icu::UnicodeString u;
  for (char32_t c : cps) u.append(static_cast<UChar32>(c));
  std::string out;
  u.toUTF8String(out);
  return out;
}

inline std::string nfkc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFKC normalizer unavailable");
  const auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString normalized = n->normalize(u, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFKC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

inline std::string lowercase(std::string_view s) {
  auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u.toLower(icu::Locale::getRoot());
  std::string out;
  u.toUTF8String(out);
  return out;
}

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }
inline bool is_punct(char32_t c) { return u_ispunct(static_cast<UChar32>(c)) != 0; }

/// Number of code points in a UTF-8 string.
inline std::size_t length(std::string_view utf8) { return decode(utf8).size(); }

/// First `n` code points of a UTF-8 string.
inline std::string prefix(std::string_view utf8, std::size_t n) {
  auto cps = decode(utf8);
  if (cps.size() <= n) return std::string(utf8);
  cps.resize(n);
  return encode(cps);
}

namespace detail {

inline std::string strip_and_collapse(std::string_view s) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : decode(s)) {
    if (is_punct(c)) continue;
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return encode(out);
}

}  // namespace detail

/// Canonical answer normalization: NFKC, lowercase, punctuation removed,
/// whitespace collapsed and trimmed. Iterated to a fixed point so the result
/// is idempotent even where case mapping or punctuation removal re-exposes
/// composable sequences.
inline std::string normalize(std::string_view s) {
  std::string cur(s);
  for (int round = 0; round < 4; ++round) {
    std::string next = nfkc(detail::strip_and_collapse(nfkc(lowercase(nfkc(cur)))));
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

enum class TokenizerMode {
  Words,    ///< split on whitespace and punctuation
  Bigrams,  ///< overlapping code-point bigrams inside each delimited chunk
};

/// Index/query tokenizer: NFKC, lowercase, split on Unicode whitespace and
/// punctuation. In bigram mode each chunk contributes its overlapping
/// character bigrams; one-character chunks contribute themselves.
inline std::vector<std::string> tokenize(std::string_view s, TokenizerMode mode = TokenizerMode::Words) {
  std::vector<std::string> tokens;
  std::u32string chunk;
  auto flush = [&] {
    if (chunk.empty()) return;
    if (mode == TokenizerMode::Words || chunk.size() == 1) {
      tokens.push_back(encode(chunk));
    } else {
      for (std::size_t i = 0; i + 1 < chunk.size(); ++i) tokens.push_back(encode(chunk.substr(i, 2)));
    }
    chunk.clear();
  };
  for (char32_t c : decode(lowercase(nfkc(s)))) {
    if (is_space(c) || is_punct(c)) {
      flush();
    } else {
      chunk.push_back(c);
    }
  }
  flush();
  return tokens;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace crosearch::text
