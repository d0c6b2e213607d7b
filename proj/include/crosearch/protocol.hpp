#pragma once

// Tag protocol spoken by the policy: flat <think>, <search>, <information>
// and <answer> elements. Grammar and escaping rules are in docs/protocol.md.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "crosearch/error.hpp"
#include "crosearch/text.hpp"

namespace crosearch::protocol {

enum class SegmentKind { Think, Search, Information, Answer };

constexpr std::string_view tag_name(SegmentKind kind) noexcept {
  switch (kind) {
    case SegmentKind::Think: return "think";
    case SegmentKind::Search: return "search";
    case SegmentKind::Information: return "information";
    case SegmentKind::Answer: return "answer";
  }
  return "";
}

inline std::string open_tag(SegmentKind kind) { return "<" + std::string(tag_name(kind)) + ">"; }
inline std::string close_tag(SegmentKind kind) { return "</" + std::string(tag_name(kind)) + ">"; }

/// Half-open byte range [start, end) into the source text.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

struct Segment {
  SegmentKind kind;
  std::string body;
  Span span;  ///< location of `body` in the raw text
  bool operator==(const Segment&) const = default;
};

struct Trajectory {
  std::vector<Segment> segments;
  std::string raw;
};

enum class ParseFailure { UnclosedTag, NestedTag, UnknownTag };

constexpr std::string_view to_string(ParseFailure f) noexcept {
  switch (f) {
    case ParseFailure::UnclosedTag: return "UnclosedTag";
    case ParseFailure::NestedTag: return "NestedTag";
    case ParseFailure::UnknownTag: return "UnknownTag";
  }
  return "";
}

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseFailure reason, std::size_t offset)
      : std::runtime_error(std::string(to_string(reason)) + " at byte " + std::to_string(offset)),
        reason_(reason),
        offset_(offset) {}

  ParseFailure reason() const noexcept { return reason_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ParseFailure reason_;
  std::size_t offset_;
};

namespace detail {

struct TagToken {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past '>'
  bool closing = false;
  std::string_view name;
};

inline bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

// A tag literal is '<', optional '/', one or more ASCII letters, '>'.
inline std::optional<TagToken> match_tag(std::string_view s, std::size_t at) {
  if (at >= s.size() || s[at] != '<') return std::nullopt;
  std::size_t j = at + 1;
  const bool closing = j < s.size() && s[j] == '/';
  if (closing) ++j;
  const std::size_t name_begin = j;
  while (j < s.size() && is_ascii_alpha(s[j])) ++j;
  if (j == name_begin || j >= s.size() || s[j] != '>') return std::nullopt;
  return TagToken{at, j + 1, closing, s.substr(name_begin, j - name_begin)};
}

inline std::optional<SegmentKind> known_kind(std::string_view name) {
  for (auto k : {SegmentKind::Think, SegmentKind::Search, SegmentKind::Information, SegmentKind::Answer}) {
    if (tag_name(k) == name) return k;
  }
  return std::nullopt;
}

}  // namespace detail

/// Single-pass scanner. Text outside elements is preserved in `raw` and
/// otherwise ignored. Throws ParseError on unbalanced, nested or unknown tags.
inline Trajectory parse_trajectory(std::string_view text) {
  Trajectory traj;
  traj.raw = std::string(text);
  struct Open {
    SegmentKind kind = SegmentKind::Think;
    std::size_t body_start = 0;
    std::size_t tag_start = 0;
  };
  bool is_open = false;
  Open open;
  std::size_t pos = 0;
  while (true) {
    const std::size_t lt = text.find('<', pos);
    if (lt == std::string_view::npos) break;
    const auto tag = detail::match_tag(text, lt);
    if (!tag) {
      pos = lt + 1;
      continue;
    }
    const auto kind = detail::known_kind(tag->name);
    if (!kind) throw ParseError(ParseFailure::UnknownTag, lt);
    if (is_open) {
      if (!tag->closing || *kind != open.kind) throw ParseError(ParseFailure::NestedTag, lt);
      traj.segments.push_back(Segment{open.kind, std::string(text.substr(open.body_start, lt - open.body_start)),
                                      Span{open.body_start, lt}});
      is_open = false;
    } else {
      // a closing tag with nothing open is an unbalanced pair
      if (tag->closing) throw ParseError(ParseFailure::UnclosedTag, lt);
      open = Open{*kind, tag->end, lt};
      is_open = true;
    }
    pos = tag->end;
  }
  if (is_open) throw ParseError(ParseFailure::UnclosedTag, open.tag_start);
  return traj;
}

/// Rebuilds the source text from segment kinds and bodies, taking inter-tag
/// text from `raw`.
inline std::string render_trajectory(const Trajectory& traj) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& seg : traj.segments) {
    const std::string open = open_tag(seg.kind);
    const std::size_t tag_start = seg.span.start - open.size();
    out.append(traj.raw, pos, tag_start - pos);
    out += open;
    out += seg.body;
    out += close_tag(seg.kind);
    pos = seg.span.end + close_tag(seg.kind).size();
  }
  out.append(traj.raw, pos, std::string::npos);
  return out;
}

struct SearchAction {
  std::string query;
  bool operator==(const SearchAction&) const = default;
};

struct FinalResponseAction {
  std::string answer;
  bool operator==(const FinalResponseAction&) const = default;
};

enum class MalformedReason { UnclosedTag, NestedTag, UnknownTag, EmptyAction, NoAction };

constexpr std::string_view to_string(MalformedReason r) noexcept {
  switch (r) {
    case MalformedReason::UnclosedTag: return "UnclosedTag";
    case MalformedReason::NestedTag: return "NestedTag";
    case MalformedReason::UnknownTag: return "UnknownTag";
    case MalformedReason::EmptyAction: return "EmptyAction";
    case MalformedReason::NoAction: return "NoAction";
  }
  return "";
}

struct Malformed {
  MalformedReason reason;
  bool operator==(const Malformed&) const = default;
};

using ActionEvent = std::variant<SearchAction, FinalResponseAction, Malformed>;

inline MalformedReason to_malformed(ParseFailure f) {
  switch (f) {
    case ParseFailure::UnclosedTag: return MalformedReason::UnclosedTag;
    case ParseFailure::NestedTag: return MalformedReason::NestedTag;
    case ParseFailure::UnknownTag: return MalformedReason::UnknownTag;
  }
  return MalformedReason::NoAction;
}

/// Body of the first Answer segment, if any. Later Answer segments are ignored.
inline std::optional<std::string> first_answer(const Trajectory& traj) {
  for (const auto& seg : traj.segments) {
    if (seg.kind == SegmentKind::Answer) return text::trim(seg.body);
  }
  return std::nullopt;
}

inline std::size_t answer_count(const Trajectory& traj) {
  std::size_t n = 0;
  for (const auto& seg : traj.segments) n += seg.kind == SegmentKind::Answer ? 1 : 0;
  return n;
}

/// Decided by the kind of the final segment only.
inline ActionEvent next_action(const Trajectory& traj) {
  if (traj.segments.empty()) return Malformed{MalformedReason::NoAction};
  const Segment& last = traj.segments.back();
  switch (last.kind) {
    case SegmentKind::Search: {
      auto q = text::trim(last.body);
      if (q.empty()) return Malformed{MalformedReason::EmptyAction};
      return SearchAction{std::move(q)};
    }
    case SegmentKind::Answer: {
      auto a = *first_answer(traj);
      if (a.empty()) return Malformed{MalformedReason::EmptyAction};
      return FinalResponseAction{std::move(a)};
    }
    default:
      return Malformed{MalformedReason::NoAction};
  }
}

/// Parses and classifies a generation in one step; parse failures become
/// Malformed events instead of exceptions.
inline ActionEvent classify(std::string_view generation) {
  try {
    return next_action(parse_trajectory(generation));
  } catch (const ParseError& e) {
    return Malformed{to_malformed(e.reason())};
  }
}

inline constexpr std::string_view kEscapedOpen = "⟨";   // ⟨
inline constexpr std::string_view kEscapedClose = "⟩";  // ⟩

/// Neutralizes every tag literal by swapping its angle brackets for ⟨ ⟩.
/// Other '<' and '>' characters are left alone.
inline std::string escape_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t lt = s.find('<', pos);
    if (lt == std::string_view::npos) {
      out.append(s.substr(pos));
      break;
    }
    out.append(s.substr(pos, lt - pos));
    if (auto tag = detail::match_tag(s, lt)) {
      out += kEscapedOpen;
      out.append(s.substr(lt + 1, tag->end - lt - 2));
      out += kEscapedClose;
      pos = tag->end;
    } else {
      out += '<';
      pos = lt + 1;
    }
  }
  return out;
}

struct EvidenceEntry {
  std::string title;
  std::string text;
};

inline std::string render_information(const std::vector<EvidenceEntry>& evidence) {
  if (evidence.empty()) throw Error(ErrorKind::EmptyEvidence, "render_information needs at least one document");
  std::string body;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (i > 0) body += "\n\n";
    body += "Doc " + std::to_string(i + 1) + " (" + escape_tags(evidence[i].title) + "): " + escape_tags(evidence[i].text);
  }
  return open_tag(SegmentKind::Information) + body + close_tag(SegmentKind::Information);
}

/// Appended after a generation that carries no valid action. The tag names are
/// written in escaped form so the message itself never parses as an action.
inline const std::string& self_correction_message() {
  static const std::string msg =
      "Your previous output did not contain a valid action. Continue by emitting exactly one "
      "⟨search⟩query⟨/search⟩ or ⟨answer⟩final answer⟨/answer⟩ block.";
  return msg;
}

}  // namespace crosearch::protocol
