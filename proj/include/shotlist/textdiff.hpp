#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace shotlist::textdiff {

struct Token {
  std::string text;
  std::size_t begin = 0;  // byte offset into the source text
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

/// Tokens plus the text they were cut from, so spans can be mapped back to
/// the original bytes (including whitespace between tokens).
struct TokenSeq {
  std::string source;
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }

  /// Source substring covering tokens [first, last).
  std::string span_text(std::size_t first, std::size_t last) const;

  bool operator==(const TokenSeq&) const = default;
};

/// Whitespace split; leading and trailing punctuation characters of each
/// chunk become their own tokens. A chunk made only of punctuation stays whole.
TokenSeq tokenize(std::string_view text);

enum class EditKind { Keep, Substitute, Delete, Insert };

struct EditOp {
  EditKind kind;
  std::size_t src = 0;  // index into x (unused for Insert)
  std::size_t dst = 0;  // index into y (unused for Delete)

  bool operator==(const EditOp&) const = default;
};

struct EditScript {
  std::vector<EditOp> ops;

  /// Number of non-Keep operations.
  std::size_t cost() const;
};

/// Minimum-cost unit Levenshtein script over tokens. Among minimum-cost
/// scripts the one with the most Keeps is chosen; remaining ties are broken
/// Keep > Substitute > Delete > Insert walking from the end.
EditScript edit_script(const std::vector<std::string>& x, const std::vector<std::string>& y);
EditScript edit_script(const TokenSeq& x, const TokenSeq& y);

/// Plain DP distance, no backtrace.
std::size_t edit_distance(const std::vector<std::string>& x, const std::vector<std::string>& y);

/// Edit cost divided by max(|x|, |y|); 0 when both are empty.
double normalized_distance(const TokenSeq& x, const TokenSeq& y);
double normalized_distance(std::string_view x, std::string_view y);

enum class PhraseSource { UnmodifiedPart, ModifiedPart, FullSentence, Matched };

struct KeyPhrase {
  std::string text;
  std::size_t first = 0;  // token span [first, last) in the input
  std::size_t last = 0;
  PhraseSource source = PhraseSource::FullSentence;

  bool operator==(const KeyPhrase&) const = default;
};

/// Threshold on normalized distance at or above which the retained part of
/// the input is the key phrase.
inline constexpr double kKeyPhraseThreshold = 0.5;

std::vector<KeyPhrase> extract_key_phrases(std::string_view input, std::string_view output);

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string text;

  bool operator==(const CharSpan&) const = default;
};

struct DiffSpans {
  std::vector<CharSpan> deleted;  // in the input
  std::vector<CharSpan> added;    // in the output
};

DiffSpans diff_spans(std::string_view input, std::string_view output);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace shotlist::textdiff
