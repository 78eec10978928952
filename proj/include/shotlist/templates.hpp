#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "shotlist/lingo.hpp"
#include "shotlist/textdiff.hpp"

namespace shotlist::templates {

enum class SlotKind { Token, Lemma, Pos };

struct Slot {
  SlotKind kind = SlotKind::Token;
  std::string value;  // token text, lemma, or POS tag name

  auto operator<=>(const Slot&) const = default;
};

struct Template {
  std::vector<Slot> slots;
  std::set<std::size_t> covered;      // coverage element ids
  std::size_t distinct_sources = 0;   // unique inputs among covered elements

  /// e.g. "Token(on) Pos(NUM)"
  std::string render() const;
  bool operator==(const Template&) const = default;
};

/// One (example, key phrase) pair to be covered.
struct CoverageElement {
  std::size_t id = 0;
  textdiff::KeyPhrase key_phrase;
  std::string source_example_id;
};

/// Per-slot abstraction cost: Token 1, Lemma 2, Pos 4.
int sparsity(const Template& t);

/// Phrases up to this many tokens expand into every per-slot combination.
inline constexpr std::size_t kMaxCombinatorialLength = 4;

/// Expands the phrase's token span into templates. Coverage is left empty.
/// Throws std::out_of_range when the span does not fit the annotation.
std::vector<Template> generalize(const textdiff::KeyPhrase& phrase,
                                 const lingo::AnnotatedText& ann);

bool slot_matches(const Slot& slot, const lingo::AnnotatedText& ann, std::size_t i);

/// Leftmost non-overlapping matches as token spans [first, last).
std::vector<std::pair<std::size_t, std::size_t>> match(const Template& t,
                                                       const lingo::AnnotatedText& ann);

/// True when the template matches exactly the tokens of the span.
bool matches_span(const Template& t, const lingo::AnnotatedText& ann, std::size_t first,
                  std::size_t last);

/// Element whose annotation is carried alongside, for coverage computation.
struct AnnotatedElement {
  CoverageElement element;
  lingo::AnnotatedText annotation;  // of the element's source input
};

/// Generalizes every element's key phrase, deduplicates the templates, and
/// fills in coverage and distinct-source counts against all elements.
std::vector<Template> induce(const std::vector<AnnotatedElement>& elements);

/// Greedy weighted set cover with w(t) = g(t) / |t|_x: repeatedly takes the
/// template with the least weight per newly covered element until nothing
/// new can be covered. Ties go to lower g, then more new coverage, then the
/// lexicographically smaller rendering.
std::vector<Template> select_representative(const std::vector<Template>& candidates,
                                            const std::vector<CoverageElement>& elements);

/// w(t) = g(t) / |t|_x
double weight(const Template& t);

}  // namespace shotlist::templates
