#include "shotlist/templates.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace shotlist::templates {
namespace {

Slot make_slot(SlotKind kind, const lingo::AnnotatedText& ann, std::size_t i) {
  switch (kind) {
    case SlotKind::Token:
      return {kind, ann.tokens[i].text};
    case SlotKind::Lemma:
      return {kind, ann.lemmas[i]};
    case SlotKind::Pos:
      return {kind, std::string(lingo::to_string(ann.pos[i]))};
  }
  return {};
}

std::string_view kind_name(SlotKind kind) {
  switch (kind) {
    case SlotKind::Token:
      return "Token";
    case SlotKind::Lemma:
      return "Lemma";
    case SlotKind::Pos:
      return "Pos";
  }
  return "?";
}

}  // namespace

std::string Template::render() const {
  std::string out;
  for (const auto& s : slots) {
    if (!out.empty()) out += ' ';
    out += kind_name(s.kind);
    out += '(';
    out += s.value;
    out += ')';
  }
  return out;
}

int sparsity(const Template& t) {
  int g = 0;
  for (const auto& s : t.slots) {
    switch (s.kind) {
      case SlotKind::Token:
        g += 1;
        break;
      case SlotKind::Lemma:
        g += 2;
        break;
      case SlotKind::Pos:
        g += 4;
        break;
    }
  }
  return g;
}

double weight(const Template& t) {
  if (t.distinct_sources == 0) throw std::invalid_argument("template covers no source input");
  return static_cast<double>(sparsity(t)) / static_cast<double>(t.distinct_sources);
}

std::vector<Template> generalize(const textdiff::KeyPhrase& phrase,
                                 const lingo::AnnotatedText& ann) {
  if (phrase.first >= phrase.last || phrase.last > ann.size())
    throw std::out_of_range("key phrase span outside annotation");
  const std::size_t len = phrase.last - phrase.first;
  constexpr SlotKind kKinds[] = {SlotKind::Token, SlotKind::Lemma, SlotKind::Pos};

  std::vector<Template> out;
  if (len > kMaxCombinatorialLength) {
    for (auto kind : kKinds) {
      Template t;
      for (std::size_t i = phrase.first; i < phrase.last; ++i)
        t.slots.push_back(make_slot(kind, ann, i));
      out.push_back(std::move(t));
    }
    return out;
  }

  std::size_t combos = 1;
  for (std::size_t i = 0; i < len; ++i) combos *= 3;
  out.reserve(combos);
  for (std::size_t code = 0; code < combos; ++code) {
    // First position is the most significant base-3 digit.
    Template t;
    t.slots.resize(len);
    std::size_t rest = code;
    for (std::size_t p = len; p-- > 0;) {
      t.slots[p] = make_slot(kKinds[rest % 3], ann, phrase.first + p);
      rest /= 3;
    }
    out.push_back(std::move(t));
  }
  return out;
}

bool slot_matches(const Slot& slot, const lingo::AnnotatedText& ann, std::size_t i) {
  switch (slot.kind) {
    case SlotKind::Token:
      return ann.tokens[i].text == slot.value;
    case SlotKind::Lemma:
      return textdiff::to_lower(ann.lemmas[i]) == textdiff::to_lower(slot.value);
    case SlotKind::Pos:
      return lingo::to_string(ann.pos[i]) == slot.value;
  }
  return false;
}

bool matches_span(const Template& t, const lingo::AnnotatedText& ann, std::size_t first,
                  std::size_t last) {
  if (last > ann.size() || last < first || last - first != t.slots.size()) return false;
  for (std::size_t k = 0; k < t.slots.size(); ++k)
    if (!slot_matches(t.slots[k], ann, first + k)) return false;
  return true;
}

std::vector<std::pair<std::size_t, std::size_t>> match(const Template& t,
                                                       const lingo::AnnotatedText& ann) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  const std::size_t len = t.slots.size();
  if (len == 0 || ann.size() < len) return spans;
  std::size_t i = 0;
  while (i + len <= ann.size()) {
    if (matches_span(t, ann, i, i + len)) {
      spans.emplace_back(i, i + len);
      i += len;
    } else {
      ++i;
    }
  }
  return spans;
}

std::vector<Template> induce(const std::vector<AnnotatedElement>& elements) {
  std::map<std::vector<Slot>, Template> unique;
  for (const auto& e : elements) {
    for (auto& t : generalize(e.element.key_phrase, e.annotation))
      unique.try_emplace(t.slots, std::move(t));
  }

  std::vector<Template> out;
  out.reserve(unique.size());
  for (auto& [slots, t] : unique) {
    std::set<std::string> sources;
    for (const auto& e : elements) {
      const auto& kp = e.element.key_phrase;
      if (matches_span(t, e.annotation, kp.first, kp.last)) {
        t.covered.insert(e.element.id);
        sources.insert(e.element.source_example_id);
      }
    }
    t.distinct_sources = sources.size();
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Template> select_representative(const std::vector<Template>& candidates,
                                            const std::vector<CoverageElement>& elements) {
  std::set<std::size_t> known;
  for (const auto& e : elements) known.insert(e.id);

  std::set<std::size_t> uncovered;
  for (const auto& t : candidates) {
    for (auto id : t.covered) {
      if (!known.count(id)) throw std::invalid_argument("template covers an unknown element");
      uncovered.insert(id);
    }
  }

  std::vector<std::string> renders;
  renders.reserve(candidates.size());
  for (const auto& t : candidates) renders.push_back(t.render());

  std::vector<bool> taken(candidates.size(), false);
  std::vector<Template> chosen;
  while (!uncovered.empty()) {
    std::size_t best = candidates.size();
    std::size_t best_new = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (taken[c] || candidates[c].distinct_sources == 0) continue;
      std::size_t fresh = 0;
      for (auto id : candidates[c].covered) fresh += uncovered.count(id);
      if (fresh == 0) continue;
      if (best == candidates.size()) {
        best = c;
        best_new = fresh;
        continue;
      }
      // Compare g_c / (x_c * new_c) against g_b / (x_b * new_b) exactly.
      const auto& tc = candidates[c];
      const auto& tb = candidates[best];
      const long long gc = sparsity(tc), gb = sparsity(tb);
      const long long lhs = gc * static_cast<long long>(tb.distinct_sources * best_new);
      const long long rhs = gb * static_cast<long long>(tc.distinct_sources * fresh);
      bool better = lhs < rhs;
      if (lhs == rhs) {
        if (gc != gb)
          better = gc < gb;
        else if (fresh != best_new)
          better = fresh > best_new;
        else
          better = renders[c] < renders[best];
      }
      if (better) {
        best = c;
        best_new = fresh;
      }
    }
    if (best == candidates.size()) break;
    taken[best] = true;
    for (auto id : candidates[best].covered) uncovered.erase(id);
    chosen.push_back(candidates[best]);
  }
  return chosen;
}

}  // namespace shotlist::templates
