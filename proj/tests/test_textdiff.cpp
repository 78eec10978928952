#include <doctest.h>

#include <algorithm>
#include <functional>

#include "shotlist/textdiff.hpp"

using namespace shotlist::textdiff;
using Toks = std::vector<std::string>;

namespace {

std::vector<std::string> texts(const TokenSeq& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) out.push_back(t.text);
  return out;
}

std::vector<EditKind> kinds(const EditScript& s) {
  std::vector<EditKind> out;
  for (const auto& op : s.ops) out.push_back(op.kind);
  return out;
}

// Replays a script and checks it really turns x into y.
bool script_transforms(const EditScript& s, const std::vector<std::string>& x,
                       const std::vector<std::string>& y) {
  std::vector<std::string> out;
  std::size_t xi = 0, yi = 0;
  for (const auto& op : s.ops) {
    switch (op.kind) {
      case EditKind::Keep:
        if (op.src != xi || op.dst != yi || x[xi] != y[yi]) return false;
        out.push_back(x[xi++]);
        ++yi;
        break;
      case EditKind::Substitute:
        if (op.src != xi || op.dst != yi || x[xi] == y[yi]) return false;
        out.push_back(y[yi++]);
        ++xi;
        break;
      case EditKind::Delete:
        if (op.src != xi) return false;
        ++xi;
        break;
      case EditKind::Insert:
        if (op.dst != yi) return false;
        out.push_back(y[yi++]);
        break;
    }
  }
  return xi == x.size() && yi == y.size() && out == y;
}

}  // namespace

TEST_CASE("tokenize splits punctuation off words") {
  CHECK(texts(tokenize("Oct. 23, 1999")) == std::vector<std::string>{"Oct", ".", "23", ",", "1999"});
  CHECK(tokenize("").empty());
  CHECK(texts(tokenize("today")) == std::vector<std::string>{"today"});
  CHECK(texts(tokenize("(hello)!")) == std::vector<std::string>{"(", "hello", ")", "!"});
  CHECK(texts(tokenize("a == b")) == std::vector<std::string>{"a", "==", "b"});
  CHECK(texts(tokenize("03/14/2021.")) == std::vector<std::string>{"03/14/2021", "."});
}

TEST_CASE("token offsets map back to the source") {
  const std::string s = "  Took a photo today.";
  const auto seq = tokenize(s);
  for (const auto& t : seq.tokens) CHECK(s.substr(t.begin, t.end - t.begin) == t.text);
  CHECK(seq.span_text(1, 3) == "a photo");
  CHECK(seq.span_text(3, 5) == "today.");
}

TEST_CASE("edit_script basic cases") {
  const std::vector<std::string> abc{"a", "b", "c"}, ac{"a", "c"};
  SUBCASE("identity") {
    const auto s = edit_script(abc, abc);
    CHECK(s.cost() == 0);
    CHECK(kinds(s) == std::vector<EditKind>(3, EditKind::Keep));
  }
  SUBCASE("one deletion") {
    const auto s = edit_script(abc, ac);
    CHECK(s.cost() == 1);
    CHECK(kinds(s) == std::vector<EditKind>{EditKind::Keep, EditKind::Delete, EditKind::Keep});
  }
  SUBCASE("insert into empty") {
    const auto s = edit_script(Toks{}, Toks{"a"});
    CHECK(kinds(s) == std::vector<EditKind>{EditKind::Insert});
  }
  SUBCASE("substitution preferred over delete+insert") {
    const auto s = edit_script(Toks{"x"}, Toks{"y"});
    CHECK(kinds(s) == std::vector<EditKind>{EditKind::Substitute});
  }
}

TEST_CASE("edit_script matches an independent recursive distance") {
  // Memo-free recursion is the oracle; keep sequences short.
  std::function<std::size_t(const std::vector<std::string>&, std::size_t,
                            const std::vector<std::string>&, std::size_t)>
      lev = [&](const auto& x, std::size_t i, const auto& y, std::size_t j) -> std::size_t {
    if (i == x.size()) return y.size() - j;
    if (j == y.size()) return x.size() - i;
    if (x[i] == y[j]) return lev(x, i + 1, y, j + 1);
    return 1 + std::min({lev(x, i + 1, y, j), lev(x, i, y, j + 1), lev(x, i + 1, y, j + 1)});
  };
  const std::vector<std::string> alphabet{"a", "b"};
  std::vector<std::vector<std::string>> seqs{{}};
  for (std::size_t len = 1; len <= 4; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& s : seqs)
      if (s.size() == len - 1)
        for (const auto& a : alphabet) {
          auto t = s;
          t.push_back(a);
          next.push_back(t);
        }
    seqs.insert(seqs.end(), next.begin(), next.end());
  }
  for (const auto& x : seqs)
    for (const auto& y : seqs) {
      const auto s = edit_script(x, y);
      REQUIRE(s.cost() == lev(x, 0, y, 0));
      REQUIRE(edit_distance(x, y) == s.cost());
      REQUIRE(script_transforms(s, x, y));
    }
}

TEST_CASE("normalized distance") {
  CHECK(normalized_distance("a b c", "a b c") == 0.0);
  CHECK(normalized_distance("", "") == 0.0);
  CHECK(normalized_distance("Took a photo today .", "today") == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(normalized_distance("a b c", "x y z") == 1.0);
}

TEST_CASE("key phrase: retained span when most of the input changes") {
  const auto phrases = extract_key_phrases("Took a photo today.", "today == 2014-03-30");
  REQUIRE(phrases.size() == 1);
  CHECK(phrases[0].text == "today");
  CHECK(phrases[0].source == PhraseSource::UnmodifiedPart);
  CHECK(phrases[0].first == 3);
  CHECK(phrases[0].last == 4);
}

TEST_CASE("key phrase: question rewrite") {
  const std::string x = "Q: What room is this? A: bathroom";
  const std::string y = "Q: Is this a bathroom? A: yes";
  const double d = normalized_distance(x, y);
  // 5 edits over 10 tokens: exactly on the boundary.
  CHECK(d == 0.5);
  const auto phrases = extract_key_phrases(x, y);
  REQUIRE(!phrases.empty());
  // d >= 0.5, so the kept tokens are the phrases.
  for (const auto& p : phrases) CHECK(p.source == PhraseSource::UnmodifiedPart);
  std::vector<std::string> got;
  for (const auto& p : phrases) got.push_back(p.text);
  CHECK(got == std::vector<std::string>{"Q:", "? A:"});
}

TEST_CASE("key phrase: modified span when most of the input is kept") {
  const auto phrases = extract_key_phrases("She is reading a book", "She is writing a book");
  REQUIRE(phrases.size() == 1);
  CHECK(phrases[0].source == PhraseSource::ModifiedPart);
  CHECK(phrases[0].text == "reading");
  CHECK(phrases[0].first == 2);

  // A pure insertion modifies no input token.
  const auto inserted = extract_key_phrases("She is reading a book", "She is not reading a book");
  REQUIRE(inserted.size() == 1);
  CHECK(inserted[0].source == PhraseSource::FullSentence);
}

TEST_CASE("key phrase: branch boundary at exactly 0.5") {
  // 2 of 4 tokens substituted: d == 0.5 takes the retained branch.
  const auto p = extract_key_phrases("a b c d", "a b x y");
  REQUIRE(p.size() == 1);
  CHECK(p[0].source == PhraseSource::UnmodifiedPart);
  CHECK(p[0].text == "a b");
  const auto q = extract_key_phrases("a b c d", "a b c y");
  REQUIRE(q.size() == 1);
  CHECK(q[0].source == PhraseSource::ModifiedPart);
  CHECK(q[0].text == "d");
}

TEST_CASE("key phrase: negative output uses the full sentence") {
  const auto phrases = extract_key_phrases("I love this song.", "N/A");
  REQUIRE(phrases.size() == 1);
  CHECK(phrases[0].source == PhraseSource::FullSentence);
  CHECK(phrases[0].text == "I love this song.");
}

TEST_CASE("diff_spans") {
  SUBCASE("identical") {
    const auto d = diff_spans("same text", "same text");
    CHECK(d.deleted.empty());
    CHECK(d.added.empty());
  }
  SUBCASE("insertion") {
    const auto d = diff_spans("is reading", "is not reading");
    CHECK(d.deleted.empty());
    REQUIRE(d.added.size() == 1);
    CHECK(d.added[0].text == "not");
    CHECK(d.added[0].begin == 3);
  }
  SUBCASE("everything deleted") {
    const auto d = diff_spans("abc", "");
    REQUIRE(d.deleted.size() == 1);
    CHECK(d.deleted[0].text == "abc");
    CHECK(d.added.empty());
  }
  SUBCASE("adjacent edits merge") {
    const auto d = diff_spans("a b c d", "a x y d");
    REQUIRE(d.deleted.size() == 1);
    CHECK(d.deleted[0].text == "b c");
    REQUIRE(d.added.size() == 1);
    CHECK(d.added[0].text == "x y");
  }
}
