#include "shotlist/textdiff.hpp"

#include <algorithm>
#include <cctype>

namespace shotlist::textdiff {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> texts(const TokenSeq& seq) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (const auto& t : seq.tokens) out.push_back(t.text);
  return out;
}

// Cell value of the alignment DP: cost first, then more keeps.
struct Cell {
  std::size_t cost = 0;
  std::size_t keeps = 0;

  bool better_than(const Cell& o) const {
    return cost < o.cost || (cost == o.cost && keeps > o.keeps);
  }
  bool operator==(const Cell&) const = default;
};

std::vector<std::vector<Cell>> align_table(const std::vector<std::string>& x,
                                           const std::vector<std::string>& y) {
  const std::size_t n = x.size(), m = y.size();
  std::vector<std::vector<Cell>> t(n + 1, std::vector<Cell>(m + 1));
  for (std::size_t i = 1; i <= n; ++i) t[i][0] = {i, 0};
  for (std::size_t j = 1; j <= m; ++j) t[0][j] = {j, 0};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const Cell& diag = t[i - 1][j - 1];
      Cell best = x[i - 1] == y[j - 1] ? Cell{diag.cost, diag.keeps + 1}
                                       : Cell{diag.cost + 1, diag.keeps};
      const Cell del{t[i - 1][j].cost + 1, t[i - 1][j].keeps};
      const Cell ins{t[i][j - 1].cost + 1, t[i][j - 1].keeps};
      if (del.better_than(best)) best = del;
      if (ins.better_than(best)) best = ins;
      t[i][j] = best;
    }
  }
  return t;
}

}  // namespace

std::string TokenSeq::span_text(std::size_t first, std::size_t last) const {
  if (first >= last || last > tokens.size()) return {};
  const auto b = tokens[first].begin;
  return source.substr(b, tokens[last - 1].end - b);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  seq.source = std::string(text);
  auto push = [&](std::size_t b, std::size_t e) {
    seq.tokens.push_back({std::string(text.substr(b, e - b)), b, e});
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t b = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    std::size_t e = i;

    const bool all_punct =
        std::all_of(text.begin() + b, text.begin() + e, [](char c) { return is_punct(c); });
    if (all_punct) {
      push(b, e);
      continue;
    }
    std::size_t core_b = b, core_e = e;
    while (is_punct(text[core_b])) ++core_b;
    while (is_punct(text[core_e - 1])) --core_e;
    for (std::size_t p = b; p < core_b; ++p) push(p, p + 1);
    push(core_b, core_e);
    for (std::size_t p = core_e; p < e; ++p) push(p, p + 1);
  }
  return seq;
}

std::size_t EditScript::cost() const {
  return static_cast<std::size_t>(std::count_if(
      ops.begin(), ops.end(), [](const EditOp& op) { return op.kind != EditKind::Keep; }));
}

std::size_t edit_distance(const std::vector<std::string>& x, const std::vector<std::string>& y) {
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

EditScript edit_script(const std::vector<std::string>& x, const std::vector<std::string>& y) {
  const auto t = align_table(x, y);
  EditScript script;
  std::size_t i = x.size(), j = y.size();
  while (i > 0 || j > 0) {
    const Cell& here = t[i][j];
    if (i > 0 && j > 0) {
      const Cell& diag = t[i - 1][j - 1];
      if (x[i - 1] == y[j - 1] && here == Cell{diag.cost, diag.keeps + 1}) {
        script.ops.push_back({EditKind::Keep, i - 1, j - 1});
        --i, --j;
        continue;
      }
      if (x[i - 1] != y[j - 1] && here == Cell{diag.cost + 1, diag.keeps}) {
        script.ops.push_back({EditKind::Substitute, i - 1, j - 1});
        --i, --j;
        continue;
      }
    }
    if (i > 0 && here == Cell{t[i - 1][j].cost + 1, t[i - 1][j].keeps}) {
      script.ops.push_back({EditKind::Delete, i - 1, 0});
      --i;
      continue;
    }
    script.ops.push_back({EditKind::Insert, 0, j - 1});
    --j;
  }
  std::reverse(script.ops.begin(), script.ops.end());
  return script;
}

EditScript edit_script(const TokenSeq& x, const TokenSeq& y) {
  return edit_script(texts(x), texts(y));
}

double normalized_distance(const TokenSeq& x, const TokenSeq& y) {
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(texts(x), texts(y))) / static_cast<double>(longest);
}

double normalized_distance(std::string_view x, std::string_view y) {
  return normalized_distance(tokenize(x), tokenize(y));
}

std::vector<KeyPhrase> extract_key_phrases(std::string_view input, std::string_view output) {
  const TokenSeq x = tokenize(input);
  const auto full = [&] {
    return std::vector<KeyPhrase>{
        {x.span_text(0, x.size()), 0, x.size(), PhraseSource::FullSentence}};
  };
  if (trim(output) == "N/A" || x.empty()) return full();

  const TokenSeq y = tokenize(output);
  const EditScript script = edit_script(x, y);
  const std::size_t longest = std::max(x.size(), y.size());
  const double d = static_cast<double>(script.cost()) / static_cast<double>(longest);
  const bool want_kept = d >= kKeyPhraseThreshold;

  std::vector<bool> kept(x.size(), false);
  for (const auto& op : script.ops)
    if (op.kind == EditKind::Keep) kept[op.src] = true;

  std::vector<KeyPhrase> phrases;
  const auto source = want_kept ? PhraseSource::UnmodifiedPart : PhraseSource::ModifiedPart;
  std::size_t i = 0;
  while (i < x.size()) {
    if (kept[i] != want_kept) {
      ++i;
      continue;
    }
    std::size_t b = i;
    while (i < x.size() && kept[i] == want_kept) ++i;
    phrases.push_back({x.span_text(b, i), b, i, source});
  }
  if (phrases.empty()) return full();
  return phrases;
}

DiffSpans diff_spans(std::string_view input, std::string_view output) {
  const TokenSeq x = tokenize(input);
  const TokenSeq y = tokenize(output);
  const EditScript script = edit_script(x, y);

  std::vector<bool> del(x.size(), false), add(y.size(), false);
  for (const auto& op : script.ops) {
    if (op.kind == EditKind::Delete || op.kind == EditKind::Substitute) del[op.src] = true;
    if (op.kind == EditKind::Insert || op.kind == EditKind::Substitute) add[op.dst] = true;
  }
  auto runs = [](const TokenSeq& seq, const std::vector<bool>& mark) {
    std::vector<CharSpan> spans;
    std::size_t i = 0;
    while (i < seq.size()) {
      if (!mark[i]) {
        ++i;
        continue;
      }
      std::size_t b = i;
      while (i < seq.size() && mark[i]) ++i;
      spans.push_back({seq[b].begin, seq[i - 1].end, seq.span_text(b, i)});
    }
    return spans;
  };
  return {runs(x, del), runs(y, add)};
}

}  // namespace shotlist::textdiff
