#include "shotlist/lingo.hpp"

#include <httplib.h>
#include <json.hpp>

#include <array>
#include <cctype>
#include <cstdint>
#include <unordered_map>

namespace shotlist::lingo {
namespace {

using textdiff::to_lower;

constexpr std::array<std::string_view, 13> kPosNames = {
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "PART", "PROPN", "PUNCT", "SYM", "X"};

const std::unordered_map<std::string_view, Pos>& lexicon() {
  static const std::unordered_map<std::string_view, Pos> table = [] {
    std::unordered_map<std::string_view, Pos> t;
    auto add = [&](Pos p, std::initializer_list<std::string_view> words) {
      for (auto w : words) t.emplace(w, p);
    };
    add(Pos::DET, {"the", "a", "an", "this", "that", "these", "those", "every", "each", "some",
                   "any", "no", "all", "both", "another"});
    add(Pos::PRON, {"i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us",
                    "them", "my", "your", "his", "its", "our", "their", "mine", "yours",
                    "myself", "yourself", "who", "what", "which", "someone", "everyone",
                    "anyone", "nobody", "something", "nothing", "everything"});
    add(Pos::ADP, {"in", "on", "at", "of", "for", "with", "by", "from", "into", "onto", "about",
                   "after", "before", "since", "until", "during", "over", "under", "between",
                   "through", "around", "near", "per", "via", "upon", "across", "against"});
    add(Pos::PART, {"not", "to", "n't", "'s", "up", "off", "out"});
    add(Pos::VERB, {"is", "are", "was", "were", "be", "been", "being", "am", "have", "has",
                    "had", "do", "does", "did", "will", "would", "can", "could", "shall",
                    "should", "may", "might", "must", "go", "get", "got", "make", "made", "see",
                    "saw", "take", "took", "come", "came", "say", "said", "know", "knew",
                    "think", "love", "want", "need", "meet", "met", "let", "celebrate"});
    add(Pos::ADV, {"very", "also", "just", "still", "already", "soon", "now", "then", "here",
                   "there", "again", "never", "always", "often", "really", "too", "so",
                   "when", "where", "why", "how", "ago", "later", "once"});
    add(Pos::ADJ, {"good", "bad", "new", "old", "great", "happy", "merry", "last", "next",
                   "first", "best", "big", "small", "late", "early", "nice", "free"});
    add(Pos::NOUN, {"today", "yesterday", "tomorrow", "tonight", "morning", "evening",
                    "afternoon", "night", "day", "days", "week", "weeks", "month", "months",
                    "year", "years", "weekend", "time", "date", "photo", "class", "meeting",
                    "party", "song", "game", "team", "people", "thing"});
    add(Pos::NUM, {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
                   "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
                   "seventeen", "eighteen", "nineteen", "twenty", "thirty", "forty", "fifty",
                   "sixty", "seventy", "eighty", "ninety", "hundred", "thousand", "million"});
    add(Pos::PROPN, {"january", "february", "march", "april", "june", "july", "august",
                     "september", "october", "november", "december", "monday", "tuesday",
                     "wednesday", "thursday", "friday", "saturday", "sunday", "christmas",
                     "halloween", "thanksgiving", "easter"});
    return t;
  }();
  return table;
}

const std::unordered_map<std::string_view, std::string_view>& irregular_lemmas() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"is", "be"},     {"are", "be"},    {"was", "be"},      {"were", "be"},  {"am", "be"},
      {"been", "be"},   {"being", "be"},  {"has", "have"},    {"had", "have"}, {"does", "do"},
      {"did", "do"},    {"went", "go"},   {"got", "get"},     {"made", "make"}, {"saw", "see"},
      {"took", "take"}, {"came", "come"}, {"said", "say"},    {"knew", "know"}, {"met", "meet"},
      {"children", "child"}, {"people", "person"}, {"men", "man"}, {"women", "woman"}};
  return table;
}

bool is_number_token(std::string_view s) {
  if (s.empty() || !std::isdigit(static_cast<unsigned char>(s.front()))) return false;
  std::size_t i = 0;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '/' ||
                          s[i] == '-' || s[i] == '.' || s[i] == ':' || s[i] == ','))
    ++i;
  const std::string rest = to_lower(s.substr(i));
  return rest.empty() || rest == "st" || rest == "nd" || rest == "rd" || rest == "th" ||
         rest == "s";
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool all_punct(std::string_view s) {
  for (char c : s)
    if (!std::ispunct(static_cast<unsigned char>(c))) return false;
  return !s.empty();
}

Pos tag_token(std::string_view tok) {
  if (all_punct(tok)) {
    static constexpr std::string_view kSymbols = "@#$%&*+<=>^|~";
    return (tok.size() == 1 && kSymbols.find(tok[0]) != std::string_view::npos) ? Pos::SYM
                                                                               : Pos::PUNCT;
  }
  if (is_number_token(tok)) return Pos::NUM;
  const std::string lower = to_lower(tok);
  if (auto it = lexicon().find(lower); it != lexicon().end()) return it->second;
  if (std::isupper(static_cast<unsigned char>(tok.front()))) return Pos::PROPN;
  if (ends_with(lower, "ly")) return Pos::ADV;
  if (ends_with(lower, "ing") || ends_with(lower, "ed")) return Pos::VERB;
  if (ends_with(lower, "tion") || ends_with(lower, "ment") || ends_with(lower, "ness") ||
      ends_with(lower, "ity") || ends_with(lower, "ship"))
    return Pos::NOUN;
  if (ends_with(lower, "ous") || ends_with(lower, "ful") || ends_with(lower, "ive") ||
      ends_with(lower, "able") || ends_with(lower, "less"))
    return Pos::ADJ;
  return Pos::X;
}

std::string lemmatize(std::string_view tok, Pos tag) {
  std::string w = to_lower(tok);
  if (tag == Pos::PROPN || tag == Pos::NUM || tag == Pos::PUNCT || tag == Pos::SYM) return w;
  if (auto it = irregular_lemmas().find(w); it != irregular_lemmas().end())
    return std::string(it->second);
  if (auto it = lexicon().find(w); it != lexicon().end() && it->second != Pos::NOUN) return w;
  if (w.size() > 4 && ends_with(w, "ies")) return w.substr(0, w.size() - 3) + "y";
  if (w.size() > 5 && ends_with(w, "ing")) return w.substr(0, w.size() - 3);
  if (w.size() > 4 && ends_with(w, "ed")) return w.substr(0, w.size() - 2);
  if (w.size() > 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
      !ends_with(w, "is"))
    return w.substr(0, w.size() - 1);
  return w;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json post_texts(const HttpServiceConfig& config, std::string_view text) {
  httplib::Client client(config.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  const nlohmann::json body = {{"texts", {std::string(text)}}};
  auto res = client.Post(config.path, body.dump(), "application/json");
  if (!res) throw BackendError("annotation service unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw BackendError("annotation service returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("annotation service sent invalid JSON: ") + e.what());
  }
}

}  // namespace

std::string_view to_string(Pos tag) { return kPosNames[static_cast<std::size_t>(tag)]; }

Pos parse_pos(std::string_view name) {
  for (std::size_t i = 0; i < kPosNames.size(); ++i)
    if (kPosNames[i] == name) return static_cast<Pos>(i);
  throw std::invalid_argument("unknown POS tag: " + std::string(name));
}

AnnotatedText DefaultAnnotator::annotate(std::string_view text) const {
  AnnotatedText out;
  out.tokens = textdiff::tokenize(text);
  out.lemmas.reserve(out.tokens.size());
  out.pos.reserve(out.tokens.size());
  for (const auto& tok : out.tokens.tokens) {
    const Pos tag = tag_token(tok.text);
    out.pos.push_back(tag);
    out.lemmas.push_back(lemmatize(tok.text, tag));
  }
  return out;
}

Embedding HashedNgramEmbedder::embed(std::string_view text) const {
  Embedding v = Embedding::Zero(kDimension);
  if (textdiff::trim(text).empty()) return v;
  const std::string padded = " " + to_lower(text) + " ";
  for (std::size_t n = 3; n <= 5; ++n) {
    if (padded.size() < n) break;
    for (std::size_t i = 0; i + n <= padded.size(); ++i) {
      const auto h = fnv1a(std::string_view(padded).substr(i, n));
      v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(kDimension))] += 1.0;
    }
  }
  const double norm = v.norm();
  if (norm > 0) v /= norm;
  return v;
}

AnnotatedText assemble_annotation(std::string_view text, const std::vector<std::string>& tokens,
                                  const std::vector<std::string>& lemmas,
                                  const std::vector<std::string>& pos) {
  if (tokens.size() != lemmas.size() || tokens.size() != pos.size())
    throw BackendError("annotation lists differ in length");
  AnnotatedText out;
  out.tokens.source = std::string(text);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto at = text.find(tokens[i], cursor);
    if (tokens[i].empty() || at == std::string_view::npos)
      throw BackendError("annotation token not found in text: " + tokens[i]);
    out.tokens.tokens.push_back({tokens[i], at, at + tokens[i].size()});
    cursor = at + tokens[i].size();
    out.lemmas.push_back(lemmas[i]);
    try {
      out.pos.push_back(parse_pos(pos[i]));
    } catch (const std::invalid_argument& e) {
      throw BackendError(e.what());
    }
  }
  return out;
}

AnnotatedText HttpAnnotator::annotate(std::string_view text) const {
  const auto reply = post_texts(config_, text);
  try {
    const auto& item = reply.at("annotations").at(0);
    return assemble_annotation(text, item.at("tokens").get<std::vector<std::string>>(),
                               item.at("lemmas").get<std::vector<std::string>>(),
                               item.at("pos").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed annotation reply: ") + e.what());
  }
}

Embedding HttpEmbedder::embed(std::string_view text) const {
  const auto reply = post_texts(config_, text);
  std::vector<double> raw;
  try {
    raw = reply.at("vectors").at(0).get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed embedding reply: ") + e.what());
  }
  if (static_cast<Eigen::Index>(raw.size()) != dimension_)
    throw BackendError("embedding dimension mismatch");
  Embedding v = Eigen::Map<const Embedding>(raw.data(), dimension_);
  const double norm = v.norm();
  if (norm > 0) v /= norm;
  return v;
}

}  // namespace shotlist::lingo
