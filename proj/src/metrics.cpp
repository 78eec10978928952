#include "shotlist/metrics.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

#include "shotlist/textdiff.hpp"

namespace shotlist::metrics {
namespace {

std::string normalize_span(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : textdiff::trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void finish(PrfScores& s) {
  s.precision = ratio(s.true_positives, s.predicted);
  s.recall = ratio(s.true_positives, s.gold);
  s.f1 = s.true_positives == 0 ? 0.0 : 2 * s.precision * s.recall / (s.precision + s.recall);
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& toks,
                                                             std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

bool is_valid_date(int year, int month, int day) {
  if (year < 1 || month < 1 || month > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  const int limit = kDays[month - 1] + (month == 2 && leap ? 1 : 0);
  return day <= limit;
}

TemporalParse parse_temporal(std::string_view output) {
  const auto text = textdiff::trim(output);
  TemporalParse p;
  if (text == "N/A") {
    p.kind = TemporalParse::Kind::NA;
    return p;
  }
  const auto sep = text.rfind(" == ");
  if (sep == std::string_view::npos) return p;
  const auto span = textdiff::trim(text.substr(0, sep));
  const auto value = textdiff::trim(text.substr(sep + 4));
  if (span.empty() || value.size() != 10 || value[4] != '-' || value[7] != '-') return p;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(value[i]))) return p;
  const int y = std::stoi(std::string(value.substr(0, 4)));
  const int m = std::stoi(std::string(value.substr(5, 2)));
  const int d = std::stoi(std::string(value.substr(8, 2)));
  if (!is_valid_date(y, m, d)) return p;
  p.kind = TemporalParse::Kind::Mention;
  p.span = std::string(span);
  p.value = {y, m, d};
  return p;
}

TemporalScores temporal_scores(const std::vector<std::pair<std::string, std::string>>& predictions,
                               const std::vector<std::pair<std::string, std::string>>& golds) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("predictions and golds differ in length");
  TemporalScores s;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predictions[i].first != golds[i].first)
      throw std::invalid_argument("example id mismatch: " + predictions[i].first + " vs " +
                                  golds[i].first);
    const auto gold = parse_temporal(golds[i].second);
    if (gold.kind == TemporalParse::Kind::Malformed)
      throw std::invalid_argument("gold output is neither a mention nor N/A: " + golds[i].second);
    const auto pred = parse_temporal(predictions[i].second);

    const bool gold_mention = gold.kind == TemporalParse::Kind::Mention;
    const bool pred_mention = pred.kind != TemporalParse::Kind::NA;
    s.extraction.gold += gold_mention;
    s.normalization.gold += gold_mention;
    s.extraction.predicted += pred_mention;
    s.normalization.predicted += pred_mention;
    if (gold_mention && pred.kind == TemporalParse::Kind::Mention &&
        normalize_span(pred.span) == normalize_span(gold.span)) {
      ++s.extraction.true_positives;
      if (pred.value == gold.value) ++s.normalization.true_positives;
    }
  }
  finish(s.extraction);
  finish(s.normalization);
  return s;
}

std::vector<std::string> metric_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& t : textdiff::tokenize(text).tokens) out.push_back(textdiff::to_lower(t.text));
  return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f(std::string_view candidate, std::string_view reference) {
  const auto c = metric_tokens(candidate);
  const auto r = metric_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(c, r));
  if (lcs == 0) return 0.0;
  const double p = lcs / static_cast<double>(c.size());
  const double rec = lcs / static_cast<double>(r.size());
  return 2 * p * rec / (p + rec);
}

double bleu4(std::string_view candidate, std::string_view reference) {
  const auto c = metric_tokens(candidate);
  const auto r = metric_tokens(reference);
  if (c.empty()) return 0.0;
  double log_sum = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = ngram_counts(c, n);
    const auto ref = ngram_counts(r, n);
    std::size_t total = 0, matched = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else if (matched == 0) {
      p = 1.0 / static_cast<double>(total + 1);
    } else {
      p = static_cast<double>(matched) / static_cast<double>(total);
    }
    log_sum += std::log(p);
  }
  const double bp = c.size() < r.size()
                        ? std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(c.size()))
                        : 1.0;
  return bp * std::exp(log_sum / 4.0);
}

}  // namespace shotlist::metrics
