#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace shotlist::metrics {

struct Date {
  int year = 0, month = 0, day = 0;
  auto operator<=>(const Date&) const = default;
};

struct TemporalParse {
  enum class Kind { Mention, NA, Malformed };
  Kind kind = Kind::Malformed;
  std::string span;  // Mention only
  Date value;        // Mention only
};

bool is_valid_date(int year, int month, int day);

/// "span == YYYY-MM-DD" (split on the last " == "), exact "N/A", else Malformed.
TemporalParse parse_temporal(std::string_view output);

struct PrfScores {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;  // predicted mentions, Malformed included
  std::size_t gold = 0;       // gold mentions
  double precision = 0, recall = 0, f1 = 0;
};

struct TemporalScores {
  PrfScores extraction;
  PrfScores normalization;
};

/// One (example id, output text) per example, aligned by position. Throws
/// std::invalid_argument on id mismatch or a gold output that is not a
/// mention or N/A. A ratio with a zero denominator is 0, and F1 is 0 whenever
/// there are no true positives.
TemporalScores temporal_scores(const std::vector<std::pair<std::string, std::string>>& predictions,
                               const std::vector<std::pair<std::string, std::string>>& golds);

/// Lowercased tokens used by the text-overlap metrics.
std::vector<std::string> metric_tokens(std::string_view text);

/// Token LCS F-measure; 0 when either side is empty.
double rouge_l_f(std::string_view candidate, std::string_view reference);

/// Sentence BLEU-4: geometric mean of clipped 1..4-gram precisions (orders
/// 2..4 with zero matches use (0 + 1) / (count + 1)), times the brevity penalty.
double bleu4(std::string_view candidate, std::string_view reference);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace shotlist::metrics
