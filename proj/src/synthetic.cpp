#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <stdexcept>

#include "shotlist/sim.hpp"

namespace shotlist::sim {
namespace {

constexpr std::array<const char*, 20> kSubjects = {
    "The meeting",      "Our flight",        "The concert",     "My dentist appointment",
    "The deadline",     "Her birthday party", "The final game",  "The product launch",
    "The exam",         "His job interview", "The wedding",     "The board vote",
    "The lease",        "Our road trip",     "The conference",  "The school play",
    "The surgery",      "The parade",        "The audit",       "The reunion"};

constexpr std::array<const char*, 6> kDatePredicates = {
    "is scheduled for", "was moved to", "takes place on", "got pushed back to", "is set for",
    "was held on"};

constexpr std::array<const char*, 5> kTails = {".", " downtown.", " at noon.", " in Boston.",
                                               " after all."};

constexpr std::array<const char*, 12> kMonths = {
    "January", "February", "March",     "April",   "May",      "June",
    "July",    "August",   "September", "October", "November", "December"};

constexpr std::array<const char*, 5> kRelativePredicates = {"is", "was", "happens",
                                                            "got moved to", "ends"};

struct Relative {
  const char* word;
  int offset;
};
constexpr std::array<Relative, 3> kRelatives = {{{"today", 0}, {"yesterday", -1}, {"tomorrow", 1}}};

struct Holiday {
  const char* name;
  int month, day;
};
constexpr std::array<Holiday, 6> kHolidays = {{{"Christmas", 12, 25},
                                               {"Halloween", 10, 31},
                                               {"Christmas Eve", 12, 24},
                                               {"Valentine's Day", 2, 14},
                                               {"Independence Day", 7, 4},
                                               {"New Year's Eve", 12, 31}}};

constexpr std::array<const char*, 5> kGreetings = {"Happy", "Looking forward to",
                                                   "Any plans for", "Wishing everyone a great",
                                                   "Cannot wait for"};
constexpr std::array<const char*, 6> kGreetingTails = {"!", " everyone!", " from all of us!",
                                                       ", friends!", " this year!", " :)"};

constexpr std::array<const char*, 8> kNegativePredicates = {
    "was a complete waste of time", "went really well", "needs more volunteers", "is sold out",
    "was cancelled without notice", "made the local news", "felt way too long",
    "could use better snacks"};

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> d = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) return 29;
  return d[static_cast<std::size_t>(m - 1)];
}

metrics::Date shift(metrics::Date d, int days) {
  while (days > 0) {
    if (++d.day > days_in_month(d.year, d.month)) {
      d.day = 1;
      if (++d.month > 12) d.month = 1, ++d.year;
    }
    --days;
  }
  while (days < 0) {
    if (--d.day < 1) {
      if (--d.month < 1) d.month = 12, --d.year;
      d.day = days_in_month(d.year, d.month);
    }
    ++days;
  }
  return d;
}

std::string iso(const metrics::Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

template <class Array>
const auto& pick(const Array& a, core::Rng& rng) {
  return a[std::uniform_int_distribution<std::size_t>(0, a.size() - 1)(rng)];
}

int uniform(int lo, int hi, core::Rng& rng) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

metrics::Date random_date(core::Rng& rng) {
  metrics::Date d;
  d.year = uniform(1995, 2024, rng);
  d.month = uniform(1, 12, rng);
  d.day = uniform(1, days_in_month(d.year, d.month), rng);
  return d;
}

struct Generated {
  std::string input;
  std::string gold;
};

Generated generate(const std::string& family, core::Rng& rng) {
  const std::string subject = pick(kSubjects, rng);
  if (family == "us_date") {
    const auto d = random_date(rng);
    char expr[16];
    std::snprintf(expr, sizeof expr, "%02d/%02d/%04d", d.month, d.day, d.year);
    return {subject + " " + pick(kDatePredicates, rng) + " " + expr + pick(kTails, rng),
            std::string(expr) + " == " + iso(d)};
  }
  if (family == "long_date") {
    const auto d = random_date(rng);
    const std::string expr = std::string(kMonths[static_cast<std::size_t>(d.month - 1)]) + " " +
                             std::to_string(d.day) + ", " + std::to_string(d.year);
    return {subject + " " + pick(kDatePredicates, rng) + " " + expr + pick(kTails, rng),
            expr + " == " + iso(d)};
  }
  if (family == "relative") {
    const auto& rel = pick(kRelatives, rng);
    return {subject + " " + pick(kRelativePredicates, rng) + " " + rel.word + pick(kTails, rng),
            std::string(rel.word) + " == " + iso(shift(kReferenceDate, rel.offset))};
  }
  if (family == "holiday") {
    const auto& h = pick(kHolidays, rng);
    return {std::string(pick(kGreetings, rng)) + " " + h.name + pick(kGreetingTails, rng),
            std::string(h.name) + " == " + iso({kReferenceDate.year, h.month, h.day})};
  }
  if (family == "negative") {
    return {subject + " " + pick(kNegativePredicates, rng) + pick(kTails, rng),
            std::string(core::kNegativeOutput)};
  }
  throw std::invalid_argument("unknown synthetic family: " + family);
}

std::string numbered(char prefix, std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i);
  return buf;
}

}  // namespace

const std::vector<std::string>& synthetic_families() {
  static const std::vector<std::string> f = {"us_date", "long_date", "relative", "holiday",
                                             "negative"};
  return f;
}

SyntheticSpec default_synthetic_spec() {
  SyntheticSpec s;
  s.families = {{"us_date", 0.50}, {"long_date", 0.25}, {"relative", 0.15}, {"holiday", 0.05},
                {"negative", 0.05}};
  return s;
}

SyntheticData generate_synthetic_pool(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.families.empty()) throw std::invalid_argument("synthetic spec has no families");
  double total = 0;
  std::vector<double> weights;
  std::set<std::string> names;
  for (const auto& f : spec.families) {
    const auto& known = synthetic_families();
    if (std::find(known.begin(), known.end(), f.family) == known.end())
      throw std::invalid_argument("unknown synthetic family: " + f.family);
    if (!names.insert(f.family).second)
      throw std::invalid_argument("family listed twice: " + f.family);
    if (!(f.frequency >= 0.0) || !std::isfinite(f.frequency))
      throw std::invalid_argument("family frequency must be non-negative: " + f.family);
    total += f.frequency;
    weights.push_back(f.frequency);
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("family frequencies must sum to 1");

  core::Rng rng(seed);
  std::discrete_distribution<std::size_t> family_dist(weights.begin(), weights.end());
  std::set<std::string> used;
  auto draw = [&](char prefix, std::size_t index) {
    const std::string& family = spec.families[family_dist(rng)].family;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      Generated g = generate(family, rng);
      if (!used.insert(g.input).second) continue;
      data::PoolRecord r;
      r.id = numbered(prefix, index);
      r.input = std::move(g.input);
      r.gold_output = std::move(g.gold);
      r.meta["family"] = family;
      return r;
    }
    throw std::runtime_error("synthetic family " + family + " ran out of distinct inputs");
  };

  SyntheticData out;
  for (std::size_t i = 0; i < spec.pool_size; ++i) out.pool.push_back(draw('p', i));
  for (std::size_t i = 0; i < spec.test_size; ++i) out.test.push_back(draw('t', i));
  return out;
}

}  // namespace shotlist::sim
