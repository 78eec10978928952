// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. argv[1] is the path of the shotlist executable.

#include "shotlist/metrics.hpp"
#include "shotlist/serialize.hpp"
#include "shotlist/service.hpp"
#include "shotlist/sim.hpp"
#include "shotlist/slicing.hpp"
#include "shotlist/templates.hpp"
#include "shotlist/textdiff.hpp"

// After the Eigen-dependent headers: httplib pulls in <resolv.h>.
#include <httplib.h>

#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

extern char** environ;

using namespace shotlist;
using nlohmann::json;
using Clock = std::chrono::steady_clock;
using Toks = std::vector<std::string>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- AC-1

// Edit distance from the front of both sequences, memoized.
std::size_t oracle_distance(const Toks& x, const Toks& y) {
  std::vector<std::vector<int>> memo(x.size() + 1, std::vector<int>(y.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == x.size()) return static_cast<int>(y.size() - j);
    if (j == y.size()) return static_cast<int>(x.size() - i);
    int& m = memo[i][j];
    if (m >= 0) return m;
    m = std::min({go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (x[i] == y[j] ? 0 : 1)});
    return m;
  };
  return static_cast<std::size_t>(go(0, 0));
}

// True when the script rewrites x into y with consistent indices.
bool script_transforms(const textdiff::EditScript& s, const Toks& x, const Toks& y) {
  std::size_t i = 0, j = 0;
  for (const auto& op : s.ops) {
    switch (op.kind) {
      case textdiff::EditKind::Keep:
        if (op.src != i || op.dst != j || i >= x.size() || j >= y.size() || x[i] != y[j]) return false;
        ++i, ++j;
        break;
      case textdiff::EditKind::Substitute:
        if (op.src != i || op.dst != j || i >= x.size() || j >= y.size() || x[i] == y[j]) return false;
        ++i, ++j;
        break;
      case textdiff::EditKind::Delete:
        if (op.src != i || i >= x.size()) return false;
        ++i;
        break;
      case textdiff::EditKind::Insert:
        if (op.dst != j || j >= y.size()) return false;
        ++j;
        break;
    }
  }
  return i == x.size() && j == y.size();
}

Outcome ac1() {
  const auto t0 = Clock::now();
  std::vector<Toks> all;
  for (std::size_t len = 0; len <= 6; ++len) {
    std::size_t count = 1;
    for (std::size_t k = 0; k < len; ++k) count *= 3;
    for (std::size_t code = 0; code < count; ++code) {
      Toks t;
      for (std::size_t k = 0, c = code; k < len; ++k, c /= 3) t.push_back(std::string(1, "abc"[c % 3]));
      all.push_back(std::move(t));
    }
  }
  std::size_t pairs = 0, bad = 0;
  for (const auto& x : all)
    for (const auto& y : all) {
      ++pairs;
      const auto s = textdiff::edit_script(x, y);
      if (s.cost() != oracle_distance(x, y) || !script_transforms(s, x, y)) ++bad;
    }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 30.0, std::to_string(pairs) + " pairs, " + std::to_string(bad) +
                                       " mismatches, " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- AC-2

Outcome ac2() {
  std::mt19937_64 rng(2024);
  std::size_t wrong = 0, boundary = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    // Distinct input tokens; substituted positions get fresh tokens, so the
    // distance is exactly the number of substitutions.
    const std::size_t n = 2 + rng() % 9;
    std::size_t s = 1 + rng() % (n - 1);
    if (trial % 4 == 0 && n % 2 == 0) s = n / 2;
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = i;
    std::shuffle(pos.begin(), pos.end(), rng);
    std::set<std::size_t> changed(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(s));
    std::string x, y;
    for (std::size_t i = 0; i < n; ++i) {
      x += (i ? " w" : "w") + std::to_string(i);
      y += (i ? " " : "") + (changed.count(i) ? "z" + std::to_string(i) : "w" + std::to_string(i));
    }
    const double expected = static_cast<double>(s) / static_cast<double>(n);
    if (2 * s == n) ++boundary;
    const auto want = 2 * s >= n ? textdiff::PhraseSource::UnmodifiedPart
                                 : textdiff::PhraseSource::ModifiedPart;
    // The phrases are the kept or the changed runs of x.
    std::vector<std::string> runs;
    std::string cur;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in = (want == textdiff::PhraseSource::UnmodifiedPart) != (changed.count(i) > 0);
      if (in) {
        cur += (cur.empty() ? "w" : " w") + std::to_string(i);
      } else if (!cur.empty()) {
        runs.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) runs.push_back(cur);

    const auto phrases = textdiff::extract_key_phrases(x, y);
    bool ok = textdiff::normalized_distance(x, y) == expected && phrases.size() == runs.size();
    for (std::size_t p = 0; ok && p < phrases.size(); ++p)
      ok = phrases[p].source == want && phrases[p].text == runs[p];
    if (!ok) ++wrong;
  }
  return {wrong == 0 && boundary > 0,
          "1000 pairs, " + std::to_string(boundary) + " at d == 0.5, " + std::to_string(wrong) +
              " wrong branches"};
}

// ---------------------------------------------------------------- AC-3

Outcome ac3() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(33);
  double h8 = 0;
  for (int k = 1; k <= 8; ++k) h8 += 1.0 / k;
  std::size_t incomplete = 0, over = 0;
  double worst_ratio = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<templates::CoverageElement> elements;
    for (std::size_t e = 0; e < n; ++e)
      elements.push_back({e, {}, "src" + std::to_string(rng() % (n / 2 + 1))});
    std::vector<templates::Template> cands;
    const std::size_t nt = 1 + rng() % 6;
    for (std::size_t t = 0; t < nt; ++t) {
      templates::Template tm;
      const std::size_t len = 1 + rng() % 3;
      for (std::size_t s = 0; s < len; ++s)
        tm.slots.push_back({static_cast<templates::SlotKind>(rng() % 3), "v" + std::to_string(t)});
      std::set<std::string> sources;
      for (std::size_t e = 0; e < n; ++e)
        if (rng() % 3 == 0) {
          tm.covered.insert(e);
          sources.insert(elements[e].source_example_id);
        }
      tm.distinct_sources = sources.size();
      cands.push_back(std::move(tm));
    }

    std::set<std::size_t> coverable;
    for (const auto& t : cands) coverable.insert(t.covered.begin(), t.covered.end());

    const auto chosen = templates::select_representative(cands, elements);
    std::set<std::size_t> got;
    double greedy = 0;
    for (const auto& t : chosen) {
      got.insert(t.covered.begin(), t.covered.end());
      greedy += templates::weight(t);
    }
    if (got != coverable) ++incomplete;

    double best = coverable.empty() ? 0.0 : INFINITY;
    for (std::size_t mask = 1; mask < (std::size_t{1} << nt); ++mask) {
      std::set<std::size_t> cov;
      double w = 0;
      bool usable = true;
      for (std::size_t t = 0; t < nt; ++t)
        if (mask >> t & 1) {
          if (cands[t].covered.empty()) {
            usable = false;
            break;
          }
          cov.insert(cands[t].covered.begin(), cands[t].covered.end());
          w += templates::weight(cands[t]);
        }
      if (usable && cov == coverable) best = std::min(best, w);
    }
    if (greedy > h8 * best + 1e-12) ++over;
    if (best > 0) worst_ratio = std::max(worst_ratio, greedy / best);
  }
  const double secs = seconds_since(t0);
  return {incomplete == 0 && over == 0 && secs < 10.0,
          "200 instances, " + std::to_string(incomplete) + " incomplete, " + std::to_string(over) +
              " above H8 bound, worst ratio " + fmt(worst_ratio) + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- AC-4

Outcome ac4() {
  const double expected = 3.8415002681634912;  // ln 19 + sqrt(ln 5 / 2), 40-digit evaluation
  const auto mu = slicing::reward({19, 2, 0}, 5);
  bool ok = !mu.unexplored && std::abs(mu.value - expected) <= 1e-9;
  std::size_t violations = 0;
  auto r = [](std::size_t n, std::size_t m, std::size_t k, int i) {
    return slicing::reward({n, m, k}, i).value;
  };
  for (int i = 1; i <= 100; ++i)
    for (std::size_t m = 1; m <= 50; ++m)
      for (std::size_t k = 0; k <= m; ++k)
        for (std::size_t n = 2; n <= 500; ++n) {
          const double v = r(n, m, k, i);
          // Larger slices: strictly more when errors exist, unchanged otherwise.
          if (n < 500) {
            const double up = r(n + 1, m, k, i);
            if (k < m ? !(up > v) : up != v) ++violations;
          }
          // More correct verdicts: strictly less.
          if (k < m && !(r(n, m, k + 1, i) < v)) ++violations;
          // Later iterations: strictly more for m fixed.
          if (i < 100 && !(r(n, m, k, i + 1) > v)) ++violations;
          // Same accuracy with more verdicts: strictly less once i > 1.
          if (2 * m <= 50) {
            const double more = r(n, 2 * m, 2 * k, i);
            if (i > 1 ? !(more < v) : std::abs(more - v) > 1e-12) ++violations;
          }
        }
  ok = ok && violations == 0;

  bool tier = true;
  for (int i = 1; i <= 100 && tier; i += 9)
    for (std::size_t n = 1; n <= 500 && tier; n += 37) {
      const auto fresh = slicing::reward({n, 0, 0}, i);
      tier = fresh.unexplored && fresh > slicing::reward({500, 50, 0}, i) &&
             fresh > slicing::reward({500, 1, 0}, 100);
    }
  return {ok && tier, "mu(19,2,0,5) = " + fmt(mu.value, 17) + ", " + std::to_string(violations) +
                          " monotonicity violations, unexplored tier " + (tier ? "ok" : "broken")};
}

// ---------------------------------------------------------------- AC-5

Outcome ac5() {
  const std::vector<std::string> today_frames = {
      "I went for a run today", "today was a long day", "Are you coming to class today",
      "Feeling great today", "today I finally fixed the bike", "so tired today honestly"};
  const std::vector<std::string> xmas_frames = {
      "Merry Christmas everyone", "Christmas shopping is stressful", "Can't wait for Christmas",
      "We fly home for Christmas", "Christmas dinner at grandma's", "best Christmas ever"};
  auto state = core::make_session("Find the date", 1);
  std::set<std::string> planted_a, planted_b;
  for (std::size_t i = 0; i < 60; ++i) {
    const bool a = i % 2 == 0;
    const auto& frames = a ? today_frames : xmas_frames;
    const std::string input = frames[(i / 2) % frames.size()] + " #" + std::to_string(i);
    const std::string id = "e" + std::to_string(i);
    state.add_example({id, input});
    (a ? planted_a : planted_b).insert(id);
  }
  state.add_example({"d0", "Took a photo today"});
  state.add_example({"d1", "Merry Christmas to you"});
  state.apply({1, "d0", core::Action::AddedPositive, std::string("today == 2014-03-30")});
  state.apply({1, "d1", core::Action::AddedPositive, std::string("Christmas == 2014-12-25")});

  lingo::DefaultAnnotator annotator;
  lingo::HashedNgramEmbedder embedder;
  std::vector<std::vector<slicing::Slice>> runs;
  for (int run = 0; run < 5; ++run) {
    slicing::TextCache cache(annotator, embedder);
    runs.push_back(slicing::build_slice_model(state, {}, cache, 2, 10).slices);
  }
  bool deterministic = true;
  for (const auto& r : runs) deterministic = deterministic && r == runs.front();

  const auto& slices = runs.front();
  bool sizes_ok = true, recovered = false;
  std::vector<std::set<std::string>> groups;
  for (const auto& s : slices) {
    if (!s.is_outlier && s.member_ids.size() < 10) sizes_ok = false;
    std::set<std::string> g(s.member_ids.begin(), s.member_ids.end());
    g.erase("d0");
    g.erase("d1");
    groups.push_back(g);
  }
  if (groups.size() == 2)
    recovered = (groups[0] == planted_a && groups[1] == planted_b) ||
                (groups[0] == planted_b && groups[1] == planted_a);
  return {recovered && sizes_ok && deterministic,
          std::to_string(slices.size()) + " slices, planted groups " +
              (recovered ? "recovered" : "not recovered") + ", 5 runs " +
              (deterministic ? "identical" : "differ")};
}

// ---------------------------------------------------------------- AC-6

Outcome ac6() {
  std::size_t failed = 0, cases = 0;
  auto near = [&](double got, double want) {
    ++cases;
    if (std::abs(got - want) > 1e-9) ++failed;
  };
  near(metrics::rouge_l_f("the cat sat", "the cat"), 0.8);
  near(metrics::rouge_l_f("a b c d", "a c d e"), 0.75);
  near(metrics::rouge_l_f("the cat is on the mat", "the mat is on the cat"), 2.0 / 3.0);
  near(metrics::rouge_l_f("x y", "a b"), 0.0);
  near(metrics::rouge_l_f("same words here", "same words here"), 1.0);
  near(metrics::rouge_l_f("a b c", "a x c d e"), 2.0 * (2.0 / 3) * (2.0 / 5) / (2.0 / 3 + 2.0 / 5));

  near(metrics::bleu4("the quick brown fox jumps", "the quick brown fox jumps"), 1.0);
  near(metrics::bleu4("a b c d", "a b c d e f g h"), std::exp(-1.0));
  near(metrics::bleu4("the cat sat on the mat", "the cat is on the mat"),
       std::pow(5.0 / 6.0 * 3.0 / 5.0 * 1.0 / 4.0 * 1.0 / 4.0, 0.25));
  near(metrics::bleu4("the the the the", "the cat"), std::pow(1.0 / 96.0, 0.25));
  near(metrics::bleu4("x y z", "a b c"), 0.0);

  // Hand-counted: 7 gold mentions, 7 predicted (malformed included),
  // 3 span matches of which 2 carry the right date.
  const std::vector<std::pair<std::string, std::string>> gold = {
      {"1", "Oct. 23, 1999 == 1999-10-23"}, {"2", "today == 2014-03-30"},
      {"3", "N/A"},                         {"4", "N/A"},
      {"5", "Christmas == 2014-12-25"},     {"6", "03/14/2021 == 2021-03-14"},
      {"7", "yesterday == 2014-03-29"},     {"8", "March 4, 2019 == 2019-03-04"},
      {"9", "N/A"},                         {"10", "tomorrow == 2014-03-31"}};
  const std::vector<std::pair<std::string, std::string>> pred = {
      {"1", "Oct. 23, 1999 == 1999-10-23"}, {"2", "today == 2014-03-31"},
      {"3", "N/A"},                         {"4", "Christmas == 2014-12-25"},
      {"5", "N/A"},                         {"6", "hello"},
      {"7", "Yesterday == 2014-03-29"},     {"8", "4, 2019 == 2019-03-04"},
      {"9", "N/A"},                         {"10", "tomorrow == 2014-02-30"}};
  const auto s = metrics::temporal_scores(pred, gold);
  const bool counts = s.extraction.true_positives == 3 && s.extraction.predicted == 7 &&
                      s.extraction.gold == 7 && s.normalization.true_positives == 2 &&
                      s.normalization.predicted == 7 && s.normalization.gold == 7;
  near(s.extraction.f1, 3.0 / 7.0);
  near(s.normalization.precision, 2.0 / 7.0);
  near(s.normalization.f1, 2.0 / 7.0);
  return {failed == 0 && counts, std::to_string(cases - failed) + "/" + std::to_string(cases) +
                                     " values, temporal confusion " + (counts ? "matches" : "differs")};
}

// ---------------------------------------------------------------- AC-7

Outcome ac7() {
  const auto data = sim::generate_synthetic_pool(sim::default_synthetic_spec(), 11);
  const llmfn::MockTeacher teacher(data::teacher_entries(data.pool));
  std::mt19937_64 rng(77);
  std::size_t leaked = 0, unanimous_not_labeled = 0, covered_trials = 0, uncovered_trials = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto state = core::make_session(sim::kTemporalDescription, static_cast<std::uint64_t>(trial));
    state.gate_open = true;
    const std::size_t nd = 2 + rng() % 5;
    std::set<std::size_t> picked;
    while (picked.size() < nd + 1) picked.insert(rng() % data.pool.size());
    std::vector<std::size_t> idx(picked.begin(), picked.end());
    std::shuffle(idx.begin(), idx.end(), rng);
    std::set<std::string> families;
    for (std::size_t k = 0; k <= nd; ++k) state.add_example(data::to_example(data.pool[idx[k]]));
    for (std::size_t k = 0; k < nd; ++k) {
      const auto& r = data.pool[idx[k]];
      families.insert(r.meta.at("family"));
      if (*r.gold_output == "N/A")
        state.apply({1, r.id, core::Action::AddedNegative});
      else
        state.apply({1, r.id, core::Action::AddedPositive, r.gold_output});
    }
    const auto& query = data.pool[idx[nd]];
    const bool covered = families.count(query.meta.at("family")) > 0;
    (covered ? covered_trials : uncovered_trials)++;
    core::Rng vote_rng(static_cast<std::uint64_t>(trial) * 31 + 7);
    const auto out =
        llmfn::predict_candidate(state, teacher, *state.find(query.id), vote_rng, 3);
    if (!covered && out.pseudo_labeled) ++leaked;
    if (out.vote && out.vote->unanimous != out.pseudo_labeled) ++unanimous_not_labeled;
    if (covered && !out.pseudo_labeled) ++unanimous_not_labeled;
  }
  return {leaked == 0 && unanimous_not_labeled == 0 && uncovered_trials > 0 && covered_trials > 0,
          "1000 trials (" + std::to_string(covered_trials) + " covered, " +
              std::to_string(uncovered_trials) + " uncovered), " + std::to_string(leaked) +
              " uncovered pseudo-labels, " + std::to_string(unanimous_not_labeled) +
              " unanimous votes not pseudo-labeled"};
}

// ---------------------------------------------------------------- AC-8

Outcome ac8() {
  const auto t0 = Clock::now();
  const auto data = sim::generate_synthetic_pool(sim::default_synthetic_spec(), 7);
  const llmfn::MockTeacher teacher(data::teacher_entries(data.pool));
  sim::SimConfig base;
  base.pool = data.pool;
  base.track_trajectory = false;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
  const auto report = sim::compare_samplers(base, seeds, teacher, data.test, 1);
  const double secs = seconds_since(t0);
  const bool ok = report.treatment.mean_to_coverage < report.baseline.mean_to_coverage &&
                  report.mean_reduction >= 0.15 && report.sign_test_p < 0.05 && secs < 60.0;
  return {ok, "slice " + fmt(report.treatment.mean_to_coverage) + " vs random " +
                  fmt(report.baseline.mean_to_coverage) + " presented, reduction " +
                  fmt(100 * report.mean_reduction, 3) + "%, W/L/T " + std::to_string(report.wins) +
                  "/" + std::to_string(report.losses) + "/" + std::to_string(report.ties) +
                  ", p = " + fmt(report.sign_test_p, 3) + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------- AC-9

Outcome ac9() {
  const auto data = sim::generate_synthetic_pool(sim::default_synthetic_spec(), 7);
  auto config = [&](const std::vector<data::PoolRecord>& pool, sim::Sampler sampler) {
    sim::SimConfig c;
    c.sampler = sampler;
    c.seed = 1;
    c.pool = pool;
    c.track_trajectory = false;
    return c;
  };
  std::vector<std::string> lines;
  bool ok = true;
  auto expect = [&](const char* name, const sim::SimResult& r, sim::StopReason want,
                    bool extra = true) {
    const bool pass = r.stop_reason == want && extra;
    ok = ok && pass;
    lines.push_back(std::string(name) + "=" + std::string(sim::to_string(r.stop_reason)));
  };

  const llmfn::PerfectTeacher perfect(data::teacher_entries(data.pool));
  const auto r1 = sim::run_simulation(config(data.pool, sim::Sampler::Random), perfect, data.test);
  expect("perfect", r1, sim::StopReason::ConsecutiveCorrect);

  const llmfn::ConstantBackend wrong("never == 1900-01-01");
  const auto r2 = sim::run_simulation(config(data.pool, sim::Sampler::Random), wrong, data.test);
  expect("always-wrong", r2, sim::StopReason::DemoCap, r2.final_demos.size() == 41);

  auto tiny = config(data.pool, sim::Sampler::SliceBased);
  tiny.caps.max_presented = 3;
  const auto r3 = sim::run_simulation(tiny, wrong, data.test);
  expect("tiny-budget", r3, sim::StopReason::PresentedCap, r3.presented_count == 3);

  const auto easy =
      sim::generate_synthetic_pool({{{"relative", 0.5}, {"holiday", 0.5}}, 60, 10}, 3);
  const llmfn::MockTeacher mock(data::teacher_entries(easy.pool));
  auto two = config(easy.pool, sim::Sampler::SliceBased);
  two.clusters = 2;
  const auto r4 = sim::run_simulation(two, mock, easy.test);
  expect("easy-2-slice", r4, sim::StopReason::SliceAccuracy);

  std::string detail;
  for (const auto& l : lines) detail += (detail.empty() ? "" : ", ") + l;
  return {ok, detail + " (always-wrong demos " + std::to_string(r2.final_demos.size()) + ")"};
}

// ---------------------------------------------------------------- AC-10

int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

struct Server {
  pid_t pid = -1;

  Server(const std::string& exe, const std::filesystem::path& dir, int port) {
    std::vector<std::string> args = {exe,         "serve",      "--host", "127.0.0.1",
                                     "--port",    std::to_string(port), "--data-dir",
                                     dir.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
    if (::posix_spawn(&pid, exe.c_str(), &actions, nullptr, argv.data(), environ) != 0) pid = -1;
    posix_spawn_file_actions_destroy(&actions);
  }

  bool wait_ready(int port) const {
    httplib::Client c("127.0.0.1", port);
    for (int i = 0; i < 200; ++i) {
      if (auto r = c.Get("/v1/health"); r && r->status == 200) return true;
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
    return false;
  }

  void kill9() {
    if (pid > 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      pid = -1;
    }
  }

  ~Server() { kill9(); }
};

Outcome ac10(const std::string& exe) {
  if (exe.empty()) return {false, "no shotlist executable given"};
  std::string tmpl = (std::filesystem::temp_directory_path() / "shotlist_accept_XXXXXX").string();
  const std::filesystem::path dir = ::mkdtemp(tmpl.data());
  struct Cleanup {
    std::filesystem::path p;
    ~Cleanup() { std::filesystem::remove_all(p); }
  } cleanup{dir};

  const int port = free_port();
  Server server(exe, dir, port);
  if (server.pid < 0 || !server.wait_ready(port)) return {false, "server did not start"};
  httplib::Client c("127.0.0.1", port);

  const auto data = sim::generate_synthetic_pool({sim::default_synthetic_spec().families, 1500, 10}, 21);
  constexpr std::size_t kChunk = 250;
  std::size_t uploaded = 0;
  auto upload_chunk = [&](httplib::Client& client, const std::string& path) {
    const std::size_t end = std::min(uploaded + kChunk, data.pool.size());
    if (uploaded == end) return false;
    std::vector<data::PoolRecord> chunk(data.pool.begin() + static_cast<std::ptrdiff_t>(uploaded),
                                        data.pool.begin() + static_cast<std::ptrdiff_t>(end));
    uploaded = end;
    auto r = client.Post(path, data::to_jsonl(chunk), "application/x-ndjson");
    return r && r->status == 200;
  };
  std::map<std::string, std::string> gold;
  for (const auto& r : data.pool) gold[r.id] = *r.gold_output;

  // A strict gate and few filter draws keep the pool from draining into
  // pseudo-labels before 200 feedback events have been recorded.
  json cfg = {{"seed", 5}, {"gate_threshold", 1.0}, {"filter_attempts", 5}};
  auto created = c.Post("/v1/sessions",
                        json{{"task_description", sim::kTemporalDescription}, {"config", cfg}}.dump(),
                        "application/json");
  if (!created || created->status != 201) return {false, "session creation failed"};
  const auto id = json::parse(created->body).at("session_id").get<std::string>();
  const std::string base = "/v1/sessions/" + id;
  if (!upload_chunk(c, base + "/pool")) return {false, "pool upload failed"};

  std::mt19937_64 rng(1234);
  std::size_t events = 0, rejected_calls = 0;
  while (events < 200) {
    auto b = c.Post(base + "/batch", "", "application/json");
    // The pool ran dry: append the next chunk mid-session.
    if (b && b->status == 409 && upload_chunk(c, base + "/pool"))
      b = c.Post(base + "/batch", "", "application/json");
    if (!b || b->status != 200)
      return {false, "batch request failed after " + std::to_string(events) + " events: " +
                         (b ? std::to_string(b->status) + " " + b->body : httplib::to_string(b.error()))};
    const auto view = service::batch_from_json(json::parse(b->body));
    json items = json::array();
    for (std::size_t ci = 0; ci < view.candidates.size(); ++ci) {
      const auto& cand = view.candidates[ci];
      const auto g = gold[cand.example_id];
      // One wrong correction per round keeps the gate shut until late in
      // the run; after that pseudo-labels enter the journal too.
      const auto pick = ci == 0 && events < 150 ? 4 : rng() % 6;
      switch (pick) {
        case 0:
          break;  // implicit NoChange
        case 1:
          items.push_back({{"example_id", cand.example_id}, {"action", "NoChange"}});
          break;
        case 2:
          items.push_back({{"example_id", cand.example_id}, {"action", "Skipped"}});
          break;
        case 3:
          items.push_back(
              {{"example_id", cand.example_id}, {"action", "EditedOutput"}, {"edited_output", g}});
          break;
        case 4:
          items.push_back({{"example_id", cand.example_id},
                           {"action", "EditedOutput"},
                           {"edited_output", "noon == 2001-01-01"}});
          break;
        default:
          if (g == "N/A") {
            items.push_back({{"example_id", cand.example_id}, {"action", "AddedNegative"}});
          } else {
            items.push_back(
                {{"example_id", cand.example_id}, {"action", "EditedOutput"}, {"edited_output", g}});
            items.push_back({{"example_id", cand.example_id}, {"action", "AddedPositive"}});
          }
      }
    }
    auto fb = c.Post(base + "/feedback", json{{"batch_id", view.batch_id}, {"items", items}}.dump(),
                     "application/json");
    if (!fb || fb->status != 200) return {false, "feedback rejected"};
    // Occasionally drop or edit a demonstration between rounds.
    auto snap = json::parse(c.Get(base)->body);
    const auto& demos = snap.at("state").at("demonstrations");
    if (!demos.empty() && rng() % 4 == 0) {
      const auto victim = demos.at(rng() % demos.size()).at("example_id").get<std::string>();
      auto r = rng() % 2 ? c.Delete(base + "/demos/" + victim)
                         : c.Put(base + "/demos/" + victim, json{{"output", "N/A"}}.dump(),
                                 "application/json");
      if (!r || r->status != 200) ++rejected_calls;
    }
    events = json::parse(c.Get(base)->body).at("state").at("events").size();
  }
  // Leave a batch open so the snapshot includes one.
  c.Post(base + "/batch", "", "application/json");
  const auto before = json::parse(c.Get(base)->body);

  server.kill9();
  Server restarted(exe, dir, port);
  if (restarted.pid < 0 || !restarted.wait_ready(port)) return {false, "restart failed"};
  httplib::Client c2("127.0.0.1", port);
  auto after_res = c2.Get(base);
  if (!after_res || after_res->status != 200) return {false, "session missing after restart"};
  const auto after = json::parse(after_res->body);

  const auto replayed = service::replay_journal(dir / "sessions" / id / "events.jsonl");
  const auto live = before.at("state").get<core::SessionState>();
  const bool same = before == after;
  std::size_t pseudo = 0;
  for (const auto& e : live.pool) pseudo += e.status == core::Status::PseudoLabeled;
  const bool replay_ok = replayed == live;
  return {same && replay_ok && rejected_calls == 0,
          std::to_string(events) + " events, " + std::to_string(pseudo) +
              " pseudo-labels, restored snapshot " + (same ? "identical" : "differs") +
              ", journal replay " + (replay_ok ? "matches" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string exe = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"AC-1", ac1}, {"AC-2", ac2}, {"AC-3", ac3}, {"AC-4", ac4}, {"AC-5", ac5},
      {"AC-6", ac6}, {"AC-7", ac7}, {"AC-8", ac8}, {"AC-9", ac9},
      {"AC-10", [&] { return ac10(exe); }}};
  int failures = 0;
  for (const auto& [name, fn] : checks) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << name << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
