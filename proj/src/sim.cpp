#include "shotlist/sim.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <functional>
#include <future>
#include <memory>
#include <map>
#include <numeric>
#include <thread>

#include "shotlist/slicing.hpp"
#include "shotlist/textdiff.hpp"

namespace shotlist::sim {
namespace {

using core::Action;
using core::FeedbackEvent;

// Independent stream for candidate draws and votes; seed demos use the raw seed.
constexpr std::uint64_t kSamplingStream = 0x9e3779b97f4a7c15ULL;

struct MeanSd {
  double mean = 0, sd = 0;
};

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

class Runner {
 public:
  Runner(const SimConfig& config, const llmfn::Backend& backend,
         const std::vector<data::PoolRecord>& test)
      : config_(config),
        backend_(backend),
        test_(test),
        state_(core::make_session(config.task_description, config.seed, config.caps.max_demos + 1)),
        rng_(config.seed ^ kSamplingStream),
        cache_(annotator_, embedder_) {}

  SimResult run() {
    for (const auto& r : config_.pool) {
      state_.add_example(data::to_example(r));
      if (auto f = r.meta.find("family"); f != r.meta.end()) families_.insert(f->second);
    }
    result_.sampler = config_.sampler;
    result_.seed = config_.seed;
    result_.family_count = families_.size();

    for (const auto& id : seed_demo_ids(config_)) add_gold_demo(id);
    check_coverage();

    std::optional<StopReason> stop;
    while (!stop) stop = iterate();
    result_.stop_reason = *stop;
    result_.final_demos = state_.demonstrations.demos;
    result_.iterations = state_.iteration - 1;
    for (const auto& d : state_.demonstrations.demos)
      if (auto f = family_of(d.example_id)) covered_.insert(*f);
    result_.families_covered.assign(covered_.begin(), covered_.end());
    if (config_.track_trajectory && !test_.empty() &&
        (result_.trajectory.empty() ||
         result_.trajectory.back().demo_count != state_.demonstrations.size()))
      snapshot();
    return std::move(result_);
  }

 private:
  std::optional<std::string> family_of(const std::string& id) const {
    const auto* ex = state_.find(id);
    if (!ex) return std::nullopt;
    auto f = ex->meta.find("family");
    if (f == ex->meta.end()) return std::nullopt;
    return f->second;
  }

  FeedbackEvent event(const std::string& id, Action action,
                      std::optional<std::string> edited = std::nullopt) {
    return {state_.iteration, id, action, std::move(edited), clock_++};
  }

  void add_gold_demo(const std::string& id) {
    const std::string gold = *state_.find(id)->gold_output;
    if (textdiff::trim(gold) == core::kNegativeOutput)
      state_.apply(event(id, Action::AddedNegative));
    else
      state_.apply(event(id, Action::AddedPositive, gold));
  }

  void check_coverage() {
    if (result_.presented_to_coverage || families_.empty()) return;
    std::set<std::string> covered;
    for (const auto& d : state_.demonstrations.demos)
      if (auto f = family_of(d.example_id)) covered.insert(*f);
    if (covered.size() == families_.size()) result_.presented_to_coverage = result_.presented_count;
  }

  void snapshot() {
    const EvalReport report = evaluate(state_.demonstrations, backend_, test_, config_.task);
    result_.trajectory.push_back(
        {state_.demonstrations.size(), result_.presented_count, report.summary});
  }

  // Next candidate id for this batch, or nullopt when nothing is eligible.
  std::function<std::optional<std::string>()> make_drawer(std::optional<StopReason>& stop) {
    if (config_.sampler == Sampler::SliceBased) {
      const auto demo_verdicts = state_.demonstrations.size() >= 2
                                     ? slicing::demo_verdicts(state_.demonstrations, backend_)
                                     : slicing::Verdicts{};
      const auto verdicts = slicing::collect_verdicts(state_, demo_verdicts);
      auto model = slicing::build_slice_model(state_, verdicts, cache_, config_.clusters,
                                              config_.min_slice_size);
      const bool all_accurate =
          !model.stats.empty() &&
          std::all_of(model.stats.begin(), model.stats.end(), [&](const slicing::SliceStats& s) {
            return s.m >= 1 && static_cast<double>(s.k) >=
                                   config_.caps.slice_acc_stop * static_cast<double>(s.m);
          });
      if (all_accurate) {
        stop = StopReason::SliceAccuracy;
        return {};
      }
      auto cursor = std::make_shared<slicing::SliceCursor>(model.slices, model.rewards, state_);
      return [this, cursor]() -> std::optional<std::string> {
        auto c = cursor->next(rng_);
        if (!c) return std::nullopt;
        return c->example_id;
      };
    }
    auto eligible = std::make_shared<std::vector<std::string>>();
    for (const auto& e : state_.pool)
      if (slicing::is_eligible(e)) eligible->push_back(e.id);
    return [this, eligible]() -> std::optional<std::string> {
      if (eligible->empty()) return std::nullopt;
      const auto i = std::uniform_int_distribution<std::size_t>(0, eligible->size() - 1)(rng_);
      std::string id = std::move((*eligible)[i]);
      (*eligible)[i] = std::move(eligible->back());
      eligible->pop_back();
      return id;
    };
  }

  std::optional<StopReason> iterate() {
    std::optional<StopReason> stop;
    auto draw = make_drawer(stop);
    if (stop) return stop;

    // Pseudo-label filtering belongs to the slice-based loop only; the
    // random baseline shows every draw.
    const bool filtering = config_.sampler == Sampler::SliceBased && state_.gate_open;
    const std::size_t max_draws = filtering ? config_.filter_attempts : config_.batch_size;
    std::size_t draws = 0, surfaced = 0, pseudo = 0, correct = 0;
    while (surfaced < config_.batch_size && draws < max_draws) {
      auto id = draw();
      if (!id) break;
      ++draws;
      const core::Example& ex = *state_.find(*id);
      core::SessionState view = state_;
      if (!filtering) view.gate_open = false;
      const auto outcome = llmfn::predict_candidate(view, backend_, ex, rng_, config_.votes);
      if (outcome.pseudo_labeled) {
        state_.record_pseudo_label(*id, outcome.prediction.output);
        ++pseudo;
        ++result_.pseudo_labeled_count;
        continue;
      }
      state_.record_draft(*id, outcome.prediction.output);
      ++surfaced;
      ++result_.presented_count;
      const std::string gold = *state_.find(*id)->gold_output;
      if (outcome.prediction.output == gold) {
        state_.apply(event(*id, Action::NoChange));
        ++correct;
      } else {
        state_.apply(event(*id, Action::EditedOutput, gold));
        add_gold_demo(*id);
        check_coverage();
        if (config_.track_trajectory && !test_.empty() && state_.demonstrations.size() % 5 == 0)
          snapshot();
      }
      if (state_.demonstrations.size() > config_.caps.max_demos) return StopReason::DemoCap;
      if (result_.presented_count >= config_.caps.max_presented) return StopReason::PresentedCap;
    }
    if (draws == 0) return StopReason::PoolExhausted;

    const double fraction = static_cast<double>(correct + pseudo) /
                            static_cast<double>(std::max<std::size_t>(1, surfaced + pseudo));
    state_.close_round(fraction);
    consecutive_ = (surfaced + pseudo > 0 && correct + pseudo == surfaced + pseudo)
                       ? consecutive_ + 1
                       : 0;
    if (consecutive_ >= config_.caps.consecutive_correct_stop) return StopReason::ConsecutiveCorrect;
    return std::nullopt;
  }

  const SimConfig& config_;
  const llmfn::Backend& backend_;
  const std::vector<data::PoolRecord>& test_;
  core::SessionState state_;
  core::Rng rng_;
  lingo::DefaultAnnotator annotator_;
  lingo::HashedNgramEmbedder embedder_;
  slicing::TextCache cache_;
  std::set<std::string> families_;
  std::set<std::string> covered_;
  std::size_t consecutive_ = 0;
  std::int64_t clock_ = 0;
  SimResult result_;
};

}  // namespace

std::string_view to_string(Sampler s) { return s == Sampler::SliceBased ? "slice" : "random"; }

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::DemoCap: return "DemoCap";
    case StopReason::PresentedCap: return "PresentedCap";
    case StopReason::ConsecutiveCorrect: return "ConsecutiveCorrect";
    case StopReason::SliceAccuracy: return "SliceAccuracy";
    case StopReason::PoolExhausted: return "PoolExhausted";
  }
  return "?";
}

std::string_view to_string(TaskKind t) { return t == TaskKind::Temporal ? "temporal" : "generic"; }

Sampler parse_sampler(std::string_view s) {
  if (s == "slice") return Sampler::SliceBased;
  if (s == "random") return Sampler::Random;
  throw std::invalid_argument("unknown sampler: " + std::string(s));
}

TaskKind parse_task(std::string_view s) {
  if (s == "temporal") return TaskKind::Temporal;
  if (s == "generic") return TaskKind::Generic;
  throw std::invalid_argument("unknown task: " + std::string(s));
}

void validate(const SimConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(c.batch_size > 0, "batch_size must be positive");
  require(c.caps.max_demos > 0, "caps.max_demos must be positive");
  require(c.caps.max_presented > 0, "caps.max_presented must be positive");
  require(c.caps.consecutive_correct_stop > 0, "caps.consecutive_correct_stop must be positive");
  require(c.caps.slice_acc_stop > 0 && c.caps.slice_acc_stop <= 1,
          "caps.slice_acc_stop must be in (0, 1]");
  require(c.clusters > 0, "clusters must be positive");
  require(c.votes > 0, "votes must be positive");
  require(c.filter_attempts >= c.batch_size, "filter_attempts must be at least batch_size");
  require(c.seed_demo_count <= c.caps.max_demos, "seed_demo_count exceeds caps.max_demos");
  require(c.seed_demo_count <= c.pool.size(), "seed_demo_count exceeds the pool size");
  std::set<std::string> ids;
  for (const auto& r : c.pool) {
    require(r.gold_output.has_value(), "every pool record needs a gold_output");
    require(ids.insert(r.id).second, "pool ids must be unique");
  }
}

std::vector<std::string> seed_demo_ids(const SimConfig& config) {
  core::Rng rng(config.seed);
  std::vector<std::size_t> idx(config.pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::string> out;
  std::set<std::string> inputs;
  for (std::size_t i = 0; i < idx.size() && out.size() < config.seed_demo_count; ++i) {
    const auto j = std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng);
    std::swap(idx[i], idx[j]);
    const auto& r = config.pool[idx[i]];
    if (inputs.insert(r.input).second) out.push_back(r.id);
  }
  return out;
}

EvalReport evaluate(const core::DemonstrationSet& demos, const llmfn::Backend& backend,
                    const std::vector<data::PoolRecord>& test, TaskKind task,
                    const llmfn::RetryPolicy& retry) {
  if (test.empty()) throw std::invalid_argument("test set is empty");
  for (const auto& r : test)
    if (!r.gold_output) throw std::invalid_argument("test record without gold_output: " + r.id);

  EvalReport report;
  report.task = task;
  std::vector<std::pair<std::string, std::string>> preds, golds;
  double rouge = 0, bleu = 0;
  std::size_t exact = 0;
  for (const auto& r : test) {
    const auto p = llmfn::infer(backend, llmfn::build_prompt(llmfn::make_spec(demos, r.input)), retry);
    report.rows.push_back({r.id, r.input, *r.gold_output, p.output});
    preds.emplace_back(r.id, p.output);
    golds.emplace_back(r.id, *r.gold_output);
    rouge += metrics::rouge_l_f(p.output, *r.gold_output);
    bleu += metrics::bleu4(p.output, *r.gold_output);
    exact += p.output == textdiff::trim(*r.gold_output) ? 1 : 0;
  }
  const double n = static_cast<double>(test.size());
  auto& s = report.summary;
  s.count = test.size();
  s.rouge_l = rouge / n;
  s.bleu4 = bleu / n;
  s.exact_match = static_cast<double>(exact) / n;
  if (task == TaskKind::Temporal) {
    report.temporal = metrics::temporal_scores(preds, golds);
    s.extraction_f1 = report.temporal->extraction.f1;
    s.normalization_f1 = report.temporal->normalization.f1;
  }
  return report;
}

SimResult run_simulation(const SimConfig& config, const llmfn::Backend& backend,
                         const std::vector<data::PoolRecord>& test_set) {
  validate(config);
  std::set<std::string> pool_inputs;
  for (const auto& r : config.pool) pool_inputs.insert(r.input);
  for (const auto& r : test_set)
    if (pool_inputs.count(r.input))
      throw std::invalid_argument("test input also appears in the pool: " + r.id);
  return Runner(config, backend, test_set).run();
}

std::size_t coverage_cost(const SimResult& r, const Caps& caps) {
  return r.presented_to_coverage.value_or(caps.max_presented);
}

double sign_test_one_sided(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  // sum_{j >= wins} C(n, j) / 2^n, accumulated in log space.
  double p = 0;
  for (std::size_t j = wins; j <= n; ++j)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) -
                  static_cast<double>(n) * std::log(2.0));
  return std::min(1.0, p);
}

ComparisonReport compare(const SimConfig& base, Sampler treatment, Sampler baseline,
                         const std::vector<std::uint64_t>& seeds, const llmfn::Backend& backend,
                         const std::vector<data::PoolRecord>& test_set, std::size_t threads) {
  if (seeds.size() < 2) throw std::invalid_argument("sampler comparison needs at least two seeds");
  validate(base);

  struct Job {
    std::uint64_t seed;
    Sampler sampler;
  };
  std::vector<Job> jobs;
  for (auto s : seeds) jobs.push_back({s, treatment}), jobs.push_back({s, baseline});
  std::vector<SimResult> results(jobs.size());

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next++) < jobs.size();) {
      SimConfig c = base;
      c.seed = jobs[j].seed;
      c.sampler = jobs[j].sampler;
      results[j] = run_simulation(c, backend, test_set);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::future<void>> pool;
    for (std::size_t t = 0; t < std::min(threads, jobs.size()); ++t)
      pool.push_back(std::async(std::launch::async, worker));
    for (auto& f : pool) f.get();
  }

  ComparisonReport report;
  report.task = base.task;
  report.coverage_budget = base.caps.max_presented;
  std::vector<double> cov_t, cov_b, met_t, met_b, pres_t, pres_b;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SeedRow row{seeds[i], std::move(results[2 * i]), std::move(results[2 * i + 1])};
    const auto ct = coverage_cost(row.treatment, base.caps);
    const auto cb = coverage_cost(row.baseline, base.caps);
    if (ct < cb) ++report.wins;
    else if (ct > cb) ++report.losses;
    else ++report.ties;
    cov_t.push_back(static_cast<double>(ct));
    cov_b.push_back(static_cast<double>(cb));
    pres_t.push_back(static_cast<double>(row.treatment.presented_count));
    pres_b.push_back(static_cast<double>(row.baseline.presented_count));
    if (!row.treatment.trajectory.empty())
      met_t.push_back(row.treatment.trajectory.back().metrics.headline(base.task));
    if (!row.baseline.trajectory.empty())
      met_b.push_back(row.baseline.trajectory.back().metrics.headline(base.task));
    report.treatment.covered_runs += row.treatment.presented_to_coverage ? 1 : 0;
    report.baseline.covered_runs += row.baseline.presented_to_coverage ? 1 : 0;
    report.rows.push_back(std::move(row));
  }
  auto fill = [](SamplerSummary& s, Sampler which, const std::vector<double>& cov,
                 const std::vector<double>& met, const std::vector<double>& pres) {
    s.sampler = which;
    const auto c = mean_sd(cov), m = mean_sd(met);
    s.mean_to_coverage = c.mean;
    s.sd_to_coverage = c.sd;
    s.mean_final_metric = m.mean;
    s.sd_final_metric = m.sd;
    s.mean_presented = mean_sd(pres).mean;
  };
  fill(report.treatment, treatment, cov_t, met_t, pres_t);
  fill(report.baseline, baseline, cov_b, met_b, pres_b);
  report.mean_reduction = report.baseline.mean_to_coverage > 0
                              ? 1.0 - report.treatment.mean_to_coverage /
                                          report.baseline.mean_to_coverage
                              : 0.0;
  report.sign_test_p = sign_test_one_sided(report.wins, report.losses);
  return report;
}

ComparisonReport compare_samplers(const SimConfig& base, const std::vector<std::uint64_t>& seeds,
                                  const llmfn::Backend& backend,
                                  const std::vector<data::PoolRecord>& test_set,
                                  std::size_t threads) {
  return compare(base, Sampler::SliceBased, Sampler::Random, seeds, backend, test_set, threads);
}

nlohmann::json to_json(const MetricSnapshot& m) {
  return {{"count", m.count},     {"extraction_f1", m.extraction_f1},
          {"normalization_f1", m.normalization_f1}, {"rouge_l", m.rouge_l},
          {"bleu4", m.bleu4},     {"exact_match", m.exact_match}};
}

namespace {
nlohmann::json prf_json(const metrics::PrfScores& s) {
  return {{"true_positives", s.true_positives}, {"predicted", s.predicted}, {"gold", s.gold},
          {"precision", s.precision},          {"recall", s.recall},       {"f1", s.f1}};
}
}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {{"task", to_string(r.task)}, {"summary", to_json(r.summary)}};
  if (r.temporal) {
    j["extraction"] = prf_json(r.temporal->extraction);
    j["normalization"] = prf_json(r.temporal->normalization);
  } else {
    j["rouge_l"] = r.summary.rouge_l;
    j["bleu4"] = r.summary.bleu4;
  }
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"id", row.id}, {"input", row.input}, {"gold", row.gold},
                    {"prediction", row.prediction}});
  return j;
}

nlohmann::json to_json(const SimResult& r) {
  nlohmann::json demos = nlohmann::json::array();
  for (const auto& d : r.final_demos)
    demos.push_back({{"example_id", d.example_id}, {"input", d.input}, {"output", d.output},
                     {"polarity", d.polarity == core::Polarity::Positive ? "positive" : "negative"}});
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& t : r.trajectory)
    traj.push_back({{"demo_count", t.demo_count}, {"presented", t.presented},
                    {"metrics", to_json(t.metrics)}});
  nlohmann::json j = {{"sampler", to_string(r.sampler)},
                      {"seed", r.seed},
                      {"stop_reason", to_string(r.stop_reason)},
                      {"presented_count", r.presented_count},
                      {"pseudo_labeled_count", r.pseudo_labeled_count},
                      {"iterations", r.iterations},
                      {"family_count", r.family_count},
                      {"families_covered", r.families_covered},
                      {"presented_to_coverage", nullptr},
                      {"final_demos", demos},
                      {"trajectory", traj}};
  if (r.presented_to_coverage) j["presented_to_coverage"] = *r.presented_to_coverage;
  return j;
}

nlohmann::json to_json(const ComparisonReport& r) {
  auto summary = [](const SamplerSummary& s) {
    return nlohmann::json{{"sampler", to_string(s.sampler)},
                          {"mean_to_coverage", s.mean_to_coverage},
                          {"sd_to_coverage", s.sd_to_coverage},
                          {"covered_runs", s.covered_runs},
                          {"mean_final_metric", s.mean_final_metric},
                          {"sd_final_metric", s.sd_final_metric},
                          {"mean_presented", s.mean_presented}};
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"seed", row.seed},
                    {"treatment", to_json(row.treatment)},
                    {"baseline", to_json(row.baseline)}});
  return {{"task", to_string(r.task)},
          {"coverage_budget", r.coverage_budget},
          {"treatment", summary(r.treatment)},
          {"baseline", summary(r.baseline)},
          {"mean_reduction", r.mean_reduction},
          {"wins", r.wins},
          {"losses", r.losses},
          {"ties", r.ties},
          {"sign_test_p", r.sign_test_p},
          {"rows", rows}};
}

}  // namespace shotlist::sim
