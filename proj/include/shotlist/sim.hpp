#pragma once

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "shotlist/core.hpp"
#include "shotlist/data.hpp"
#include "shotlist/llmfn.hpp"
#include "shotlist/metrics.hpp"

namespace shotlist::sim {

enum class Sampler { SliceBased, Random };
enum class StopReason { DemoCap, PresentedCap, ConsecutiveCorrect, SliceAccuracy, PoolExhausted };
enum class TaskKind { Temporal, Generic };

std::string_view to_string(Sampler s);
std::string_view to_string(StopReason r);
std::string_view to_string(TaskKind t);
Sampler parse_sampler(std::string_view s);  // "slice" | "random"
TaskKind parse_task(std::string_view s);    // "temporal" | "generic"

inline constexpr const char* kTemporalDescription =
    "Find the date mentioned in the sentence and normalize it as \"expression == YYYY-MM-DD\". "
    "Answer N/A if there is none.";

struct Caps {
  std::size_t max_demos = 40;
  std::size_t max_presented = 100;
  std::size_t consecutive_correct_stop = 5;
  double slice_acc_stop = 0.80;
};

struct SimConfig {
  Sampler sampler = Sampler::SliceBased;
  std::uint64_t seed = 0;
  std::vector<data::PoolRecord> pool;  // every record needs a gold output
  std::string task_description = kTemporalDescription;
  TaskKind task = TaskKind::Temporal;
  std::size_t seed_demo_count = 3;
  std::size_t batch_size = 5;
  Caps caps;
  std::size_t clusters = 20;
  std::size_t min_slice_size = 10;
  std::size_t votes = 3;
  std::size_t filter_attempts = 25;  // draws per batch once the gate is open
  bool track_trajectory = true;
};

/// Throws std::invalid_argument naming the first bad field.
void validate(const SimConfig& config);

struct MetricSnapshot {
  std::size_t count = 0;
  double extraction_f1 = 0;     // temporal task only
  double normalization_f1 = 0;  // temporal task only
  double rouge_l = 0;           // mean over examples
  double bleu4 = 0;             // mean over examples
  double exact_match = 0;

  /// The headline number: normalization F1 for temporal tasks, ROUGE-L otherwise.
  double headline(TaskKind task) const {
    return task == TaskKind::Temporal ? normalization_f1 : rouge_l;
  }
};

struct EvalRow {
  std::string id;
  std::string input;
  std::string gold;
  std::string prediction;
};

struct EvalReport {
  TaskKind task = TaskKind::Temporal;
  MetricSnapshot summary;
  std::optional<metrics::TemporalScores> temporal;
  std::vector<EvalRow> rows;
};

/// Runs the function (stored-order prompt, greedy) over every test record.
/// Throws std::invalid_argument on an empty set or a record without gold.
EvalReport evaluate(const core::DemonstrationSet& demos, const llmfn::Backend& backend,
                    const std::vector<data::PoolRecord>& test, TaskKind task,
                    const llmfn::RetryPolicy& retry = {});

struct TrajectoryPoint {
  std::size_t demo_count = 0;
  std::size_t presented = 0;
  MetricSnapshot metrics;
};

struct SimResult {
  Sampler sampler = Sampler::SliceBased;
  std::uint64_t seed = 0;
  std::vector<core::Demo> final_demos;
  std::size_t presented_count = 0;
  std::size_t pseudo_labeled_count = 0;
  int iterations = 0;  // completed rounds
  StopReason stop_reason = StopReason::PoolExhausted;
  std::vector<TrajectoryPoint> trajectory;
  std::size_t family_count = 0;           // distinct meta "family" values in the pool
  std::vector<std::string> families_covered;
  std::optional<std::size_t> presented_to_coverage;  // when every family reached the demos
};

/// Seed demonstration ids: a function of (pool, seed, count) only, so both
/// samplers start from the same demos.
std::vector<std::string> seed_demo_ids(const SimConfig& config);

SimResult run_simulation(const SimConfig& config, const llmfn::Backend& backend,
                         const std::vector<data::PoolRecord>& test_set);

struct SamplerSummary {
  Sampler sampler = Sampler::SliceBased;
  double mean_to_coverage = 0, sd_to_coverage = 0;
  std::size_t covered_runs = 0;
  double mean_final_metric = 0, sd_final_metric = 0;
  double mean_presented = 0;
};

struct SeedRow {
  std::uint64_t seed = 0;
  SimResult treatment;
  SimResult baseline;
};

struct ComparisonReport {
  TaskKind task = TaskKind::Temporal;
  std::size_t coverage_budget = 0;  // value used for runs that never covered every family
  SamplerSummary treatment;
  SamplerSummary baseline;
  double mean_reduction = 0;  // 1 - treatment mean / baseline mean (to coverage)
  std::size_t wins = 0, losses = 0, ties = 0;
  double sign_test_p = 1.0;   // one-sided: treatment reaches coverage sooner
  std::vector<SeedRow> rows;
};

/// Presented count until coverage, or the presented budget when the run
/// stopped first.
std::size_t coverage_cost(const SimResult& r, const Caps& caps);

/// P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_one_sided(std::size_t wins, std::size_t losses);

/// Runs `treatment` and `baseline` samplers per seed from the same seed demos.
/// Runs are independent and execute on up to `threads` workers (0 = hardware).
ComparisonReport compare(const SimConfig& base, Sampler treatment, Sampler baseline,
                         const std::vector<std::uint64_t>& seeds, const llmfn::Backend& backend,
                         const std::vector<data::PoolRecord>& test_set, std::size_t threads = 0);

/// SliceBased against Random. Needs at least two seeds.
ComparisonReport compare_samplers(const SimConfig& base, const std::vector<std::uint64_t>& seeds,
                                  const llmfn::Backend& backend,
                                  const std::vector<data::PoolRecord>& test_set,
                                  std::size_t threads = 0);

nlohmann::json to_json(const MetricSnapshot& m);
nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const SimResult& r);
nlohmann::json to_json(const ComparisonReport& r);

// --- synthetic data --------------------------------------------------------

struct FamilyFrequency {
  std::string family;
  double frequency = 0;
};

struct SyntheticSpec {
  std::vector<FamilyFrequency> families;
  std::size_t pool_size = 600;
  std::size_t test_size = 100;
};

/// us_date 0.50, long_date 0.25, relative 0.15, holiday 0.05, negative 0.05.
SyntheticSpec default_synthetic_spec();

/// Families the generator knows how to write.
const std::vector<std::string>& synthetic_families();

/// Relative expressions resolve against this date.
inline constexpr metrics::Date kReferenceDate{2014, 3, 30};

struct SyntheticData {
  std::vector<data::PoolRecord> pool;
  std::vector<data::PoolRecord> test;
};

/// Deterministic in (spec, seed). Inputs are unique across pool and test.
/// Each record has meta["family"]. Throws std::invalid_argument on unknown
/// families, negative frequencies or frequencies not summing to 1.
SyntheticData generate_synthetic_pool(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace shotlist::sim
