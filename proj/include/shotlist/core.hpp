#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace shotlist::core {

using Rng = std::mt19937_64;

inline constexpr std::string_view kNegativeOutput = "N/A";
inline constexpr std::size_t kDefaultDemoCapacity = 40;
inline constexpr double kGateThreshold = 0.70;

enum class Status {
  Unlabeled,
  ImplicitCorrect,
  Corrected,
  PseudoLabeled,
  DemoPositive,
  DemoNegative,
  Skipped
};

enum class Polarity { Positive, Negative };

enum class Action { NoChange, EditedOutput, AddedPositive, AddedNegative, Removed, Skipped };

/// Raised for any rejected state transition; the state is left untouched.
class TransitionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Example {
  std::string id;
  std::string input;
  std::optional<std::string> gold_output;   // oracle / simulation only
  std::optional<std::string> draft_output;  // what the function proposed
  std::optional<std::string> output;        // final accepted output
  Status status = Status::Unlabeled;
  bool surfaced = false;                    // shown to the annotator or filtered
  std::map<std::string, std::string> meta;

  bool is_demo() const { return status == Status::DemoPositive || status == Status::DemoNegative; }
  bool operator==(const Example&) const = default;
};

struct Demo {
  std::string example_id;
  std::string input;
  std::string output;
  Polarity polarity = Polarity::Positive;

  bool operator==(const Demo&) const = default;
};

struct DemonstrationSet {
  std::string task_description;
  std::vector<Demo> demos;

  std::size_t size() const { return demos.size(); }
  bool operator==(const DemonstrationSet&) const = default;
};

struct FeedbackEvent {
  int iteration = 1;
  std::string example_id;
  Action action = Action::NoChange;
  std::optional<std::string> edited_output;
  std::int64_t timestamp_ms = 0;

  bool operator==(const FeedbackEvent&) const = default;
};

struct SessionState {
  std::vector<Example> pool;
  DemonstrationSet demonstrations;
  std::vector<FeedbackEvent> events;
  int iteration = 1;
  bool gate_open = false;
  std::vector<double> round_accuracies;
  std::uint64_t rng_seed = 0;
  std::size_t demo_capacity = kDefaultDemoCapacity;
  double gate_threshold = kGateThreshold;

  const Example* find(std::string_view id) const;
  Example* find(std::string_view id);

  // In-place mutators. Each validates first and throws TransitionError
  // without modifying the state.
  void add_example(Example example);
  void record_draft(std::string_view example_id, std::string draft);
  void record_pseudo_label(std::string_view example_id, std::string output);
  void apply(const FeedbackEvent& event);
  void close_round(double round_correct_fraction);
  void set_description(std::string task_description);

  bool operator==(const SessionState&) const = default;
};

/// Starting point for replay: empty pool, no events.
SessionState make_session(std::string task_description, std::uint64_t rng_seed,
                          std::size_t demo_capacity = kDefaultDemoCapacity,
                          double gate_threshold = kGateThreshold);

/// Appends an example to the pool; duplicate ids are rejected.
SessionState add_example(SessionState state, Example example);

/// Records the function's draft for an example shown to the annotator.
SessionState record_draft(SessionState state, std::string_view example_id, std::string draft);

/// Records a unanimous vote: the example is hidden and counted as correct.
SessionState record_pseudo_label(SessionState state, std::string_view example_id,
                                 std::string output);

SessionState apply_event(SessionState state, const FeedbackEvent& event);

/// Closes the current round: appends the correct fraction, opens the gate
/// when the last two fractions reach the threshold (it never closes again),
/// and advances the iteration counter.
SessionState update_gate(SessionState state, double round_correct_fraction);

struct PoolAppend {
  Example example;
  bool operator==(const PoolAppend&) const = default;
};
struct DraftRecorded {
  std::string example_id;
  std::string draft;
  bool operator==(const DraftRecorded&) const = default;
};
struct PseudoLabelRecorded {
  std::string example_id;
  std::string output;
  bool operator==(const PseudoLabelRecorded&) const = default;
};
struct RoundClosed {
  double correct_fraction = 0.0;
  bool operator==(const RoundClosed&) const = default;
};
struct DescriptionSet {
  std::string task_description;
  bool operator==(const DescriptionSet&) const = default;
};

/// Every mutation of a session, in order. Folding the journal over
/// make_session() reproduces the live state.
using JournalEntry = std::variant<PoolAppend, DraftRecorded, PseudoLabelRecorded, FeedbackEvent,
                                  RoundClosed, DescriptionSet>;

SessionState apply(SessionState state, const JournalEntry& entry);
SessionState replay(SessionState initial, const std::vector<JournalEntry>& journal);

/// Correct / incorrect verdict implied by an example's status, if any.
/// Demonstrations carry no verdict here (they are validated by leave-one-out).
std::optional<bool> status_verdict(Status status);

std::string_view to_string(Status s);
std::string_view to_string(Action a);
Status parse_status(std::string_view s);
Action parse_action(std::string_view s);

}  // namespace shotlist::core
