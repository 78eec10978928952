#include "shotlist/core.hpp"

#include <algorithm>
#include <array>

#include "shotlist/textdiff.hpp"

namespace shotlist::core {
namespace {

constexpr std::array<std::string_view, 7> kStatusNames = {
    "Unlabeled", "ImplicitCorrect", "Corrected", "PseudoLabeled",
    "DemoPositive", "DemoNegative", "Skipped"};
constexpr std::array<std::string_view, 6> kActionNames = {
    "NoChange", "EditedOutput", "AddedPositive", "AddedNegative", "Removed", "Skipped"};

// Statuses may only move up this ladder, except a demonstration being removed.
int rank(Status s) {
  switch (s) {
    case Status::Unlabeled:
      return 0;
    case Status::Skipped:
    case Status::PseudoLabeled:
      return 1;
    case Status::ImplicitCorrect:
      return 2;
    case Status::Corrected:
      return 3;
    case Status::DemoPositive:
    case Status::DemoNegative:
      return 4;
  }
  return 0;
}

[[noreturn]] void reject(const std::string& why) { throw TransitionError(why); }

void require_rank(const Example& ex, Status next) {
  if (rank(next) < rank(ex.status))
    reject("example " + ex.id + ": cannot move from " + std::string(to_string(ex.status)) +
           " to " + std::string(to_string(next)));
}

// Status after a demonstration is removed, derived from what it went through.
Status status_after_removal(const Example& ex) {
  if (!ex.draft_output) return Status::Skipped;
  if (ex.output && *ex.output != *ex.draft_output) return Status::Corrected;
  return Status::ImplicitCorrect;
}

}  // namespace

std::string_view to_string(Status s) { return kStatusNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Action a) { return kActionNames[static_cast<std::size_t>(a)]; }

Status parse_status(std::string_view s) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i)
    if (kStatusNames[i] == s) return static_cast<Status>(i);
  throw std::invalid_argument("unknown status: " + std::string(s));
}

Action parse_action(std::string_view s) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i)
    if (kActionNames[i] == s) return static_cast<Action>(i);
  throw std::invalid_argument("unknown action: " + std::string(s));
}

std::optional<bool> status_verdict(Status status) {
  switch (status) {
    case Status::ImplicitCorrect:
    case Status::PseudoLabeled:
      return true;
    case Status::Corrected:
      return false;
    default:
      return std::nullopt;
  }
}

const Example* SessionState::find(std::string_view id) const {
  auto it = std::find_if(pool.begin(), pool.end(), [&](const Example& e) { return e.id == id; });
  return it == pool.end() ? nullptr : &*it;
}

Example* SessionState::find(std::string_view id) {
  return const_cast<Example*>(std::as_const(*this).find(id));
}

void SessionState::add_example(Example example) {
  if (example.id.empty()) reject("example id must be non-empty");
  if (find(example.id)) reject("duplicate example id: " + example.id);
  pool.push_back(std::move(example));
}

void SessionState::record_draft(std::string_view example_id, std::string draft) {
  Example* ex = find(example_id);
  if (!ex) reject("unknown example id: " + std::string(example_id));
  if (ex->status != Status::Unlabeled) reject("example already labeled: " + ex->id);
  ex->draft_output = std::move(draft);
  ex->surfaced = true;
}

void SessionState::record_pseudo_label(std::string_view example_id, std::string output) {
  Example* ex = find(example_id);
  if (!ex) reject("unknown example id: " + std::string(example_id));
  if (ex->status != Status::Unlabeled) reject("example already labeled: " + ex->id);
  ex->draft_output = output;
  ex->output = std::move(output);
  ex->status = Status::PseudoLabeled;
  ex->surfaced = true;
}

void SessionState::apply(const FeedbackEvent& event) {
  if (event.iteration != iteration)
    reject("event iteration " + std::to_string(event.iteration) + " does not match session iteration " +
           std::to_string(iteration));
  Example* found = find(event.example_id);
  if (!found) reject("unknown example id: " + event.example_id);

  // Work on copies; commit only after every check passed.
  Example ex = *found;
  DemonstrationSet demos = demonstrations;
  auto demo_it = std::find_if(demos.demos.begin(), demos.demos.end(),
                              [&](const Demo& d) { return d.example_id == ex.id; });

  auto add_demo = [&](std::string output, Polarity polarity) {
    if (ex.is_demo()) reject("example is already a demonstration: " + ex.id);
    if (std::any_of(demos.demos.begin(), demos.demos.end(),
                    [&](const Demo& d) { return d.input == ex.input; }))
      reject("duplicate demonstration input: " + ex.input);
    if (demos.size() >= demo_capacity)
      reject("demonstration set is full (" + std::to_string(demo_capacity) + ")");
    ex.output = output;
    ex.status = polarity == Polarity::Positive ? Status::DemoPositive : Status::DemoNegative;
    demos.demos.push_back({ex.id, ex.input, std::move(output), polarity});
  };

  switch (event.action) {
    case Action::NoChange: {
      if (ex.is_demo()) reject("NoChange on a demonstration: " + ex.id);
      require_rank(ex, Status::ImplicitCorrect);
      if (!ex.draft_output) reject("NoChange without a draft: " + ex.id);
      ex.output = ex.draft_output;
      ex.status = Status::ImplicitCorrect;
      break;
    }
    case Action::EditedOutput: {
      if (!event.edited_output) reject("EditedOutput requires edited_output");
      const std::string edited = *event.edited_output;
      if (textdiff::trim(edited).empty()) reject("edited output must be non-empty");
      if (ex.is_demo()) {
        const bool negative = textdiff::trim(edited) == kNegativeOutput;
        demo_it->output = edited;
        demo_it->polarity = negative ? Polarity::Negative : Polarity::Positive;
        ex.output = edited;
        ex.status = negative ? Status::DemoNegative : Status::DemoPositive;
        break;
      }
      if (!ex.draft_output) reject("EditedOutput without a draft: " + ex.id);
      const Status next =
          edited == *ex.draft_output ? Status::ImplicitCorrect : Status::Corrected;
      require_rank(ex, next);
      ex.output = edited;
      ex.status = next;
      break;
    }
    case Action::AddedPositive: {
      std::optional<std::string> out = event.edited_output;
      if (!out) out = ex.output ? ex.output : ex.draft_output;
      if (!out || textdiff::trim(*out).empty()) reject("AddedPositive needs an output: " + ex.id);
      if (textdiff::trim(*out) == kNegativeOutput)
        reject("AddedPositive with the negative placeholder; use AddedNegative");
      add_demo(*out, Polarity::Positive);
      break;
    }
    case Action::AddedNegative: {
      if (event.edited_output && textdiff::trim(*event.edited_output) != kNegativeOutput)
        reject("AddedNegative output must be N/A");
      add_demo(std::string(kNegativeOutput), Polarity::Negative);
      break;
    }
    case Action::Removed: {
      if (!ex.is_demo() || demo_it == demos.demos.end())
        reject("Removed on a non-demonstration: " + ex.id);
      demos.demos.erase(demo_it);
      ex.status = status_after_removal(ex);
      break;
    }
    case Action::Skipped: {
      if (ex.is_demo()) reject("Skipped on a demonstration: " + ex.id);
      require_rank(ex, Status::Skipped);
      ex.status = Status::Skipped;
      break;
    }
  }

  *found = std::move(ex);
  demonstrations = std::move(demos);
  events.push_back(event);
}

void SessionState::close_round(double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) reject("round fraction outside [0, 1]");
  round_accuracies.push_back(fraction);
  const auto n = round_accuracies.size();
  if (n >= 2 && round_accuracies[n - 1] >= gate_threshold &&
      round_accuracies[n - 2] >= gate_threshold)
    gate_open = true;
  ++iteration;
}

void SessionState::set_description(std::string task_description) {
  if (textdiff::trim(task_description).empty()) reject("task description must be non-empty");
  if (task_description.find('\n') != std::string::npos)
    reject("task description must be a single line");
  demonstrations.task_description = std::move(task_description);
}

SessionState make_session(std::string task_description, std::uint64_t rng_seed,
                          std::size_t demo_capacity, double gate_threshold) {
  SessionState s;
  s.gate_threshold = gate_threshold;
  s.demonstrations.task_description = std::move(task_description);
  s.rng_seed = rng_seed;
  s.demo_capacity = demo_capacity;
  return s;
}

SessionState add_example(SessionState state, Example example) {
  state.add_example(std::move(example));
  return state;
}

SessionState record_draft(SessionState state, std::string_view example_id, std::string draft) {
  state.record_draft(example_id, std::move(draft));
  return state;
}

SessionState record_pseudo_label(SessionState state, std::string_view example_id,
                                 std::string output) {
  state.record_pseudo_label(example_id, std::move(output));
  return state;
}

SessionState apply_event(SessionState state, const FeedbackEvent& event) {
  state.apply(event);
  return state;
}

SessionState update_gate(SessionState state, double round_correct_fraction) {
  state.close_round(round_correct_fraction);
  return state;
}

SessionState apply(SessionState state, const JournalEntry& entry) {
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, PoolAppend>)
          state.add_example(e.example);
        else if constexpr (std::is_same_v<T, DraftRecorded>)
          state.record_draft(e.example_id, e.draft);
        else if constexpr (std::is_same_v<T, PseudoLabelRecorded>)
          state.record_pseudo_label(e.example_id, e.output);
        else if constexpr (std::is_same_v<T, FeedbackEvent>)
          state.apply(e);
        else if constexpr (std::is_same_v<T, RoundClosed>)
          state.close_round(e.correct_fraction);
        else
          state.set_description(e.task_description);
      },
      entry);
  return state;
}

SessionState replay(SessionState initial, const std::vector<JournalEntry>& journal) {
  for (const auto& entry : journal) initial = apply(std::move(initial), entry);
  return initial;
}

}  // namespace shotlist::core
