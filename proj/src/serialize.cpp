#include "shotlist/serialize.hpp"

namespace shotlist::core {
namespace {

using nlohmann::json;

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

}  // namespace

void to_json(json& j, const Example& e) {
  j = json{{"id", e.id},
           {"input", e.input},
           {"status", to_string(e.status)},
           {"surfaced", e.surfaced},
           {"meta", e.meta}};
  put_optional(j, "gold_output", e.gold_output);
  put_optional(j, "draft_output", e.draft_output);
  put_optional(j, "output", e.output);
}

void from_json(const json& j, Example& e) {
  e.id = j.at("id").get<std::string>();
  e.input = j.at("input").get<std::string>();
  e.status = parse_status(j.value("status", "Unlabeled"));
  e.surfaced = j.value("surfaced", false);
  e.meta = j.value("meta", std::map<std::string, std::string>{});
  e.gold_output = get_optional<std::string>(j, "gold_output");
  e.draft_output = get_optional<std::string>(j, "draft_output");
  e.output = get_optional<std::string>(j, "output");
}

void to_json(json& j, const Demo& d) {
  j = json{{"example_id", d.example_id},
           {"input", d.input},
           {"output", d.output},
           {"polarity", d.polarity == Polarity::Positive ? "positive" : "negative"}};
}

void from_json(const json& j, Demo& d) {
  d.example_id = j.at("example_id").get<std::string>();
  d.input = j.at("input").get<std::string>();
  d.output = j.at("output").get<std::string>();
  const auto pol = j.at("polarity").get<std::string>();
  if (pol != "positive" && pol != "negative") throw std::invalid_argument("bad polarity: " + pol);
  d.polarity = pol == "positive" ? Polarity::Positive : Polarity::Negative;
}

void to_json(json& j, const FeedbackEvent& e) {
  j = json{{"iteration", e.iteration},
           {"example_id", e.example_id},
           {"action", to_string(e.action)},
           {"timestamp_ms", e.timestamp_ms}};
  put_optional(j, "edited_output", e.edited_output);
}

void from_json(const json& j, FeedbackEvent& e) {
  e.iteration = j.at("iteration").get<int>();
  e.example_id = j.at("example_id").get<std::string>();
  e.action = parse_action(j.at("action").get<std::string>());
  e.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
  e.edited_output = get_optional<std::string>(j, "edited_output");
}

void to_json(json& j, const SessionState& s) {
  j = json{{"schema_version", kSchemaVersion},
           {"task_description", s.demonstrations.task_description},
           {"pool", s.pool},
           {"demonstrations", s.demonstrations.demos},
           {"events", s.events},
           {"iteration", s.iteration},
           {"gate_open", s.gate_open},
           {"round_accuracies", s.round_accuracies},
           {"rng_seed", s.rng_seed},
           {"demo_capacity", s.demo_capacity},
           {"gate_threshold", s.gate_threshold}};
}

void from_json(const json& j, SessionState& s) {
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion)
    throw std::invalid_argument("unsupported schema_version " + std::to_string(version));
  s.demonstrations.task_description = j.at("task_description").get<std::string>();
  s.pool = j.at("pool").get<std::vector<Example>>();
  s.demonstrations.demos = j.at("demonstrations").get<std::vector<Demo>>();
  s.events = j.at("events").get<std::vector<FeedbackEvent>>();
  s.iteration = j.at("iteration").get<int>();
  s.gate_open = j.at("gate_open").get<bool>();
  s.round_accuracies = j.at("round_accuracies").get<std::vector<double>>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  s.demo_capacity = j.value("demo_capacity", kDefaultDemoCapacity);
  s.gate_threshold = j.value("gate_threshold", kGateThreshold);
}

void to_json(json& j, const JournalEntry& entry) {
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, PoolAppend>) {
          j = json{{"type", "pool"}, {"example", e.example}};
        } else if constexpr (std::is_same_v<T, DraftRecorded>) {
          j = json{{"type", "draft"}, {"example_id", e.example_id}, {"draft", e.draft}};
        } else if constexpr (std::is_same_v<T, PseudoLabelRecorded>) {
          j = json{{"type", "pseudo"}, {"example_id", e.example_id}, {"output", e.output}};
        } else if constexpr (std::is_same_v<T, FeedbackEvent>) {
          j = json{{"type", "feedback"}, {"event", e}};
        } else if constexpr (std::is_same_v<T, RoundClosed>) {
          j = json{{"type", "round"}, {"correct_fraction", e.correct_fraction}};
        } else {
          j = json{{"type", "description"}, {"task_description", e.task_description}};
        }
      },
      entry);
}

void from_json(const json& j, JournalEntry& entry) {
  const auto type = j.at("type").get<std::string>();
  if (type == "pool") {
    entry = PoolAppend{j.at("example").get<Example>()};
  } else if (type == "draft") {
    entry = DraftRecorded{j.at("example_id").get<std::string>(), j.at("draft").get<std::string>()};
  } else if (type == "pseudo") {
    entry = PseudoLabelRecorded{j.at("example_id").get<std::string>(),
                                j.at("output").get<std::string>()};
  } else if (type == "feedback") {
    entry = j.at("event").get<FeedbackEvent>();
  } else if (type == "round") {
    entry = RoundClosed{j.at("correct_fraction").get<double>()};
  } else if (type == "description") {
    entry = DescriptionSet{j.at("task_description").get<std::string>()};
  } else {
    throw std::invalid_argument("unknown journal entry type: " + type);
  }
}

}  // namespace shotlist::core
