#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shotlist/core.hpp"
#include "shotlist/data.hpp"
#include "shotlist/lingo.hpp"
#include "shotlist/llmfn.hpp"
#include "shotlist/sim.hpp"
#include "shotlist/slicing.hpp"
#include "shotlist/textdiff.hpp"

namespace shotlist::service {

struct BackendConfig {
  std::string kind = "mock";  // mock | perfect | http
  std::string base_url;       // http only; empty means the client default
  std::string model;          // http only

  bool operator==(const BackendConfig&) const = default;
};

struct SessionConfig {
  BackendConfig backend;
  sim::TaskKind task = sim::TaskKind::Temporal;
  std::size_t batch_size = 5;
  std::size_t clusters = 20;
  std::size_t min_slice_size = 10;
  double gate_threshold = 0.70;
  double slice_acc_stop = 0.80;
  std::size_t max_demos = 40;
  std::size_t max_presented = 100;
  std::size_t consecutive_correct_stop = 5;
  std::size_t votes = 3;
  std::size_t filter_attempts = 25;
  std::uint64_t seed = 0;

  bool operator==(const SessionConfig&) const = default;
};

struct FieldError {
  std::string field;
  std::string message;
};

/// Parses a config object over the defaults; unknown keys and bad values are
/// reported as field errors.
SessionConfig parse_config(const nlohmann::json& j, std::vector<FieldError>& errors);
std::vector<FieldError> validate(const SessionConfig& config);
nlohmann::json to_json(const SessionConfig& config);

/// Carries the HTTP status the server answers with.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message, std::vector<FieldError> fields = {})
      : std::runtime_error(message), status_(status), fields_(std::move(fields)) {}
  int status() const { return status_; }
  const std::vector<FieldError>& fields() const { return fields_; }

 private:
  int status_;
  std::vector<FieldError> fields_;
};

struct SliceRow {
  std::string slice_id;
  std::string key;
  std::size_t n = 0, m = 0, k = 0;
  slicing::SliceReward reward;
  bool solved = false;  // m >= 1 and k/m at or above the slice accuracy threshold
};

struct CandidateView {
  std::string example_id;
  std::string input;
  std::string draft_output;
  std::string slice_id;
  textdiff::DiffSpans diff_spans;
};

struct BatchView {
  std::string batch_id;
  int iteration = 1;  // rewards in slice_table were computed at this iteration
  std::vector<CandidateView> candidates;
  std::vector<SliceRow> slice_table;
  std::vector<std::string> pseudo_labeled;  // filtered by unanimity, not shown
};

nlohmann::json to_json(const BatchView& view);
BatchView batch_from_json(const nlohmann::json& j);

struct FeedbackItem {
  std::string example_id;
  core::Action action = core::Action::NoChange;
  std::optional<std::string> edited_output;
};

struct FeedbackSummary {
  std::size_t demo_count = 0;
  bool gate_open = false;
  double round_accuracy = 0;
  int iteration = 1;
};

struct PoolResult {
  std::size_t accepted = 0;
  std::vector<data::RejectedLine> rejected;
};

using BackendFactory = std::function<std::unique_ptr<llmfn::Backend>(
    const SessionConfig&, const core::SessionState&)>;

/// mock: MockTeacher over the pool's gold outputs and meta["family"];
/// perfect: PerfectTeacher; http: HttpBackend with the key from the environment.
std::unique_ptr<llmfn::Backend> default_backend(const SessionConfig& config,
                                                const core::SessionState& state);

struct ServiceOptions {
  std::filesystem::path data_dir;
  BackendFactory backend_factory = default_backend;
  llmfn::RetryPolicy retry;
};

/// Session logic independent of transport. One directory per session under
/// data_dir/sessions/<id>: events.jsonl (append-only, authoritative) and
/// state.json (snapshot rewritten after every accepted mutation).
class SessionService {
 public:
  /// Loads every session found under data_dir by replaying its journal.
  explicit SessionService(ServiceOptions options);
  ~SessionService();

  std::string create_session(const std::string& task_description, const SessionConfig& config);
  std::vector<std::string> session_ids() const;

  /// {session_id, config, state, open_batch}.
  nlohmann::json session_json(const std::string& id) const;
  core::SessionState state(const std::string& id) const;
  SessionConfig config(const std::string& id) const;

  PoolResult add_pool(const std::string& id, std::string_view jsonl);
  BatchView next_batch(const std::string& id);
  FeedbackSummary submit_feedback(const std::string& id, const std::string& batch_id,
                                  const std::vector<FeedbackItem>& items);
  std::string prompt(const std::string& id) const;
  sim::EvalReport evaluate(const std::string& id, std::string_view test_jsonl);

  void add_demo(const std::string& id, const std::string& example_id, core::Polarity polarity,
                std::optional<std::string> output);
  void edit_demo(const std::string& id, const std::string& example_id, std::string output);
  void remove_demo(const std::string& id, const std::string& example_id);
  void set_description(const std::string& id, std::string task_description);

  std::filesystem::path session_dir(const std::string& id) const;

 private:
  struct Session;
  std::shared_ptr<Session> get(const std::string& id) const;
  void load_all();

  ServiceOptions options_;
  lingo::DefaultAnnotator annotator_;
  lingo::HashedNgramEmbedder embedder_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// Reads a session journal and folds its core entries over a fresh session.
core::SessionState replay_journal(const std::filesystem::path& events_jsonl);

/// REST front end under /v1.
class HttpServer {
 public:
  struct Options {
    std::optional<std::string> bearer_token;
    std::optional<std::filesystem::path> static_dir;
  };

  HttpServer(SessionService& service, Options options);
  ~HttpServer();

  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; follow with listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shotlist::service
