#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shotlist/core.hpp"

namespace shotlist::llmfn {

struct PromptDemo {
  std::string input;
  std::string output;
};

struct PromptSpec {
  std::string task_description;
  std::vector<PromptDemo> demos;
  std::string query;
};

PromptSpec make_spec(const core::DemonstrationSet& demos, std::string query);

/// Description, one ">> {input} => {output}" line per demo in `ordering`,
/// then ">> {query} =>", joined by newlines.
std::string build_prompt(const PromptSpec& spec, const std::vector<std::size_t>& ordering);
std::string build_prompt(const PromptSpec& spec);  // stored order

/// Description and demo lines only, no query line.
std::string render_function(const core::DemonstrationSet& demos);

std::vector<std::size_t> identity_ordering(std::size_t n);

struct Prediction {
  std::string output;
  std::optional<double> total_logprob;
  std::string backend_id;

  bool operator==(const Prediction&) const = default;
};

/// Trims whitespace and cuts at the first newline.
std::string clean_completion(std::string_view raw);

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Worth retrying: transport failure, timeout, rate limit, 5xx.
class TransientError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Raised once the retry budget is spent on transient errors.
class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// One greedy completion. Implementations must be safe to call concurrently.
  virtual Prediction complete(const std::string& prompt) const = 0;
  virtual std::string id() const = 0;
  /// Remote backends get their vote requests issued concurrently.
  virtual bool is_remote() const { return false; }
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_delay{200};
  std::chrono::milliseconds max_delay{2000};
};

/// Calls the backend with capped exponential backoff on TransientError and
/// normalizes the completion with clean_completion().
Prediction infer(const Backend& backend, const std::string& prompt, const RetryPolicy& retry = {});

struct VoteResult {
  bool unanimous = false;
  Prediction best;               // the agreed output, or the highest-logprob one
  std::vector<Prediction> all;   // in vote order
};

/// `votes` random orderings of the demos; distinct orderings are used while
/// the demo set still has unused permutations.
VoteResult unanimity_vote(const PromptSpec& spec, const Backend& backend, core::Rng& rng,
                          std::size_t votes = 3, const RetryPolicy& retry = {});

/// Predicts demo `index` from all the other demos in stored order.
bool cross_validate_demo(const PromptSpec& spec, const Backend& backend, std::size_t index,
                         const RetryPolicy& retry = {});

struct CandidateOutcome {
  bool pseudo_labeled = false;
  Prediction prediction;           // the draft shown, or the unanimous output
  std::optional<VoteResult> vote;  // present when the gate was open
};

/// Gate closed (or fewer than two demos): single stored-order inference.
/// Gate open: unanimity vote; unanimous outputs become pseudo-labels and the
/// example stays hidden.
CandidateOutcome predict_candidate(const core::SessionState& state, const Backend& backend,
                                   const core::Example& example, core::Rng& rng,
                                   std::size_t votes = 3, const RetryPolicy& retry = {});

// --- backends -------------------------------------------------------------

/// Test teacher. Every known input carries a hidden family id. If a demo in
/// the prompt shares the query's family the gold output is returned;
/// otherwise a corruption "N/A*<hash>" keyed on the demo ordering, so
/// different orderings disagree.
class MockTeacher final : public Backend {
 public:
  struct Entry {
    std::string input;
    std::string gold;
    std::string family;
  };

  explicit MockTeacher(const std::vector<Entry>& entries);
  Prediction complete(const std::string& prompt) const override;
  std::string id() const override { return "mock-teacher"; }

 private:
  std::map<std::string, Entry, std::less<>> by_input_;
};

/// Always answers with the gold output of a known query.
class PerfectTeacher final : public Backend {
 public:
  explicit PerfectTeacher(const std::vector<MockTeacher::Entry>& entries);
  Prediction complete(const std::string& prompt) const override;
  std::string id() const override { return "perfect-teacher"; }

 private:
  std::map<std::string, std::string, std::less<>> gold_;
};

/// Always answers the same fixed text.
class ConstantBackend final : public Backend {
 public:
  explicit ConstantBackend(std::string answer) : answer_(std::move(answer)) {}
  Prediction complete(const std::string&) const override { return {answer_, -1.0, id()}; }
  std::string id() const override { return "constant"; }

 private:
  std::string answer_;
};

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model = "davinci-002";
  int max_tokens = 64;
  std::chrono::milliseconds timeout{30000};
  std::optional<std::filesystem::path> audit_log;
};

/// OpenAI-compatible /completions client: temperature 0, stop at newline,
/// token logprobs summed into total_logprob when the server returns them.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  Prediction complete(const std::string& prompt) const override;
  std::string id() const override { return "http:" + config_.model; }
  bool is_remote() const override { return true; }

  /// Request body sent for `prompt`.
  std::string request_body(const std::string& prompt) const;
  /// Parses a completions response body into a prediction.
  Prediction parse_response(const std::string& body) const;

 private:
  HttpBackendConfig config_;
  std::string host_;         // scheme://host[:port]
  std::string path_prefix_;  // e.g. /v1
  mutable std::mutex audit_mutex_;
};

/// Reads SHOTLIST_API_KEY, falling back to OPENAI_API_KEY.
std::string api_key_from_env();

/// Parsed view of a prompt produced by build_prompt.
struct ParsedPrompt {
  std::vector<PromptDemo> demos;
  std::string query;
};
ParsedPrompt parse_prompt(std::string_view prompt);

}  // namespace shotlist::llmfn
