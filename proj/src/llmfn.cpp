#include "shotlist/llmfn.hpp"

#include <algorithm>
#include <cstdint>
#include <future>
#include <set>
#include <sstream>
#include <thread>

#include "shotlist/textdiff.hpp"

namespace shotlist::llmfn {
namespace {

constexpr std::string_view kLinePrefix = ">> ";
constexpr std::string_view kArrow = " => ";
constexpr std::string_view kQuerySuffix = " =>";

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::size_t factorial_capped(std::size_t n, std::size_t cap) {
  std::size_t f = 1;
  for (std::size_t k = 2; k <= n && f < cap; ++k) f *= k;
  return f;
}

}  // namespace

PromptSpec make_spec(const core::DemonstrationSet& demos, std::string query) {
  PromptSpec spec;
  spec.task_description = demos.task_description;
  spec.query = std::move(query);
  for (const auto& d : demos.demos) spec.demos.push_back({d.input, d.output});
  return spec;
}

std::vector<std::size_t> identity_ordering(std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

std::string build_prompt(const PromptSpec& spec, const std::vector<std::size_t>& ordering) {
  if (ordering.size() != spec.demos.size())
    throw std::invalid_argument("ordering is not a permutation of the demos");
  std::vector<bool> seen(ordering.size(), false);
  std::string out = spec.task_description;
  for (auto idx : ordering) {
    if (idx >= spec.demos.size() || seen[idx])
      throw std::invalid_argument("ordering is not a permutation of the demos");
    seen[idx] = true;
    out += '\n';
    out += kLinePrefix;
    out += spec.demos[idx].input;
    out += kArrow;
    out += spec.demos[idx].output;
  }
  out += '\n';
  out += kLinePrefix;
  out += spec.query;
  out += kQuerySuffix;
  return out;
}

std::string build_prompt(const PromptSpec& spec) {
  return build_prompt(spec, identity_ordering(spec.demos.size()));
}

std::string render_function(const core::DemonstrationSet& demos) {
  std::string out = demos.task_description;
  for (const auto& d : demos.demos) {
    out += '\n';
    out += kLinePrefix;
    out += d.input;
    out += kArrow;
    out += d.output;
  }
  return out;
}

ParsedPrompt parse_prompt(std::string_view prompt) {
  ParsedPrompt parsed;
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= prompt.size()) {
    auto nl = prompt.find('\n', start);
    if (nl == std::string_view::npos) nl = prompt.size();
    lines.push_back(prompt.substr(start, nl - start));
    start = nl + 1;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = lines[i];
    if (line.substr(0, kLinePrefix.size()) != kLinePrefix) continue;
    line.remove_prefix(kLinePrefix.size());
    const bool last = i + 1 == lines.size();
    if (last && line.size() >= kQuerySuffix.size() &&
        line.substr(line.size() - kQuerySuffix.size()) == kQuerySuffix) {
      parsed.query = std::string(line.substr(0, line.size() - kQuerySuffix.size()));
      continue;
    }
    const auto arrow = line.rfind(kArrow);
    if (arrow == std::string_view::npos) continue;
    parsed.demos.push_back(
        {std::string(line.substr(0, arrow)), std::string(line.substr(arrow + kArrow.size()))});
  }
  return parsed;
}

std::string clean_completion(std::string_view raw) {
  // Leading blank lines are not a completion; cut at the first newline after text.
  while (!raw.empty() && (raw.front() == '\n' || raw.front() == '\r' || raw.front() == ' ' ||
                          raw.front() == '\t'))
    raw.remove_prefix(1);
  const auto nl = raw.find('\n');
  if (nl != std::string_view::npos) raw = raw.substr(0, nl);
  return std::string(textdiff::trim(raw));
}

Prediction infer(const Backend& backend, const std::string& prompt, const RetryPolicy& retry) {
  auto delay = retry.initial_delay;
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, retry.attempts); ++attempt) {
    try {
      Prediction p = backend.complete(prompt);
      p.output = clean_completion(p.output);
      if (p.backend_id.empty()) p.backend_id = backend.id();
      return p;
    } catch (const TransientError& e) {
      last_error = e.what();
      if (attempt < retry.attempts && delay.count() > 0) {
        std::this_thread::sleep_for(delay);
        delay = std::min(delay * 2, retry.max_delay);
      }
    }
  }
  throw BackendUnavailable("backend " + backend.id() + " unavailable after " +
                           std::to_string(retry.attempts) + " attempts: " + last_error);
}

VoteResult unanimity_vote(const PromptSpec& spec, const Backend& backend, core::Rng& rng,
                          std::size_t votes, const RetryPolicy& retry) {
  if (spec.demos.empty()) throw std::invalid_argument("unanimity vote needs at least one demo");
  if (votes == 0) throw std::invalid_argument("unanimity vote needs at least one vote");

  const std::size_t n = spec.demos.size();
  const std::size_t distinct_available = factorial_capped(n, votes);
  std::set<std::vector<std::size_t>> used;
  std::vector<std::vector<std::size_t>> orderings;
  while (orderings.size() < votes) {
    auto order = identity_ordering(n);
    std::shuffle(order.begin(), order.end(), rng);
    if (used.size() < distinct_available && used.count(order)) continue;
    used.insert(order);
    orderings.push_back(std::move(order));
  }

  VoteResult result;
  result.all.resize(votes);
  if (backend.is_remote()) {
    std::vector<std::future<Prediction>> pending;
    for (const auto& order : orderings)
      pending.push_back(std::async(std::launch::async, [&, prompt = build_prompt(spec, order)] {
        return infer(backend, prompt, retry);
      }));
    for (std::size_t v = 0; v < votes; ++v) result.all[v] = pending[v].get();
  } else {
    for (std::size_t v = 0; v < votes; ++v)
      result.all[v] = infer(backend, build_prompt(spec, orderings[v]), retry);
  }

  result.unanimous = std::all_of(result.all.begin(), result.all.end(), [&](const Prediction& p) {
    return p.output == result.all.front().output;
  });
  if (result.unanimous) {
    result.best = result.all.front();
    return result;
  }
  std::size_t best = 0;
  auto score = [](const Prediction& p) {
    return p.total_logprob.value_or(-std::numeric_limits<double>::infinity());
  };
  for (std::size_t v = 1; v < votes; ++v)
    if (score(result.all[v]) > score(result.all[best])) best = v;
  result.best = result.all[best];
  return result;
}

bool cross_validate_demo(const PromptSpec& spec, const Backend& backend, std::size_t index,
                         const RetryPolicy& retry) {
  if (spec.demos.size() < 2) throw std::invalid_argument("cross-validation needs at least two demos");
  if (index >= spec.demos.size()) throw std::out_of_range("demo index out of range");
  PromptSpec held_out;
  held_out.task_description = spec.task_description;
  held_out.query = spec.demos[index].input;
  for (std::size_t i = 0; i < spec.demos.size(); ++i)
    if (i != index) held_out.demos.push_back(spec.demos[i]);
  const Prediction p = infer(backend, build_prompt(held_out), retry);
  return p.output == textdiff::trim(spec.demos[index].output);
}

CandidateOutcome predict_candidate(const core::SessionState& state, const Backend& backend,
                                   const core::Example& example, core::Rng& rng,
                                   std::size_t votes, const RetryPolicy& retry) {
  if (example.status != core::Status::Unlabeled)
    throw std::invalid_argument("candidate is not unlabeled: " + example.id);
  const PromptSpec spec = make_spec(state.demonstrations, example.input);
  CandidateOutcome outcome;
  // A single demo has only one ordering, so a vote could never disagree.
  if (!state.gate_open || spec.demos.size() < 2) {
    outcome.prediction = infer(backend, build_prompt(spec), retry);
    return outcome;
  }
  VoteResult vote = unanimity_vote(spec, backend, rng, votes, retry);
  outcome.pseudo_labeled = vote.unanimous;
  outcome.prediction = vote.best;
  outcome.vote = std::move(vote);
  return outcome;
}

MockTeacher::MockTeacher(const std::vector<Entry>& entries) {
  for (const auto& e : entries) by_input_.emplace(e.input, e);
}

Prediction MockTeacher::complete(const std::string& prompt) const {
  const ParsedPrompt parsed = parse_prompt(prompt);
  std::set<std::string> families;
  std::uint64_t order_hash = 0xcbf29ce484222325ULL;
  for (const auto& d : parsed.demos) {
    order_hash = fnv1a(d.input, order_hash);
    order_hash = fnv1a("\x1f", order_hash);
    if (auto it = by_input_.find(d.input); it != by_input_.end()) families.insert(it->second.family);
  }
  auto it = by_input_.find(parsed.query);
  if (it != by_input_.end() && families.count(it->second.family))
    return {it->second.gold, -0.5, id()};
  // Split votes resolve by logprob; keep it a deterministic function of the ordering.
  const double logprob = -1.0 - static_cast<double>(order_hash % 1000) / 100.0;
  return {"N/A*" + hex(order_hash), logprob, id()};
}

PerfectTeacher::PerfectTeacher(const std::vector<MockTeacher::Entry>& entries) {
  for (const auto& e : entries) gold_.emplace(e.input, e.gold);
}

Prediction PerfectTeacher::complete(const std::string& prompt) const {
  const ParsedPrompt parsed = parse_prompt(prompt);
  auto it = gold_.find(parsed.query);
  return {it == gold_.end() ? std::string(core::kNegativeOutput) : it->second, -0.1, id()};
}

std::string api_key_from_env() {
  for (const char* name : {"SHOTLIST_API_KEY", "OPENAI_API_KEY"})
    if (const char* v = std::getenv(name); v && *v) return v;
  return {};
}

}  // namespace shotlist::llmfn
