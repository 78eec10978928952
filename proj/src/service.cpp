#include "shotlist/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "shotlist/serialize.hpp"

namespace shotlist::service {

namespace fs = std::filesystem;
using nlohmann::json;

// --- config -----------------------------------------------------------------

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out, std::vector<FieldError>& errors) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    errors.push_back({key, "wrong type"});
  }
}

void read_count(const json& j, const char* key, std::size_t& out, std::vector<FieldError>& errors) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    errors.push_back({key, "must be a non-negative integer"});
    return;
  }
  out = it->get<std::size_t>();
}

}  // namespace

SessionConfig parse_config(const json& j, std::vector<FieldError>& errors) {
  SessionConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) {
    errors.push_back({"config", "must be an object"});
    return c;
  }
  static const std::set<std::string> known = {
      "backend",        "task",          "batch_size", "clusters",  "min_slice_size",
      "gate_threshold", "slice_acc_stop", "max_demos", "max_presented",
      "consecutive_correct_stop", "votes", "filter_attempts", "seed"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) errors.push_back({k, "unknown field"});

  if (auto b = j.find("backend"); b != j.end()) {
    if (!b->is_object()) {
      errors.push_back({"backend", "must be an object"});
    } else {
      read_field(*b, "kind", c.backend.kind, errors);
      read_field(*b, "base_url", c.backend.base_url, errors);
      read_field(*b, "model", c.backend.model, errors);
      for (auto& e : errors)
        if (e.field == "kind" || e.field == "base_url" || e.field == "model")
          e.field = "backend." + e.field;
    }
  }
  if (auto t = j.find("task"); t != j.end()) {
    try {
      c.task = sim::parse_task(t->get<std::string>());
    } catch (const std::exception&) {
      errors.push_back({"task", "must be \"temporal\" or \"generic\""});
    }
  }
  read_count(j, "batch_size", c.batch_size, errors);
  read_count(j, "clusters", c.clusters, errors);
  read_count(j, "min_slice_size", c.min_slice_size, errors);
  read_field(j, "gate_threshold", c.gate_threshold, errors);
  read_field(j, "slice_acc_stop", c.slice_acc_stop, errors);
  read_count(j, "max_demos", c.max_demos, errors);
  read_count(j, "max_presented", c.max_presented, errors);
  read_count(j, "consecutive_correct_stop", c.consecutive_correct_stop, errors);
  read_count(j, "votes", c.votes, errors);
  read_count(j, "filter_attempts", c.filter_attempts, errors);
  read_field(j, "seed", c.seed, errors);
  return c;
}

std::vector<FieldError> validate(const SessionConfig& c) {
  std::vector<FieldError> e;
  if (c.backend.kind != "mock" && c.backend.kind != "perfect" && c.backend.kind != "http")
    e.push_back({"backend.kind", "must be one of mock, perfect, http"});
  if (c.backend.kind == "http" && c.backend.model.empty())
    e.push_back({"backend.model", "required for the http backend"});
  if (c.batch_size == 0) e.push_back({"batch_size", "must be positive"});
  if (c.clusters == 0) e.push_back({"clusters", "must be positive"});
  if (!(c.gate_threshold >= 0 && c.gate_threshold <= 1))
    e.push_back({"gate_threshold", "must be in [0, 1]"});
  if (!(c.slice_acc_stop > 0 && c.slice_acc_stop <= 1))
    e.push_back({"slice_acc_stop", "must be in (0, 1]"});
  if (c.max_demos == 0) e.push_back({"max_demos", "must be positive"});
  if (c.max_presented == 0) e.push_back({"max_presented", "must be positive"});
  if (c.consecutive_correct_stop == 0) e.push_back({"consecutive_correct_stop", "must be positive"});
  if (c.votes == 0) e.push_back({"votes", "must be positive"});
  if (c.filter_attempts < c.batch_size)
    e.push_back({"filter_attempts", "must be at least batch_size"});
  return e;
}

json to_json(const SessionConfig& c) {
  return {{"backend", {{"kind", c.backend.kind}, {"base_url", c.backend.base_url},
                       {"model", c.backend.model}}},
          {"task", sim::to_string(c.task)},
          {"batch_size", c.batch_size},
          {"clusters", c.clusters},
          {"min_slice_size", c.min_slice_size},
          {"gate_threshold", c.gate_threshold},
          {"slice_acc_stop", c.slice_acc_stop},
          {"max_demos", c.max_demos},
          {"max_presented", c.max_presented},
          {"consecutive_correct_stop", c.consecutive_correct_stop},
          {"votes", c.votes},
          {"filter_attempts", c.filter_attempts},
          {"seed", c.seed}};
}

// --- batch view -------------------------------------------------------------

namespace {

json spans_json(const std::vector<textdiff::CharSpan>& spans) {
  json out = json::array();
  for (const auto& s : spans) out.push_back({{"begin", s.begin}, {"end", s.end}, {"text", s.text}});
  return out;
}

std::vector<textdiff::CharSpan> spans_from(const json& j) {
  std::vector<textdiff::CharSpan> out;
  for (const auto& s : j)
    out.push_back({s.at("begin").get<std::size_t>(), s.at("end").get<std::size_t>(),
                   s.at("text").get<std::string>()});
  return out;
}

}  // namespace

json to_json(const BatchView& v) {
  json candidates = json::array();
  for (const auto& c : v.candidates)
    candidates.push_back({{"example_id", c.example_id},
                          {"input", c.input},
                          {"draft_output", c.draft_output},
                          {"slice_id", c.slice_id},
                          {"diff_spans",
                           {{"deleted", spans_json(c.diff_spans.deleted)},
                            {"added", spans_json(c.diff_spans.added)}}}});
  json table = json::array();
  for (const auto& r : v.slice_table) {
    json reward = r.reward.unexplored ? json("unexplored") : json(r.reward.value);
    table.push_back({{"slice_id", r.slice_id}, {"key", r.key}, {"n", r.n}, {"m", r.m},
                     {"k", r.k}, {"reward", reward}, {"solved", r.solved}});
  }
  return {{"batch_id", v.batch_id},       {"iteration", v.iteration},
          {"candidates", candidates},     {"slice_table", table},
          {"pseudo_labeled", v.pseudo_labeled}};
}

BatchView batch_from_json(const json& j) {
  BatchView v;
  v.batch_id = j.at("batch_id").get<std::string>();
  v.iteration = j.at("iteration").get<int>();
  for (const auto& c : j.at("candidates")) {
    CandidateView cv;
    cv.example_id = c.at("example_id").get<std::string>();
    cv.input = c.at("input").get<std::string>();
    cv.draft_output = c.at("draft_output").get<std::string>();
    cv.slice_id = c.at("slice_id").get<std::string>();
    cv.diff_spans.deleted = spans_from(c.at("diff_spans").at("deleted"));
    cv.diff_spans.added = spans_from(c.at("diff_spans").at("added"));
    v.candidates.push_back(std::move(cv));
  }
  for (const auto& r : j.at("slice_table")) {
    SliceRow row;
    row.slice_id = r.at("slice_id").get<std::string>();
    row.key = r.at("key").get<std::string>();
    row.n = r.at("n").get<std::size_t>();
    row.m = r.at("m").get<std::size_t>();
    row.k = r.at("k").get<std::size_t>();
    if (r.at("reward").is_string()) {
      row.reward = slicing::reward({row.n, 0, 0}, v.iteration);
    } else {
      row.reward.value = r.at("reward").get<double>();
    }
    row.solved = r.at("solved").get<bool>();
    v.slice_table.push_back(std::move(row));
  }
  v.pseudo_labeled = j.at("pseudo_labeled").get<std::vector<std::string>>();
  return v;
}

// --- backends ---------------------------------------------------------------

std::unique_ptr<llmfn::Backend> default_backend(const SessionConfig& config,
                                                const core::SessionState& state) {
  std::vector<llmfn::MockTeacher::Entry> entries;
  if (config.backend.kind != "http") {
    for (const auto& e : state.pool) {
      if (!e.gold_output) continue;
      auto fam = e.meta.find("family");
      entries.push_back({e.input, *e.gold_output, fam == e.meta.end() ? e.id : fam->second});
    }
  }
  if (config.backend.kind == "mock") return std::make_unique<llmfn::MockTeacher>(entries);
  if (config.backend.kind == "perfect") return std::make_unique<llmfn::PerfectTeacher>(entries);
  llmfn::HttpBackendConfig http;
  if (!config.backend.base_url.empty()) http.base_url = config.backend.base_url;
  http.model = config.backend.model;
  http.api_key = llmfn::api_key_from_env();
  return std::make_unique<llmfn::HttpBackend>(std::move(http));
}

// --- sessions ---------------------------------------------------------------

namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 gen(std::random_device{}());
  std::lock_guard lock(mu);
  std::ostringstream os;
  os << std::hex << gen();
  std::string s = os.str();
  return s.substr(0, std::min<std::size_t>(12, s.size()));
}

// Everything the journal determines.
struct SessionData {
  SessionConfig config;
  core::SessionState state;
  std::optional<BatchView> open_batch;
  std::set<std::string> closed_batches;
  std::uint64_t batches_issued = 0;
};

void apply_entry(SessionData& d, const json& entry) {
  const auto type = entry.at("type").get<std::string>();
  if (type == "session_created") {
    std::vector<FieldError> errors;
    d.config = parse_config(entry.at("config"), errors);
    if (!errors.empty()) throw std::invalid_argument("journal holds an invalid config");
    d.state = core::make_session(entry.at("task_description").get<std::string>(), d.config.seed,
                                 d.config.max_demos, d.config.gate_threshold);
  } else if (type == "batch_opened") {
    d.open_batch = batch_from_json(entry.at("batch"));
    ++d.batches_issued;
  } else if (type == "batch_closed") {
    d.closed_batches.insert(entry.at("batch_id").get<std::string>());
    d.open_batch.reset();
  } else {
    d.state = core::apply(std::move(d.state), entry.get<core::JournalEntry>());
  }
}

json core_entry(const core::JournalEntry& e) { return json(e); }

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) throw std::runtime_error("journal write failed");
    off += static_cast<std::size_t>(n);
  }
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw std::runtime_error("cannot write " + tmp.string());
  write_all(fd, content);
  ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, path);
}

struct LoadedJournal {
  std::vector<json> entries;  // committed entries in order
  std::uint64_t last_txn = 0;
  std::uintmax_t committed_bytes = 0;
};

LoadedJournal read_journal(const fs::path& path) {
  LoadedJournal out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<json> pending;
  std::uint64_t pending_txn = 0;  // 0: no open transaction
  std::string line;
  std::uintmax_t offset = 0;
  while (std::getline(in, line)) {
    const bool complete = !in.eof();
    offset += line.size() + (complete ? 1 : 0);
    if (!complete) break;  // torn tail
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      break;
    }
    const auto txn = j.at("txn").get<std::uint64_t>();
    if (pending_txn != 0 && pending_txn != txn) pending.clear();
    pending_txn = txn;
    if (j.value("commit", false)) {
      for (auto& e : pending) out.entries.push_back(std::move(e));
      pending.clear();
      pending_txn = 0;
      out.last_txn = txn;
      out.committed_bytes = offset;
    } else {
      pending.push_back(j.at("entry"));
    }
  }
  return out;
}

}  // namespace

struct SessionService::Session {
  std::string id;
  fs::path dir;
  SessionData data;
  std::uint64_t next_txn = 1;
  std::unique_ptr<slicing::TextCache> cache;
  std::mutex mu;

  // Validates `entries` against a copy, appends them to the journal as one
  // transaction, then swaps the copy in and rewrites the snapshot.
  void commit(const std::vector<json>& entries) {
    SessionData next = data;
    try {
      for (const auto& e : entries) apply_entry(next, e);
    } catch (const core::TransitionError& e) {
      throw ServiceError(400, e.what());
    }
    std::string block;
    for (const auto& e : entries) block += json{{"txn", next_txn}, {"entry", e}}.dump() + "\n";
    block += json{{"txn", next_txn}, {"commit", true}}.dump() + "\n";
    const fs::path journal = dir / "events.jsonl";
    const int fd = ::open(journal.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw std::runtime_error("cannot open " + journal.string());
    write_all(fd, block);
    ::fsync(fd);
    ::close(fd);
    ++next_txn;
    data = std::move(next);
    atomic_write(dir / "state.json", snapshot().dump(2) + "\n");
  }

  json snapshot() const {
    json batch = data.open_batch ? to_json(*data.open_batch) : json(nullptr);
    return {{"schema_version", core::kSchemaVersion},
            {"session_id", id},
            {"config", to_json(data.config)},
            {"state", data.state},
            {"open_batch", batch},
            {"closed_batches", data.closed_batches},
            {"batches_issued", data.batches_issued}};
  }
};

SessionService::SessionService(ServiceOptions options) : options_(std::move(options)) {
  if (options_.data_dir.empty()) throw std::invalid_argument("data_dir is required");
  fs::create_directories(options_.data_dir / "sessions");
  load_all();
}

SessionService::~SessionService() = default;

fs::path SessionService::session_dir(const std::string& id) const {
  return options_.data_dir / "sessions" / id;
}

void SessionService::load_all() {
  for (const auto& entry : fs::directory_iterator(options_.data_dir / "sessions")) {
    if (!entry.is_directory()) continue;
    const fs::path journal = entry.path() / "events.jsonl";
    if (!fs::exists(journal)) continue;
    auto s = std::make_shared<Session>();
    s->id = entry.path().filename().string();
    s->dir = entry.path();
    LoadedJournal loaded = read_journal(journal);
    if (loaded.entries.empty()) continue;
    if (fs::file_size(journal) != loaded.committed_bytes)
      fs::resize_file(journal, loaded.committed_bytes);
    for (const auto& e : loaded.entries) apply_entry(s->data, e);
    s->next_txn = loaded.last_txn + 1;
    s->cache = std::make_unique<slicing::TextCache>(annotator_, embedder_);
    atomic_write(s->dir / "state.json", s->snapshot().dump(2) + "\n");
    sessions_.emplace(s->id, std::move(s));
  }
}

std::shared_ptr<SessionService::Session> SessionService::get(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "session not found: " + id);
  return it->second;
}

std::string SessionService::create_session(const std::string& task_description,
                                           const SessionConfig& config) {
  auto errors = validate(config);
  if (textdiff::trim(task_description).empty())
    errors.push_back({"task_description", "must be non-empty"});
  else if (task_description.find('\n') != std::string::npos)
    errors.push_back({"task_description", "must be a single line"});
  if (!errors.empty()) throw ServiceError(400, "invalid session config", errors);

  auto s = std::make_shared<Session>();
  {
    std::unique_lock lock(sessions_mutex_);
    do s->id = new_session_id();
    while (sessions_.count(s->id) || fs::exists(session_dir(s->id)));
    s->dir = session_dir(s->id);
    fs::create_directories(s->dir);
    sessions_.emplace(s->id, s);
  }
  s->cache = std::make_unique<slicing::TextCache>(annotator_, embedder_);
  std::lock_guard lock(s->mu);
  s->commit({json{{"type", "session_created"},
                  {"session_id", s->id},
                  {"task_description", task_description},
                  {"config", to_json(config)}}});
  return s->id;
}

std::vector<std::string> SessionService::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

json SessionService::session_json(const std::string& id) const {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  return s->snapshot();
}

core::SessionState SessionService::state(const std::string& id) const {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  return s->data.state;
}

SessionConfig SessionService::config(const std::string& id) const {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  return s->data.config;
}

PoolResult SessionService::add_pool(const std::string& id, std::string_view jsonl) {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  auto parsed = data::parse_jsonl(jsonl);
  PoolResult result;
  result.rejected = std::move(parsed.rejected);

  // Line numbers of accepted records, to report pool-level rejections.
  std::vector<std::size_t> lines;
  {
    std::size_t line_no = 0, start = 0;
    std::set<std::size_t> bad;
    for (const auto& r : result.rejected) bad.insert(r.line);
    while (start < jsonl.size()) {
      auto nl = jsonl.find('\n', start);
      if (nl == std::string_view::npos) nl = jsonl.size();
      ++line_no;
      const auto line = jsonl.substr(start, nl - start);
      start = nl + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos || bad.count(line_no)) continue;
      lines.push_back(line_no);
    }
  }

  std::vector<json> entries;
  core::SessionState probe = s->data.state;
  for (std::size_t i = 0; i < parsed.accepted.size(); ++i) {
    const auto& r = parsed.accepted[i];
    try {
      probe.add_example(data::to_example(r));
      entries.push_back(core_entry(core::PoolAppend{data::to_example(r)}));
    } catch (const core::TransitionError& e) {
      result.rejected.push_back({lines[i], e.what()});
    }
  }
  std::sort(result.rejected.begin(), result.rejected.end(),
            [](const auto& a, const auto& b) { return a.line < b.line; });
  result.accepted = entries.size();
  if (!entries.empty()) s->commit(entries);
  return result;
}

BatchView SessionService::next_batch(const std::string& id) {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  if (s->data.open_batch) return *s->data.open_batch;

  const SessionConfig& cfg = s->data.config;
  core::SessionState work = s->data.state;
  if (work.pool.empty()) throw ServiceError(409, "the pool is empty");
  if (std::none_of(work.pool.begin(), work.pool.end(), slicing::is_eligible))
    throw ServiceError(409, "no unlabeled examples left in the pool");

  const auto backend = options_.backend_factory(cfg, work);
  BatchView view;
  view.batch_id = "b" + std::to_string(s->data.batches_issued + 1);
  view.iteration = work.iteration;
  std::vector<json> entries;
  try {
    const auto demo_verdicts = work.demonstrations.size() >= 2
                                   ? slicing::demo_verdicts(work.demonstrations, *backend,
                                                            options_.retry)
                                   : slicing::Verdicts{};
    const auto verdicts = slicing::collect_verdicts(work, demo_verdicts);
    const auto model =
        slicing::build_slice_model(work, verdicts, *s->cache, cfg.clusters, cfg.min_slice_size);
    for (std::size_t i = 0; i < model.slices.size(); ++i) {
      const auto& st = model.stats[i];
      view.slice_table.push_back(
          {model.slices[i].id, model.slices[i].key, st.n, st.m, st.k, model.rewards[i],
           st.m >= 1 && static_cast<double>(st.k) >= cfg.slice_acc_stop * static_cast<double>(st.m)});
    }

    core::Rng rng(cfg.seed ^ ((s->data.batches_issued + 1) * 0x9e3779b97f4a7c15ULL));
    slicing::SliceCursor cursor(model.slices, model.rewards, work);
    const bool filtering = work.gate_open;
    const std::size_t max_draws = filtering ? cfg.filter_attempts : cfg.batch_size;
    std::size_t draws = 0;
    while (view.candidates.size() < cfg.batch_size && draws < max_draws) {
      auto c = cursor.next(rng);
      if (!c) break;
      ++draws;
      const core::Example& ex = *work.find(c->example_id);
      const auto outcome =
          llmfn::predict_candidate(work, *backend, ex, rng, cfg.votes, options_.retry);
      if (outcome.pseudo_labeled) {
        work.record_pseudo_label(c->example_id, outcome.prediction.output);
        entries.push_back(
            core_entry(core::PseudoLabelRecorded{c->example_id, outcome.prediction.output}));
        view.pseudo_labeled.push_back(c->example_id);
        continue;
      }
      work.record_draft(c->example_id, outcome.prediction.output);
      entries.push_back(core_entry(core::DraftRecorded{c->example_id, outcome.prediction.output}));
      view.candidates.push_back({ex.id, ex.input, outcome.prediction.output, c->slice_id,
                                 textdiff::diff_spans(ex.input, outcome.prediction.output)});
    }
  } catch (const llmfn::BackendError& e) {
    throw ServiceError(502, std::string("backend failure: ") + e.what());
  }
  entries.push_back(json{{"type", "batch_opened"}, {"batch", to_json(view)}});
  s->commit(entries);
  return view;
}

FeedbackSummary SessionService::submit_feedback(const std::string& id, const std::string& batch_id,
                                                const std::vector<FeedbackItem>& items) {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  if (s->data.closed_batches.count(batch_id))
    throw ServiceError(409, "feedback for batch " + batch_id + " was already applied");
  if (!s->data.open_batch || s->data.open_batch->batch_id != batch_id)
    throw ServiceError(409, "stale batch id: " + batch_id);
  for (const auto& item : items)
    if (!s->data.state.find(item.example_id))
      throw ServiceError(400, "unknown example id: " + item.example_id);

  const BatchView& batch = *s->data.open_batch;
  core::SessionState work = s->data.state;
  std::vector<json> entries;
  auto apply = [&](core::FeedbackEvent ev) {
    try {
      work.apply(ev);
    } catch (const core::TransitionError& e) {
      throw ServiceError(400, e.what());
    }
    entries.push_back(core_entry(ev));
  };
  std::set<std::string> touched;
  for (const auto& item : items) {
    apply({work.iteration, item.example_id, item.action, item.edited_output, now_ms()});
    touched.insert(item.example_id);
  }
  // Implicit labeling: an untouched draft was accepted as is.
  for (const auto& c : batch.candidates)
    if (!touched.count(c.example_id)) apply({work.iteration, c.example_id, core::Action::NoChange,
                                             std::nullopt, now_ms()});

  std::size_t counted = batch.pseudo_labeled.size(), correct = batch.pseudo_labeled.size();
  for (const auto& c : batch.candidates) {
    const core::Example& ex = *work.find(c.example_id);
    if (ex.status == core::Status::Skipped) continue;
    ++counted;
    if (ex.output && ex.draft_output && *ex.output == *ex.draft_output) ++correct;
  }
  const double fraction =
      counted == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(counted);
  entries.push_back(core_entry(core::RoundClosed{fraction}));
  entries.push_back(json{{"type", "batch_closed"}, {"batch_id", batch_id}});
  s->commit(entries);
  return {s->data.state.demonstrations.size(), s->data.state.gate_open, fraction,
          s->data.state.iteration};
}

std::string SessionService::prompt(const std::string& id) const {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  return llmfn::render_function(s->data.state.demonstrations);
}

sim::EvalReport SessionService::evaluate(const std::string& id, std::string_view test_jsonl) {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  auto parsed = data::parse_jsonl(test_jsonl);
  if (!parsed.rejected.empty())
    throw ServiceError(400, "line " + std::to_string(parsed.rejected.front().line) + ": " +
                                parsed.rejected.front().reason);
  if (parsed.accepted.empty()) throw ServiceError(400, "test set is empty");
  for (const auto& r : parsed.accepted)
    if (!r.gold_output) throw ServiceError(400, "test record without gold_output: " + r.id);

  // The mock teachers need the test inputs too.
  core::SessionState view = s->data.state;
  for (const auto& r : parsed.accepted)
    if (!view.find(r.id)) view.pool.push_back(data::to_example(r));
  const auto backend = options_.backend_factory(s->data.config, view);
  try {
    return sim::evaluate(s->data.state.demonstrations, *backend, parsed.accepted,
                         s->data.config.task, options_.retry);
  } catch (const llmfn::BackendError& e) {
    throw ServiceError(502, std::string("backend failure: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ServiceError(400, e.what());
  }
}

void SessionService::add_demo(const std::string& id, const std::string& example_id,
                              core::Polarity polarity, std::optional<std::string> output) {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  if (!s->data.state.find(example_id)) throw ServiceError(400, "unknown example id: " + example_id);
  const auto action = polarity == core::Polarity::Positive ? core::Action::AddedPositive
                                                           : core::Action::AddedNegative;
  s->commit({core_entry(core::FeedbackEvent{s->data.state.iteration, example_id, action,
                                            std::move(output), now_ms()})});
}

void SessionService::edit_demo(const std::string& id, const std::string& example_id,
                               std::string output) {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  const auto* ex = s->data.state.find(example_id);
  if (!ex || !ex->is_demo()) throw ServiceError(404, "no demonstration for example " + example_id);
  s->commit({core_entry(core::FeedbackEvent{s->data.state.iteration, example_id,
                                            core::Action::EditedOutput, std::move(output),
                                            now_ms()})});
}

void SessionService::remove_demo(const std::string& id, const std::string& example_id) {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  const auto* ex = s->data.state.find(example_id);
  if (!ex || !ex->is_demo()) throw ServiceError(404, "no demonstration for example " + example_id);
  s->commit({core_entry(core::FeedbackEvent{s->data.state.iteration, example_id,
                                            core::Action::Removed, std::nullopt, now_ms()})});
}

void SessionService::set_description(const std::string& id, std::string task_description) {
  auto s = get(id);
  std::lock_guard lock(s->mu);
  s->commit({core_entry(core::DescriptionSet{std::move(task_description)})});
}

core::SessionState replay_journal(const fs::path& events_jsonl) {
  const LoadedJournal loaded = read_journal(events_jsonl);
  std::vector<core::JournalEntry> journal;
  core::SessionState initial;
  bool created = false;
  for (const auto& e : loaded.entries) {
    const auto type = e.at("type").get<std::string>();
    if (type == "session_created") {
      std::vector<FieldError> errors;
      const auto cfg = parse_config(e.at("config"), errors);
      initial = core::make_session(e.at("task_description").get<std::string>(), cfg.seed,
                                   cfg.max_demos, cfg.gate_threshold);
      created = true;
    } else if (type != "batch_opened" && type != "batch_closed") {
      journal.push_back(e.get<core::JournalEntry>());
    }
  }
  if (!created) throw std::invalid_argument("journal has no session_created entry");
  return core::replay(std::move(initial), journal);
}

}  // namespace shotlist::service
