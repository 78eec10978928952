#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include "shotlist/serialize.hpp"
#include "shotlist/service.hpp"

// After Eigen-dependent headers: httplib pulls in <resolv.h>.
#include <httplib.h>

using namespace shotlist;
using namespace shotlist::service;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "shotlist_svc_XXXXXX").string();
    path = ::mkdtemp(tmpl.data());
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

const sim::SyntheticData& fixture() {
  static const sim::SyntheticData d =
      sim::generate_synthetic_pool({sim::default_synthetic_spec().families, 60, 10}, 5);
  return d;
}

std::string gold_of(const std::string& id) {
  for (const auto& r : fixture().pool)
    if (r.id == id) return *r.gold_output;
  throw std::runtime_error("no such id");
}

std::string new_session(SessionService& svc, SessionConfig cfg = {}) {
  const auto id = svc.create_session(sim::kTemporalDescription, cfg);
  const auto added = svc.add_pool(id, data::to_jsonl(fixture().pool));
  REQUIRE(added.accepted == 60);
  return id;
}

// Corrects every candidate to its gold and adds it as a demonstration.
std::vector<FeedbackItem> teach_all(const BatchView& b) {
  std::vector<FeedbackItem> items;
  for (const auto& c : b.candidates) {
    const auto gold = gold_of(c.example_id);
    if (c.draft_output == gold) {
      items.push_back({c.example_id, core::Action::NoChange, std::nullopt});
      continue;
    }
    items.push_back({c.example_id, core::Action::EditedOutput, gold});
    if (gold == "N/A")
      items.push_back({c.example_id, core::Action::AddedNegative, std::nullopt});
    else
      items.push_back({c.example_id, core::Action::AddedPositive, std::nullopt});
  }
  return items;
}

int status_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

class FailingBackend final : public llmfn::Backend {
 public:
  llmfn::Prediction complete(const std::string&) const override {
    throw llmfn::BackendError("down");
  }
  std::string id() const override { return "failing"; }
};

}  // namespace

TEST_CASE("config parsing reports field errors") {
  std::vector<FieldError> errors;
  const auto cfg = parse_config(json{{"batch_size", 7}, {"seed", 3}}, errors);
  CHECK(errors.empty());
  CHECK(cfg.batch_size == 7);
  CHECK(cfg.seed == 3);
  CHECK(parse_config(to_json(cfg), errors) == cfg);

  errors.clear();
  parse_config(json{{"batch_size", "five"}, {"bogus", 1}}, errors);
  std::set<std::string> fields;
  for (const auto& e : errors) fields.insert(e.field);
  CHECK(fields.count("batch_size"));
  CHECK(fields.count("bogus"));

  SessionConfig bad;
  bad.batch_size = 0;
  bad.gate_threshold = 1.5;
  bad.backend.kind = "psychic";
  CHECK(validate(bad).size() >= 3);
}

TEST_CASE("session lifecycle") {
  TempDir dir;
  SessionService svc({dir.path});
  CHECK(status_of([&] { svc.create_session("", {}); }) == 400);
  CHECK(status_of([&] { svc.create_session("two\nlines", {}); }) == 400);
  SessionConfig bad;
  bad.max_demos = 0;
  CHECK(status_of([&] { svc.create_session("ok", bad); }) == 400);

  const auto id = svc.create_session(sim::kTemporalDescription, {});
  CHECK(svc.session_ids() == std::vector<std::string>{id});
  CHECK(status_of([&] { svc.state("nope"); }) == 404);
  CHECK(status_of([&] { svc.next_batch(id); }) == 409);

  const auto added = svc.add_pool(id, data::to_jsonl(fixture().pool) + "{broken\n");
  CHECK(added.accepted == 60);
  REQUIRE(added.rejected.size() == 1);
  CHECK(added.rejected[0].line == 61);
  // Re-uploading the same ids is rejected line by line.
  const auto again = svc.add_pool(id, data::to_jsonl({fixture().pool[0]}));
  CHECK(again.accepted == 0);
  CHECK(again.rejected.size() == 1);

  const auto b1 = svc.next_batch(id);
  CHECK(b1.candidates.size() == 5);
  CHECK(b1.iteration == 1);
  CHECK_FALSE(b1.slice_table.empty());
  // An open batch is handed out again unchanged.
  CHECK(to_json(svc.next_batch(id)) == to_json(b1));
  CHECK(batch_from_json(to_json(b1)).batch_id == b1.batch_id);

  CHECK(status_of([&] { svc.submit_feedback(id, "bogus", {}); }) == 409);
  CHECK(status_of([&] {
          svc.submit_feedback(id, b1.batch_id, {{"p9999", core::Action::NoChange, std::nullopt}});
        }) == 400);

  const auto before = svc.state(id);
  const auto summary = svc.submit_feedback(id, b1.batch_id, teach_all(b1));
  CHECK(summary.iteration == 2);
  CHECK(summary.demo_count >= 1);
  CHECK(svc.state(id).events.size() > before.events.size());
  // The same batch cannot be applied twice.
  CHECK(status_of([&] { svc.submit_feedback(id, b1.batch_id, teach_all(b1)); }) == 409);

  const auto b2 = svc.next_batch(id);
  CHECK(b2.batch_id != b1.batch_id);
  CHECK(b2.iteration == 2);
  for (const auto& c : b2.candidates)
    for (const auto& o : b1.candidates) CHECK(c.example_id != o.example_id);
}

TEST_CASE("untouched candidates count as accepted") {
  TempDir dir;
  SessionService svc({dir.path});
  const auto id = new_session(svc);
  const auto b = svc.next_batch(id);
  const auto s = svc.submit_feedback(id, b.batch_id, {});
  CHECK(s.round_accuracy == 1.0);
  for (const auto& c : b.candidates) {
    const auto* ex = svc.state(id).find(c.example_id);
    CHECK(ex->status == core::Status::ImplicitCorrect);
    CHECK(ex->output == ex->draft_output);
  }
}

TEST_CASE("restart reloads sessions from the journal") {
  TempDir dir;
  std::string id;
  json snapshot;
  {
    SessionService svc({dir.path});
    id = new_session(svc);
    for (int round = 0; round < 3; ++round) {
      const auto b = svc.next_batch(id);
      svc.submit_feedback(id, b.batch_id, teach_all(b));
    }
    svc.next_batch(id);  // leave one batch open
    snapshot = svc.session_json(id);
  }
  SessionService reloaded({dir.path});
  CHECK(reloaded.session_json(id) == snapshot);
  CHECK(replay_journal(reloaded.session_dir(id) / "events.jsonl") == reloaded.state(id));
}

TEST_CASE("a torn journal tail is dropped") {
  TempDir dir;
  std::string id;
  json snapshot;
  {
    SessionService svc({dir.path});
    id = new_session(svc);
    snapshot = svc.session_json(id);
  }
  const auto journal = dir.path / "sessions" / id / "events.jsonl";
  {
    std::ofstream out(journal, std::ios::app);
    out << R"({"txn":999,"entry":{"type":"round","correct_fraction":1.0}})" << "\n{\"txn\":99";
  }
  SessionService reloaded({dir.path});
  CHECK(reloaded.session_json(id) == snapshot);
  CHECK(reloaded.state(id).iteration == 1);
}

TEST_CASE("backend failures leave the session untouched") {
  TempDir dir;
  ServiceOptions opts{dir.path};
  opts.backend_factory = [](const SessionConfig&, const core::SessionState&) {
    return std::make_unique<FailingBackend>();
  };
  opts.retry.attempts = 1;
  SessionService svc(opts);
  const auto id = new_session(svc);
  const auto before = svc.session_json(id);
  CHECK(status_of([&] { svc.next_batch(id); }) == 502);
  CHECK(svc.session_json(id) == before);
}

TEST_CASE("demonstration management and prompt") {
  TempDir dir;
  SessionService svc({dir.path});
  const auto id = new_session(svc);
  const auto& p0 = fixture().pool[0];
  svc.add_demo(id, p0.id, core::Polarity::Positive, std::string("x == 2000-01-01"));
  CHECK(svc.state(id).demonstrations.size() == 1);
  CHECK(svc.prompt(id) == std::string(sim::kTemporalDescription) + "\n>> " + p0.input +
                              " => x == 2000-01-01");
  svc.edit_demo(id, p0.id, "N/A");
  CHECK(svc.state(id).demonstrations.demos[0].polarity == core::Polarity::Negative);
  svc.set_description(id, "New description");
  CHECK(svc.prompt(id).rfind("New description\n", 0) == 0);
  CHECK(status_of([&] { svc.set_description(id, ""); }) == 400);
  svc.remove_demo(id, p0.id);
  CHECK(svc.state(id).demonstrations.size() == 0);
  CHECK(status_of([&] { svc.remove_demo(id, p0.id); }) == 404);
  CHECK(status_of([&] { svc.add_demo(id, "missing", core::Polarity::Positive, std::nullopt); }) ==
        400);
  CHECK(replay_journal(svc.session_dir(id) / "events.jsonl") == svc.state(id));
}

TEST_CASE("evaluate") {
  TempDir dir;
  SessionService svc({dir.path});
  SessionConfig cfg;
  cfg.backend.kind = "perfect";
  const auto id = new_session(svc, cfg);
  const auto report = svc.evaluate(id, data::to_jsonl(fixture().test));
  CHECK(report.summary.count == 10);
  CHECK(report.summary.exact_match == 1.0);
  CHECK(status_of([&] { svc.evaluate(id, ""); }) == 400);
  CHECK(status_of([&] { svc.evaluate(id, "{oops\n"); }) == 400);
  CHECK(status_of([&] { svc.evaluate(id, R"({"id":"z","input":"no gold"})"); }) == 400);
}

TEST_CASE("http endpoints") {
  TempDir dir;
  SessionService svc({dir.path});
  HttpServer server(svc, {std::string("secret"), std::nullopt});
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client anon("127.0.0.1", port);
  CHECK(anon.Get("/v1/health")->status == 200);
  CHECK(anon.Get("/v1/sessions")->status == 401);

  httplib::Client c("127.0.0.1", port);
  c.set_bearer_token_auth("secret");

  auto bad = c.Post("/v1/sessions", json{{"config", {{"batch_size", -1}}}}.dump(), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  const auto bad_body = json::parse(bad->body);
  CHECK(bad_body.at("fields").size() >= 2);

  auto created = c.Post("/v1/sessions",
                        json{{"task_description", sim::kTemporalDescription}}.dump(),
                        "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const auto id = json::parse(created->body).at("session_id").get<std::string>();
  const std::string base = "/v1/sessions/" + id;

  auto pool = c.Post(base + "/pool", data::to_jsonl(fixture().pool), "application/x-ndjson");
  CHECK(json::parse(pool->body).at("accepted") == 60);

  auto batch = c.Post(base + "/batch", "", "application/json");
  REQUIRE(batch->status == 200);
  const auto view = batch_from_json(json::parse(batch->body));
  CHECK(view.candidates.size() == 5);

  json items = json::array();
  for (const auto& it : teach_all(view)) {
    json j = {{"example_id", it.example_id}, {"action", core::to_string(it.action)}};
    if (it.edited_output) j["edited_output"] = *it.edited_output;
    items.push_back(j);
  }
  const auto fb_body = json{{"batch_id", view.batch_id}, {"items", items}}.dump();
  auto fb = c.Post(base + "/feedback", fb_body, "application/json");
  REQUIRE(fb->status == 200);
  CHECK(json::parse(fb->body).at("iteration") == 2);
  CHECK(c.Post(base + "/feedback", fb_body, "application/json")->status == 409);
  CHECK(c.Post(base + "/feedback", "{", "application/json")->status == 400);
  CHECK(c.Post(base + "/feedback",
               json{{"batch_id", "x"}, {"items", {{{"example_id", "p0000"}, {"action", "Dance"}}}}}.dump(),
               "application/json")
            ->status == 400);

  auto prompt = c.Get(base + "/prompt");
  CHECK(prompt->status == 200);
  CHECK(prompt->body == svc.prompt(id));

  CHECK(c.Put(base + "/description", json{{"task_description", "Dates."}}.dump(),
              "application/json")->status == 200);
  const core::Example* last = nullptr;
  const auto live = svc.state(id);
  for (const auto& e : live.pool)
    if (e.status == core::Status::Unlabeled) last = &e;
  REQUIRE(last);
  auto added = c.Post(base + "/demos", json{{"example_id", last->id}, {"polarity", "negative"}}.dump(),
                      "application/json");
  INFO(added->body);
  CHECK(added->status == 201);
  CHECK(c.Put(base + "/demos/" + last->id, json{{"output", "x == 2001-02-03"}}.dump(),
              "application/json")->status == 200);
  CHECK(c.Delete(base + "/demos/" + last->id)->status == 200);
  CHECK(c.Delete(base + "/demos/" + last->id)->status == 404);

  auto ev = c.Post(base + "/evaluate", data::to_jsonl(fixture().test), "application/x-ndjson");
  CHECK(ev->status == 200);
  CHECK(json::parse(ev->body).contains("summary"));

  auto got = c.Get(base);
  CHECK(got->status == 200);
  CHECK(json::parse(got->body) == svc.session_json(id));
  CHECK(c.Get("/v1/sessions/missing")->status == 404);

  server.stop();
  t.join();
}
