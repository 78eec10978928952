// Eigen (via service.hpp) must come before httplib, which pulls in <resolv.h>
// and its `_res` macro.
#include "shotlist/service.hpp"
#include "shotlist/serialize.hpp"

#include <httplib.h>

namespace shotlist::service {

using nlohmann::json;

namespace {

json error_body(const std::string& message, const std::vector<FieldError>& fields = {}) {
  json f = json::array();
  for (const auto& e : fields) f.push_back({{"field", e.field}, {"message", e.message}});
  return {{"error", message}, {"fields", f}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception&) {
    throw ServiceError(400, "request body is not valid JSON");
  }
}

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw ServiceError(400, std::string("missing string field \"") + key + "\"",
                       {{key, "required string"}});
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw ServiceError(400, std::string("\"") + key + "\" must be a string", {{key, "string"}});
  return it->get<std::string>();
}

json pool_result_json(const PoolResult& r) {
  json rejected = json::array();
  for (const auto& x : r.rejected) rejected.push_back({{"line", x.line}, {"reason", x.reason}});
  return {{"accepted", r.accepted}, {"rejected", rejected}};
}

}  // namespace

struct HttpServer::Impl {
  SessionService& service;
  Options options;
  httplib::Server server;

  Impl(SessionService& s, Options o) : service(s), options(std::move(o)) { routes(); }

  // Runs `fn`, mapping exceptions onto status codes.
  template <class Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const ServiceError& e) {
      send_json(res, e.status(), error_body(e.what(), e.fields()));
    } catch (const core::TransitionError& e) {
      send_json(res, 400, error_body(e.what()));
    } catch (const json::exception& e) {
      send_json(res, 400, error_body(e.what()));
    } catch (const std::invalid_argument& e) {
      send_json(res, 400, error_body(e.what()));
    } catch (const std::exception& e) {
      send_json(res, 500, error_body(e.what()));
    }
  }

  void routes() {
    if (options.bearer_token) {
      server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (req.path.rfind("/v1/", 0) != 0 || req.path == "/v1/health")
          return httplib::Server::HandlerResponse::Unhandled;
        if (req.get_header_value("Authorization") != "Bearer " + *options.bearer_token) {
          send_json(res, 401, error_body("missing or wrong bearer token"));
          return httplib::Server::HandlerResponse::Handled;
        }
        return httplib::Server::HandlerResponse::Unhandled;
      });
    }
    if (options.static_dir) server.set_mount_point("/", options.static_dir->string());

    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        std::vector<FieldError> errors;
        const auto cfg = parse_config(body.value("config", json(nullptr)), errors);
        std::string desc;
        if (auto d = body.find("task_description"); d != body.end() && d->is_string())
          desc = d->get<std::string>();
        else
          errors.push_back({"task_description", "required string"});
        for (auto& e : validate(cfg)) errors.push_back(std::move(e));
        if (!errors.empty()) throw ServiceError(400, "invalid session config", errors);
        send_json(res, 201, {{"session_id", service.create_session(desc, cfg)}});
      });
    });

    server.Get("/v1/sessions", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, {{"sessions", service.session_ids()}}); });
    });

    server.Get(R"(/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, service.session_json(req.matches[1])); });
    });

    server.Post(R"(/v1/sessions/([^/]+)/pool)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    send_json(res, 200, pool_result_json(service.add_pool(req.matches[1], req.body)));
                  });
                });

    server.Post(R"(/v1/sessions/([^/]+)/batch)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] { send_json(res, 200, to_json(service.next_batch(req.matches[1]))); });
                });

    server.Post(R"(/v1/sessions/([^/]+)/feedback)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    const json body = parse_body(req);
                    const auto batch_id = string_field(body, "batch_id");
                    std::vector<FeedbackItem> items;
                    for (const auto& it : body.value("items", json::array())) {
                      FeedbackItem item;
                      item.example_id = string_field(it, "example_id");
                      item.action = core::parse_action(string_field(it, "action"));
                      item.edited_output = optional_string(it, "edited_output");
                      items.push_back(std::move(item));
                    }
                    const auto s = service.submit_feedback(req.matches[1], batch_id, items);
                    send_json(res, 200,
                              {{"demo_count", s.demo_count},
                               {"gate_open", s.gate_open},
                               {"round_accuracy", s.round_accuracy},
                               {"iteration", s.iteration}});
                  });
                });

    server.Get(R"(/v1/sessions/([^/]+)/prompt)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   res.status = 200;
                   res.set_content(service.prompt(req.matches[1]), "text/plain; charset=utf-8");
                 });
               });

    server.Post(R"(/v1/sessions/([^/]+)/evaluate)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    send_json(res, 200, sim::to_json(service.evaluate(req.matches[1], req.body)));
                  });
                });

    server.Put(R"(/v1/sessions/([^/]+)/description)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   service.set_description(req.matches[1],
                                           string_field(parse_body(req), "task_description"));
                   send_json(res, 200, {{"ok", true}});
                 });
               });

    server.Post(R"(/v1/sessions/([^/]+)/demos)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    const json body = parse_body(req);
                    const auto polarity = body.value("polarity", std::string("positive"));
                    if (polarity != "positive" && polarity != "negative")
                      throw ServiceError(400, "polarity must be positive or negative",
                                         {{"polarity", "positive | negative"}});
                    service.add_demo(req.matches[1], string_field(body, "example_id"),
                                     polarity == "positive" ? core::Polarity::Positive
                                                            : core::Polarity::Negative,
                                     optional_string(body, "output"));
                    send_json(res, 201, {{"demo_count", service.state(req.matches[1]).demonstrations.size()}});
                  });
                });

    server.Put(R"(/v1/sessions/([^/]+)/demos/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   service.edit_demo(req.matches[1], req.matches[2],
                                     string_field(parse_body(req), "output"));
                   send_json(res, 200, {{"ok", true}});
                 });
               });

    server.Delete(R"(/v1/sessions/([^/]+)/demos/([^/]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
                    guarded(res, [&] {
                      service.remove_demo(req.matches[1], req.matches[2]);
                      send_json(res, 200, {{"demo_count", service.state(req.matches[1]).demonstrations.size()}});
                    });
                  });
  }
};

HttpServer::HttpServer(SessionService& service, Options options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpServer::bind_to_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace shotlist::service
