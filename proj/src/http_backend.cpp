#include <httplib.h>
#include <json.hpp>

#include <fstream>

#include "shotlist/llmfn.hpp"

namespace shotlist::llmfn {
namespace {

using nlohmann::json;

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto scheme = config_.base_url.find("://");
  if (scheme == std::string::npos)
    throw std::invalid_argument("base URL needs a scheme: " + config_.base_url);
  const auto slash = config_.base_url.find('/', scheme + 3);
  host_ = config_.base_url.substr(0, slash);
  path_prefix_ = slash == std::string::npos ? "/v1" : config_.base_url.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpBackend::request_body(const std::string& prompt) const {
  return json{{"model", config_.model},
              {"prompt", prompt},
              {"temperature", 0},
              {"max_tokens", config_.max_tokens},
              {"stop", {"\n"}},
              {"logprobs", 1}}
      .dump();
}

Prediction HttpBackend::parse_response(const std::string& body) const {
  try {
    const auto j = json::parse(body);
    const auto& choice = j.at("choices").at(0);
    Prediction p;
    p.output = choice.at("text").get<std::string>();
    p.backend_id = id();
    if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
      if (auto tl = lp->find("token_logprobs"); tl != lp->end() && tl->is_array()) {
        double total = 0;
        for (const auto& v : *tl)
          if (v.is_number()) total += v.get<double>();
        p.total_logprob = total;
      }
    }
    return p;
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
}

Prediction HttpBackend::complete(const std::string& prompt) const {
  httplib::Client client(host_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

  const std::string body = request_body(prompt);
  auto res = client.Post(path_prefix_ + "/completions", body, "application/json");

  if (config_.audit_log) {
    std::lock_guard lock(audit_mutex_);
    std::ofstream audit(*config_.audit_log, std::ios::app);
    json line = {{"ts_ms", now_ms()}, {"request", json::parse(body)}};
    if (res) {
      line["status"] = res->status;
      line["response"] = res->body;
    } else {
      line["error"] = httplib::to_string(res.error());
    }
    audit << line.dump() << '\n';
  }

  if (!res) throw TransientError("transport error: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransientError("HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  return parse_response(res->body);
}

}  // namespace shotlist::llmfn
