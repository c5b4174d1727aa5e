#include "httplib.h"
#include "smrat/gateway.hpp"

namespace smrat {

HttpTransport::HttpTransport(HttpTransportConfig config) : config_(std::move(config)) {
  if (config_.endpoint.find("://") == std::string::npos) {
    throw Error("endpoint must be an absolute URL: " + config_.endpoint);
  }
}

Json HttpTransport::request_body(const ChatRequest& req) {
  return {{"model", req.model},
          {"messages", Json::array({{{"role", "user"}, {"content", req.prompt}}})},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens}};
}

ChatResponse HttpTransport::parse_reply(int status, const std::string& body) {
  if (status == 429 || status >= 500) {
    throw TransientError("provider status " + std::to_string(status));
  }
  if (status != 200) throw ProviderError(status, body.substr(0, 512));
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::parse_error&) {
    throw ProviderError(status, "unparseable body");
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw ProviderError(status, "reply has no choices");
  }
  const Json& c = (*choices)[0];
  ChatResponse r;
  if (auto msg = c.find("message"); msg != c.end() && msg->contains("content") && (*msg)["content"].is_string()) {
    r.text = (*msg)["content"].get<std::string>();
  }
  r.finish_reason = c.contains("finish_reason") && c["finish_reason"].is_string()
                        ? finish_reason_from_string(c["finish_reason"].get<std::string>())
                        : FinishReason::kOther;
  if (r.text.empty() && r.finish_reason == FinishReason::kStop) {
    throw ProviderError(status, "empty completion with finish_reason stop");
  }
  if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
    r.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
    r.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
    r.usage.total_tokens = u->value("total_tokens", std::int64_t{0});
  }
  return r;
}

ChatResponse HttpTransport::send(const ChatRequest& req) {
  const auto scheme_end = config_.endpoint.find("://");
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  const std::string base = config_.endpoint.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);

  httplib::Client client(base);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = client.Post(path, headers, request_body(req).dump(), "application/json");
  if (!res) throw TransientError("transport error: " + httplib::to_string(res.error()));
  return parse_reply(res->status, res->body);
}

}  // namespace smrat
