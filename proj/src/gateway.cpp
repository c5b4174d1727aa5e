#include "smrat/gateway.hpp"

#include <atomic>
#include <ctime>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>
#include <unistd.h>

namespace smrat {

void ChatRequest::check() const {
  if (prompt.empty()) throw Error("chat request has an empty prompt");
  if (model.empty()) throw Error("chat request has no model id");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error("temperature must lie in [0, 2], got " + std::to_string(temperature));
  }
  if (max_tokens < 1 || max_tokens > 32768) {
    throw Error("max_tokens must lie in [1, 32768], got " + std::to_string(max_tokens));
  }
}

std::string to_string(FinishReason r) {
  switch (r) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kOther: return "other";
  }
  return "other";
}

FinishReason finish_reason_from_string(std::string_view s) {
  if (s == "stop") return FinishReason::kStop;
  if (s == "length") return FinishReason::kLength;
  return FinishReason::kOther;
}

Json ChatResponse::to_json() const {
  return {{"text", text},
          {"finish_reason", to_string(finish_reason)},
          {"usage",
           {{"prompt_tokens", usage.prompt_tokens},
            {"completion_tokens", usage.completion_tokens},
            {"total_tokens", usage.total_tokens}}}};
}

ChatResponse ChatResponse::from_json(const Json& j) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  r.finish_reason = finish_reason_from_string(j.value("finish_reason", "other"));
  if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
    r.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
    r.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
    r.usage.total_tokens = u->value("total_tokens", std::int64_t{0});
  }
  return r;
}

CacheKey CacheKey::of(const ChatRequest& req) {
  const Json key = {{"model", req.model},
                    {"prompt", req.prompt},
                    {"temperature", req.temperature},
                    {"max_tokens", req.max_tokens}};
  return {util::sha256_hex(util::canonical_json(key))};
}

std::string to_string(GatewayMode m) {
  switch (m) {
    case GatewayMode::kLive: return "live";
    case GatewayMode::kReplay: return "replay";
    case GatewayMode::kRecord: return "record";
  }
  return "replay";
}

GatewayMode gateway_mode_from_string(std::string_view s) {
  if (s == "live") return GatewayMode::kLive;
  if (s == "replay") return GatewayMode::kReplay;
  if (s == "record") return GatewayMode::kRecord;
  throw Error("unknown gateway mode '" + std::string(s) + "' (expected live, replay or record)");
}

std::filesystem::path ResponseCache::path_for(const CacheKey& key) const {
  if (key.digest.size() < 2) throw Error("malformed cache key");
  return root_ / key.digest.substr(0, 2) / (key.digest + ".json");
}

std::optional<ChatResponse> ResponseCache::get(const CacheKey& key) const {
  const auto path = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  Json j;
  try {
    j = Json::parse(util::read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error("corrupt cache entry " + path.string() + ": " + e.what());
  }
  ChatResponse r = ChatResponse::from_json(j.at("response"));
  r.cache_hit = true;
  return r;
}

namespace {
std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}
}  // namespace

bool ResponseCache::put(const CacheKey& key, const ChatRequest& req, const ChatResponse& resp) const {
  namespace fs = std::filesystem;
  const auto path = path_for(key);
  if (fs::exists(path)) return false;
  const Json entry = {{"request",
                       {{"model", req.model},
                        {"prompt", req.prompt},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_tokens},
                        {"request_tag", req.request_tag},
                        {"message_layout", "single_user_message"}}},
                      {"response", resp.to_json()},
                      {"timestamp", utc_timestamp()}};
  fs::create_directories(path.parent_path());
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << entry.dump(1) << '\n';
  }
  // link() refuses to replace an existing name, which gives first-write-wins
  // even between processes.
  std::error_code ec;
  fs::create_hard_link(tmp, path, ec);
  fs::remove(tmp);
  if (ec) {
    if (fs::exists(path)) return false;
    throw Error("cannot publish cache entry " + path.string() + ": " + ec.message());
  }
  return true;
}

Gateway::Gateway(std::shared_ptr<Transport> transport, std::optional<ResponseCache> cache,
                 RetryPolicy retry, Sleeper sleeper)
    : transport_(std::move(transport)),
      cache_(std::move(cache)),
      retry_(retry),
      sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatResponse Gateway::call_with_retry(const ChatRequest& req) const {
  if (!transport_) throw Error("no transport configured for live requests");
  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  std::string last_error;
  for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
    try {
      ChatResponse r = transport_->send(req);
      r.cache_hit = false;
      return r;
    } catch (const TransientError& e) {
      last_error = e.what();
    }
    if (attempt + 1 == retry_.max_attempts) break;
    auto delay = retry_.base_delay * (std::int64_t{1} << std::min(attempt, 20));
    delay = std::min(delay, retry_.max_delay);
    if (retry_.jitter && delay.count() > 0) {
      delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(util::uniform_below(jitter_rng, static_cast<std::uint64_t>(delay.count()) + 1)));
    }
    sleeper_(delay);
  }
  throw RetryExhaustedError("gave up after " + std::to_string(retry_.max_attempts) +
                            " attempts: " + last_error);
}

ChatResponse Gateway::complete(const ChatRequest& req, GatewayMode mode) const {
  req.check();
  const CacheKey key = CacheKey::of(req);
  switch (mode) {
    case GatewayMode::kReplay: {
      if (!cache_) throw Error("replay mode needs a response cache");
      if (auto hit = cache_->get(key)) return *hit;
      throw CacheMissError(key.digest);
    }
    case GatewayMode::kRecord: {
      if (!cache_) throw Error("record mode needs a response cache");
      if (auto hit = cache_->get(key)) return *hit;
      ChatResponse r = call_with_retry(req);
      cache_->put(key, req, r);
      return r;
    }
    case GatewayMode::kLive:
      return call_with_retry(req);
  }
  throw Error("unreachable gateway mode");
}

Gateway::BatchResult Gateway::batch_complete(const std::vector<ChatRequest>& requests, GatewayMode mode,
                                             size_t concurrency_limit) const {
  if (concurrency_limit < 1) throw Error("concurrency limit must be at least 1");
  BatchResult out;
  out.responses.resize(requests.size());
  std::vector<std::optional<std::string>> errors(requests.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
      try {
        out.responses[i] = complete(requests[i], mode);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const size_t n_workers = std::min(concurrency_limit, requests.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) out.errors.emplace_back(i, *errors[i]);
  }
  return out;
}

}  // namespace smrat
