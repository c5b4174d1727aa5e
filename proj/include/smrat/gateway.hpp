#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smrat/util.hpp"

namespace smrat {

struct ChatRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string request_tag;

  // prompt non-empty, 0 <= temperature <= 2, 1 <= max_tokens <= 32768.
  void check() const;
};

enum class FinishReason { kStop, kLength, kOther };
std::string to_string(FinishReason r);
FinishReason finish_reason_from_string(std::string_view s);

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total_tokens = 0;
};

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  Usage usage;
  bool cache_hit = false;

  Json to_json() const;  // cache_hit is a property of the lookup, not stored
  static ChatResponse from_json(const Json& j);
};

// SHA-256 over the canonical JSON of (model, prompt, temperature, max_tokens).
struct CacheKey {
  std::string digest;
  static CacheKey of(const ChatRequest& req);
};

enum class GatewayMode { kLive, kReplay, kRecord };
std::string to_string(GatewayMode m);
GatewayMode gateway_mode_from_string(std::string_view s);

class CacheMissError : public Error {
 public:
  explicit CacheMissError(const std::string& digest)
      : Error("cache miss for request digest " + digest), digest_(digest) {}
  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

// Rate limiting, 5xx, dropped connections: worth retrying.
class TransientError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  ProviderError(int status, const std::string& body)
      : Error("provider returned status " + std::to_string(status) + ": " + body), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class RetryExhaustedError : public Error {
 public:
  using Error::Error;
};

// Something that can actually answer a chat request.
class Transport {
 public:
  virtual ~Transport() = default;
  // Throws TransientError or ProviderError.
  virtual ChatResponse send(const ChatRequest& req) = 0;
};

// Content-addressed, append-only response store:
//   <root>/<first two hex>/<digest>.json  ->  {request, response, timestamp}
// The first write of a key wins; later writes are no-ops.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path path_for(const CacheKey& key) const;
  std::optional<ChatResponse> get(const CacheKey& key) const;
  // Returns false when the key already existed.
  bool put(const CacheKey& key, const ChatRequest& req, const ChatResponse& resp) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  std::chrono::milliseconds max_delay{32000};
  bool jitter = true;
};

class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  // `transport` may be null when only replay is used.
  Gateway(std::shared_ptr<Transport> transport, std::optional<ResponseCache> cache,
          RetryPolicy retry = {}, Sleeper sleeper = {});

  ChatResponse complete(const ChatRequest& req, GatewayMode mode) const;

  struct BatchResult {
    std::vector<std::optional<ChatResponse>> responses;  // request order
    std::vector<std::pair<size_t, std::string>> errors;  // (index, message), ascending
  };
  BatchResult batch_complete(const std::vector<ChatRequest>& requests, GatewayMode mode,
                             size_t concurrency_limit) const;

 private:
  ChatResponse call_with_retry(const ChatRequest& req) const;

  std::shared_ptr<Transport> transport_;
  std::optional<ResponseCache> cache_;
  RetryPolicy retry_;
  Sleeper sleeper_;
};

// OpenAI-style chat-completions over HTTP(S). The whole prompt goes out as a
// single user message.
struct HttpTransportConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key;
  std::chrono::seconds timeout{120};
};

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(HttpTransportConfig config);
  ChatResponse send(const ChatRequest& req) override;

  static Json request_body(const ChatRequest& req);
  // Maps a provider reply (status + body) to a response or the right error.
  static ChatResponse parse_reply(int status, const std::string& body);

 private:
  HttpTransportConfig config_;
};

}  // namespace smrat
