#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace aclear {

struct CompletionRequest {
  std::string model_name;
  std::string prompt;
  double temperature = 0.0;
};

/// Text-in, text-out model transport. Implementations must be safe to call
/// from several threads at once.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};

  /// Delay before retry number `retry` (1-based): base * 2^(retry-1), capped.
  std::chrono::milliseconds delay_for(int retry) const;
};

inline constexpr const char* kApiKeyEnvVar = "ACLEAR_API_KEY";
std::optional<std::string> api_key_from_env();

/// OpenAI-compatible chat-completions client. `endpoint` is the full URL of
/// the completions route, e.g. http://localhost:8000/v1/chat/completions.
///
/// 408/429/5xx and connection failures are retried with exponential backoff;
/// 401/403 raise AuthError; 413 or a context-length complaint raises
/// ContextOverflow; anything else raises TransportError immediately.
class HttpCompletionClient : public CompletionClient {
 public:
  HttpCompletionClient(std::string endpoint, std::optional<std::string> api_key, RetryPolicy retry = {},
                       std::chrono::seconds timeout = std::chrono::seconds(300));

  std::string complete(const CompletionRequest& request) override;

  /// Total HTTP attempts issued so far.
  std::size_t attempts() const noexcept { return attempts_.load(); }

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::optional<std::string> api_key_;
  RetryPolicy retry_;
  std::chrono::seconds timeout_;
  std::atomic<std::size_t> attempts_{0};
};

/// Content-addressed response cache in front of another client. Entries live
/// at <cache_dir>/<key[0:2]>/<key>.txt and are published by atomic rename.
class CachingCompletionClient : public CompletionClient {
 public:
  CachingCompletionClient(std::shared_ptr<CompletionClient> inner, std::filesystem::path cache_dir);

  std::string complete(const CompletionRequest& request) override;

  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }

  /// SHA-256 over (model_name, temperature, prompt).
  static std::string cache_key(const CompletionRequest& request);

 private:
  std::shared_ptr<CompletionClient> inner_;
  std::filesystem::path dir_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> temp_counter_{0};
};

std::string sha256_hex(std::string_view data);

}  // namespace aclear
