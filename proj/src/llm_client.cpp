#include "aclear/llm_client.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "aclear/error.hpp"
#include "aclear/zip.hpp"

namespace aclear {

using Json = nlohmann::json;

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  auto delay = base_delay;
  for (int i = 1; i < retry && delay < max_delay; ++i) delay *= 2;
  return std::min(delay, max_delay);
}

std::optional<std::string> api_key_from_env() {
  const char* value = std::getenv(kApiKeyEnvVar);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

HttpCompletionClient::HttpCompletionClient(std::string endpoint, std::optional<std::string> api_key,
                                           RetryPolicy retry, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), retry_(retry), timeout_(timeout) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorCode::ConfigInvalid, "endpoint '" + endpoint + "' has no scheme");
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = endpoint;
    path_ = "/";
  } else {
    scheme_host_port_ = endpoint.substr(0, path_start);
    path_ = endpoint.substr(path_start);
  }
}

namespace {

bool mentions_context_limit(const std::string& body) {
  std::string lower(body);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const char* needle : {"context_length", "context length", "maximum context", "too many tokens", "prompt is too long"}) {
    if (lower.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string extract_completion(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::TransportError, "response is not JSON");
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty())
    throw Error(ErrorCode::TransportError, "response has no choices");
  const Json& first = (*choices)[0];
  if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
    auto content = msg->find("content");
    if (content != msg->end() && content->is_string()) return content->get<std::string>();
  }
  if (auto text = first.find("text"); text != first.end() && text->is_string()) return text->get<std::string>();
  throw Error(ErrorCode::TransportError, "response choice has no text content");
}

}  // namespace

std::string HttpCompletionClient::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw Error(ErrorCode::PreconditionViolation, "empty prompt");
  Json payload{{"model", request.model_name},
               {"temperature", request.temperature},
               {"messages", Json::array({Json{{"role", "user"}, {"content", request.prompt}}})}};
  const std::string body = payload.dump();

  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

  std::string last_error;
  for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(retry_.delay_for(attempt));
    ++attempts_;
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
      last_error = "connection failed: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status >= 200 && status < 300) return extract_completion(result->body);
    if (status == 401 || status == 403)
      throw Error(ErrorCode::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    if (status == 413 || (status == 400 && mentions_context_limit(result->body)))
      throw Error(ErrorCode::ContextOverflow, "prompt exceeds model context (HTTP " + std::to_string(status) + ")");
    last_error = "HTTP " + std::to_string(status);
    if (status == 408 || status == 429 || status >= 500) continue;
    throw Error(ErrorCode::TransportError, last_error + ": " + result->body.substr(0, 200));
  }
  throw Error(ErrorCode::TransportError,
              "giving up after " + std::to_string(retry_.max_retries + 1) + " attempts, last error: " + last_error);
}

CachingCompletionClient::CachingCompletionClient(std::shared_ptr<CompletionClient> inner,
                                                 std::filesystem::path cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {}

std::string CachingCompletionClient::cache_key(const CompletionRequest& request) {
  char temperature[32];
  std::snprintf(temperature, sizeof(temperature), "%.6f", request.temperature);
  std::string material = request.model_name;
  material.push_back('\0');
  material += temperature;
  material.push_back('\0');
  material += request.prompt;
  return sha256_hex(material);
}

std::string CachingCompletionClient::complete(const CompletionRequest& request) {
  const std::string key = cache_key(request);
  const auto path = dir_ / key.substr(0, 2) / (key + ".txt");
  std::error_code ec;
  if (std::filesystem::is_regular_file(path, ec)) {
    ++hits_;
    return read_file_bytes(path);
  }
  ++misses_;
  std::string response = inner_->complete(request);
  std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp" + std::to_string(temp_counter_.fetch_add(1)) + "-" +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  write_file_bytes(tmp, response);
  std::filesystem::rename(tmp, path, ec);
  if (ec) std::filesystem::remove(tmp, ec);
  return response;
}

}  // namespace aclear
