// Copyright 2026 The Mindloom Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mindloom/errors.hpp"

namespace mindloom {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};

  /// Wait after the `failed_attempts`-th failure (1-based). Non-decreasing
  /// in `failed_attempts` and capped at max_backoff.
  std::chrono::milliseconds Delay(int failed_attempts) const;
};

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct MockScript;

/// Where and how to reach one chat-completions service.
struct EndpointConfig {
  /// Short label used in reports ("gpt-4", "mentalglm-chat", "mock").
  std::string name;
  std::string base_url;
  std::string model;
  /// Name of the environment variable holding the API key. The key itself
  /// never enters this struct.
  std::string credential_env;
  DecodingParams decoding;
  int max_in_flight = 4;
  RetryPolicy retry;
  std::chrono::milliseconds timeout{60000};
  /// 0 disables client-side rate limiting.
  double requests_per_second = 0.0;
  std::string audit_log;
  bool store_prompts = false;
  /// Set when the config selects the in-process mock.
  std::shared_ptr<const MockScript> mock;

  /// Throws PreconditionError on invariant violations.
  void Validate() const;
  /// SHA-256 over the behavioural fields; stable across runs.
  std::string Hash() const;

  static EndpointConfig FromJson(std::string_view json_text, const std::string& origin = {});
  static EndpointConfig Load(const std::filesystem::path& path);
};

struct TokenUsage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
};

struct ChatRequest {
  std::string request_id;
  std::string model;
  std::string prompt;
  DecodingParams decoding;
  std::chrono::milliseconds timeout{60000};
};

/// Raw outcome of one HTTP exchange. status 0 means the request never got
/// an HTTP answer (connection failure or timeout).
struct ChatResponse {
  int status = 200;
  std::string text;
  std::string finish_reason;
  std::optional<TokenUsage> usage;
  std::string error;
};

/// Status codes sent to a MockEndpoint's caller for local failures that are
/// not HTTP statuses.
inline constexpr int kStatusMalformedResponse = -2;

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual ChatResponse Send(const ChatRequest& request) = 0;
};

struct Completion {
  std::string request_id;
  std::string text;
  std::string finish_reason;
  int attempts = 0;
  std::chrono::milliseconds latency{0};
  std::optional<TokenUsage> usage;
};

/// Rate limits, 5xx and transport failures are retried; other statuses are
/// fatal.
bool IsRetryableStatus(int status);

class TransportError : public Error {
 public:
  TransportError(const std::string& message, int last_status, int attempts);
  int last_status() const { return last_status_; }
  int attempts() const { return attempts_; }

 private:
  int last_status_;
  int attempts_;
};

/// Every key of a batch failed.
class BatchError : public Error {
 public:
  explicit BatchError(std::map<std::string, std::string> causes);
  const std::map<std::string, std::string>& causes() const { return causes_; }

 private:
  std::map<std::string, std::string> causes_;
};

/// Line-delimited request trace. Prompts are stored as SHA-256 unless
/// store_prompts is set; headers and credentials are never written.
class AuditLog {
 public:
  AuditLog(std::filesystem::path path, bool store_prompts);
  void Record(const ChatRequest& request, const ChatResponse& response, int attempt,
              std::chrono::milliseconds latency);

 private:
  std::mutex mu_;
  std::filesystem::path path_;
  bool store_prompts_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Client over any Endpoint. Copies share the rate limiter and audit log;
/// all methods are safe to call concurrently.
class GatewayClient {
 public:
  GatewayClient(EndpointConfig config, std::shared_ptr<Endpoint> endpoint,
                Sleeper sleeper = {});

  /// Retries retryable failures with exponential backoff up to
  /// retry.max_attempts; throws TransportError once they are exhausted or on
  /// the first fatal status.
  Completion Complete(std::string_view prompt, std::string request_id = {}) const;

  struct BatchResult {
    std::map<std::string, Completion> completions;
    std::map<std::string, std::string> failures;
  };
  using CompletionCallback = std::function<void(const std::string& id, const Completion&)>;

  /// At most max_in_flight requests are outstanding at any time. Per-key
  /// failures are collected; BatchError is thrown only if every key fails.
  /// `on_complete` runs serialized, once per successful key, as results
  /// arrive.
  BatchResult CompleteBatch(const std::vector<std::pair<std::string, std::string>>& prompts,
                            const CompletionCallback& on_complete = {}) const;

  const EndpointConfig& config() const { return config_; }

 private:
  struct Shared;
  EndpointConfig config_;
  std::shared_ptr<Endpoint> endpoint_;
  Sleeper sleeper_;
  std::shared_ptr<Shared> shared_;
};

/// Chat-completions over HTTP(S): POST {base_url}/chat/completions.
class HttpEndpoint : public Endpoint {
 public:
  explicit HttpEndpoint(const EndpointConfig& config);
  ChatResponse Send(const ChatRequest& request) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

/// HttpEndpoint or MockEndpoint depending on `config.mock`.
std::shared_ptr<Endpoint> MakeEndpoint(const EndpointConfig& config);

}  // namespace mindloom
