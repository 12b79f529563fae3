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

#include "mindloom/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"
#include "mindloom/hashing.hpp"
#include "mindloom/mock_endpoint.hpp"

namespace mindloom {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::chrono::milliseconds RetryPolicy::Delay(int failed_attempts) const {
  if (failed_attempts < 1) return std::chrono::milliseconds(0);
  const double raw = static_cast<double>(base_backoff.count()) *
                     std::pow(multiplier, static_cast<double>(failed_attempts - 1));
  const double capped = std::min(raw, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

void EndpointConfig::Validate() const {
  if (max_in_flight < 1) throw PreconditionError("max_in_flight must be >= 1");
  if (retry.max_attempts < 1) throw PreconditionError("retry.max_attempts must be >= 1");
  if (timeout.count() <= 0) throw PreconditionError("timeout must be > 0");
  if (retry.multiplier < 1.0) throw PreconditionError("retry.multiplier must be >= 1");
  if (retry.base_backoff.count() < 0 || retry.max_backoff.count() < 0) {
    throw PreconditionError("backoff durations must be >= 0");
  }
  if (requests_per_second < 0.0) throw PreconditionError("requests_per_second must be >= 0");
  if (!mock && base_url.empty()) throw PreconditionError("base_url is required");
}

std::string EndpointConfig::Hash() const {
  json node;
  node["name"] = name;
  node["base_url"] = base_url;
  node["model"] = model;
  node["temperature"] = decoding.temperature;
  node["max_tokens"] = decoding.max_tokens;
  if (mock) node["mock_rule"] = static_cast<int>(mock->rule);
  return Sha256Hex(node.dump());
}

EndpointConfig EndpointConfig::FromJson(std::string_view json_text, const std::string& origin) {
  EndpointConfig config;
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(origin, 0, "", e.what());
  }
  try {
    config.name = root.value("name", "");
    config.base_url = root.value("base_url", "");
    config.model = root.value("model", "");
    config.credential_env = root.value("credential_env", "");
    config.decoding.temperature = root.value("temperature", 0.0);
    config.decoding.max_tokens = root.value("max_tokens", 1024);
    config.max_in_flight = root.value("max_in_flight", 4);
    config.timeout = std::chrono::milliseconds(root.value("timeout_ms", 60000));
    config.requests_per_second = root.value("requests_per_second", 0.0);
    config.audit_log = root.value("audit_log", "");
    config.store_prompts = root.value("store_prompts", false);
    if (root.contains("retry")) {
      const auto& r = root["retry"];
      config.retry.max_attempts = r.value("max_attempts", 3);
      config.retry.base_backoff = std::chrono::milliseconds(r.value("base_backoff_ms", 500));
      config.retry.multiplier = r.value("multiplier", 2.0);
      config.retry.max_backoff = std::chrono::milliseconds(r.value("max_backoff_ms", 30000));
    }
    const std::string provider = root.value("provider", root.contains("mock") ? "mock" : "http");
    if (provider == "mock") {
      const json mock = root.value("mock", json::object());
      config.mock = std::make_shared<MockScript>(MockScript::FromJson(mock.dump(), origin));
      if (config.name.empty()) config.name = "mock";
    } else if (provider != "http") {
      throw FormatError(origin, 0, "provider", "must be 'http' or 'mock'");
    }
  } catch (const json::exception& e) {
    throw FormatError(origin, 0, "", std::string("bad endpoint config: ") + e.what());
  }
  if (config.name.empty()) config.name = config.model;
  config.Validate();
  return config;
}

EndpointConfig EndpointConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read endpoint config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromJson(buffer.str(), path.string());
}

bool IsRetryableStatus(int status) {
  return status == 0 || status == 408 || status == 429 || (status >= 500 && status <= 599);
}

TransportError::TransportError(const std::string& message, int last_status, int attempts)
    : Error(fmt::format("{} (last status {}, {} attempt{})", message, last_status, attempts,
                        attempts == 1 ? "" : "s")),
      last_status_(last_status),
      attempts_(attempts) {}

namespace {

std::string DescribeCauses(const std::map<std::string, std::string>& causes) {
  std::string out = fmt::format("all {} requests failed", causes.size());
  std::size_t shown = 0;
  for (const auto& [id, cause] : causes) {
    if (shown++ == 3) {
      out += "; ...";
      break;
    }
    out += "; " + id + ": " + cause;
  }
  return out;
}

}  // namespace

BatchError::BatchError(std::map<std::string, std::string> causes)
    : Error(DescribeCauses(causes)), causes_(std::move(causes)) {}

AuditLog::AuditLog(std::filesystem::path path, bool store_prompts)
    : path_(std::move(path)), store_prompts_(store_prompts) {}

void AuditLog::Record(const ChatRequest& request, const ChatResponse& response, int attempt,
                      std::chrono::milliseconds latency) {
  json line;
  line["request_id"] = request.request_id;
  line["model"] = request.model;
  if (store_prompts_) {
    line["prompt"] = request.prompt;
  } else {
    line["prompt_sha256"] = Sha256Hex(request.prompt);
  }
  line["attempt"] = attempt;
  line["status"] = response.status;
  line["latency_ms"] = latency.count();
  if (!response.finish_reason.empty()) line["finish_reason"] = response.finish_reason;
  if (!response.error.empty()) line["error"] = response.error;
  if (response.usage) {
    line["prompt_tokens"] = response.usage->prompt_tokens;
    line["completion_tokens"] = response.usage->completion_tokens;
  }
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to audit log " + path_.string());
  out << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
}

struct GatewayClient::Shared {
  std::mutex rate_mu;
  Clock::time_point next_slot{};
  std::unique_ptr<AuditLog> audit;
};

GatewayClient::GatewayClient(EndpointConfig config, std::shared_ptr<Endpoint> endpoint,
                             Sleeper sleeper)
    : config_(std::move(config)),
      endpoint_(std::move(endpoint)),
      sleeper_(std::move(sleeper)),
      shared_(std::make_shared<Shared>()) {
  config_.Validate();
  if (!endpoint_) throw PreconditionError("GatewayClient needs an endpoint");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!config_.audit_log.empty()) {
    shared_->audit = std::make_unique<AuditLog>(config_.audit_log, config_.store_prompts);
  }
}

Completion GatewayClient::Complete(std::string_view prompt, std::string request_id) const {
  ChatRequest request;
  request.request_id = std::move(request_id);
  request.model = config_.model;
  request.prompt = std::string(prompt);
  request.decoding = config_.decoding;
  request.timeout = config_.timeout;

  const auto started = Clock::now();
  ChatResponse response;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (config_.requests_per_second > 0.0) {
      const auto interval = std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(1.0 / config_.requests_per_second));
      Clock::duration wait{0};
      {
        std::lock_guard lock(shared_->rate_mu);
        const auto now = Clock::now();
        const auto slot = std::max(now, shared_->next_slot);
        wait = slot - now;
        shared_->next_slot = slot + interval;
      }
      if (wait > Clock::duration::zero()) {
        sleeper_(std::chrono::ceil<std::chrono::milliseconds>(wait));
      }
    }
    const auto attempt_start = Clock::now();
    response = endpoint_->Send(request);
    const auto attempt_latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - attempt_start);
    if (shared_->audit) shared_->audit->Record(request, response, attempt, attempt_latency);

    if (response.status == 200 && response.error.empty()) {
      Completion c;
      c.request_id = request.request_id;
      c.text = std::move(response.text);
      c.finish_reason = std::move(response.finish_reason);
      c.attempts = attempt;
      c.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
      c.usage = response.usage;
      return c;
    }
    const std::string what = response.error.empty() ? "request failed" : response.error;
    if (!IsRetryableStatus(response.status)) {
      throw TransportError("non-retryable failure: " + what, response.status, attempt);
    }
    if (attempt == config_.retry.max_attempts) {
      throw TransportError("retries exhausted: " + what, response.status, attempt);
    }
    sleeper_(config_.retry.Delay(attempt));
  }
  throw TransportError("retries exhausted", response.status, config_.retry.max_attempts);
}

GatewayClient::BatchResult GatewayClient::CompleteBatch(
    const std::vector<std::pair<std::string, std::string>>& prompts,
    const CompletionCallback& on_complete) const {
  if (prompts.empty()) throw PreconditionError("CompleteBatch needs at least one prompt");
  {
    std::vector<std::string> ids;
    for (const auto& p : prompts) ids.push_back(p.first);
    std::sort(ids.begin(), ids.end());
    if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
      throw PreconditionError("duplicate request id '" + *dup + "' in batch");
    }
  }

  BatchResult result;
  std::mutex result_mu;
  std::mutex callback_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= prompts.size()) return;
      const auto& [id, prompt] = prompts[i];
      try {
        Completion c = Complete(prompt, id);
        if (on_complete) {
          std::lock_guard lock(callback_mu);
          on_complete(id, c);
        }
        std::lock_guard lock(result_mu);
        result.completions.emplace(id, std::move(c));
      } catch (const TransportError& e) {
        std::lock_guard lock(result_mu);
        result.failures.emplace(id, e.what());
      } catch (...) {
        std::lock_guard lock(result_mu);
        if (!fatal) fatal = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.max_in_flight), prompts.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);
  if (result.completions.empty()) throw BatchError(std::move(result.failures));
  return result;
}

std::shared_ptr<Endpoint> MakeEndpoint(const EndpointConfig& config) {
  if (config.mock) return std::make_shared<MockEndpoint>(*config.mock);
  return std::make_shared<HttpEndpoint>(config);
}

}  // namespace mindloom
