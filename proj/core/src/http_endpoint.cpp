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

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mindloom/gateway.hpp"
#include "mindloom/mock_endpoint.hpp"

namespace mindloom {

using json = nlohmann::json;

namespace {

// Splits "http://host:port/v1" into ("http://host:port", "/v1").
std::pair<std::string, std::string> SplitBaseUrl(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw PreconditionError("base_url must start with http:// or https://: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

HttpEndpoint::HttpEndpoint(const EndpointConfig& config) {
  std::tie(scheme_host_port_, path_) = SplitBaseUrl(config.base_url);
  path_ += "/chat/completions";
  if (!config.credential_env.empty()) {
    const char* key = std::getenv(config.credential_env.c_str());
    if (!key || !*key) {
      throw PreconditionError("credential environment variable '" + config.credential_env +
                              "' is not set");
    }
    api_key_ = key;
  }
}

ChatResponse HttpEndpoint::Send(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto seconds = request.timeout.count() / 1000;
  const auto micros = (request.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);

  json body;
  body["model"] = request.model;
  body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.decoding.temperature;
  body["max_tokens"] = request.decoding.max_tokens;
  body["stream"] = false;

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  if (!request.request_id.empty()) headers.emplace("X-Request-Id", request.request_id);

  ChatResponse response;
  auto result = client.Post(path_, headers, body.dump(), "application/json");
  if (!result) {
    response.status = 0;
    response.error = "transport: " + httplib::to_string(result.error());
    return response;
  }
  response.status = result->status;
  json payload = json::parse(result->body, nullptr, false);
  if (result->status != 200) {
    if (!payload.is_discarded() && payload.contains("error")) {
      const auto& err = payload["error"];
      response.error = err.is_object() ? err.value("message", "") : err.dump();
    }
    if (response.error.empty()) response.error = "HTTP " + std::to_string(result->status);
    return response;
  }
  try {
    if (payload.is_discarded()) throw std::runtime_error("body is not JSON");
    const auto& choice = payload.at("choices").at(0);
    response.text = choice.at("message").at("content").get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
      response.finish_reason = choice["finish_reason"].get<std::string>();
    }
    if (payload.contains("usage") && payload["usage"].is_object()) {
      TokenUsage usage;
      usage.prompt_tokens = payload["usage"].value("prompt_tokens", std::uint64_t{0});
      usage.completion_tokens = payload["usage"].value("completion_tokens", std::uint64_t{0});
      response.usage = usage;
    }
  } catch (const std::exception& e) {
    response.status = kStatusMalformedResponse;
    response.error = std::string("malformed completion response: ") + e.what();
  }
  return response;
}

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
};

MockServer::MockServer(std::shared_ptr<Endpoint> backend, int port)
    : impl_(std::make_unique<Impl>()) {
  auto handler = [backend](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages") || !body["messages"].is_array() ||
        body["messages"].empty()) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"messages must be a non-empty array"}})",
                      "application/json");
      return;
    }
    ChatRequest request;
    request.request_id = req.get_header_value("X-Request-Id");
    request.model = body.value("model", "");
    request.prompt = body["messages"].back().value("content", "");
    request.decoding.temperature = body.value("temperature", 0.0);
    request.decoding.max_tokens = body.value("max_tokens", 1024);
    const ChatResponse reply = backend->Send(request);
    if (reply.status != 200) {
      json err = {{"error", {{"message", reply.error}}}};
      res.status = reply.status > 0 ? reply.status : 500;
      res.set_content(err.dump(), "application/json");
      return;
    }
    json out;
    out["id"] = "chatcmpl-" + request.request_id;
    out["object"] = "chat.completion";
    out["model"] = request.model;
    out["choices"] = json::array({{{"index", 0},
                                   {"message", {{"role", "assistant"}, {"content", reply.text}}},
                                   {"finish_reason", reply.finish_reason}}});
    res.set_content(out.dump(), "application/json");
  };
  impl_->server.Post("/v1/chat/completions", handler);
  impl_->server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ready"})", "application/json");
  });
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
  } else if (impl_->server.bind_to_port("127.0.0.1", port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw IoError("mock server could not bind a port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockServer::~MockServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
}

}  // namespace mindloom
