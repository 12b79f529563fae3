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

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mindloom/gateway.hpp"

namespace mindloom {

/// Behaviour of the in-process mock endpoint.
struct MockScript {
  enum class Rule { kEchoGold, kConstantLabel, kFixtureReplay };

  Rule rule = Rule::kEchoGold;
  /// Rendered label list replied by kConstantLabel ("低风险").
  std::string constant_labels;
  /// Canned replies for kFixtureReplay, served in order.
  std::vector<std::string> replies;
  /// Request id -> rendered label list. Lets kEchoGold answer evaluation
  /// prompts, which carry no gold labels.
  std::map<std::string, std::string> answer_key;
  /// "answer_key": "corpus" in JSON; the caller fills answer_key from gold.
  bool answer_key_from_corpus = false;
  /// Request id -> verbatim reply, taking precedence over the rule.
  std::map<std::string, std::string> overrides;
  std::string explanation = "帖子内容与所给标签一致，作者的表述体现了相应的特征。";

  /// Statuses returned to the first calls for every request id, before the
  /// rule answers ({429} = fail once with a rate limit).
  std::vector<int> fail_first;
  /// Request ids that always fail with fail_status; "*" matches all.
  std::set<std::string> fail_always;
  int fail_status = 503;
  std::chrono::milliseconds latency{0};

  /// Where echo-gold looks for the gold label line: the first label-marker
  /// line after the last occurrence of query_marker.
  std::string query_marker = "【目标帖子】";
  std::vector<std::string> label_markers = {"标签", "label"};
  std::string reply_label_marker = "标签";
  std::string reply_explanation_marker = "解释";

  static MockScript FromJson(std::string_view json_text, const std::string& origin = {});
};

MockScript::Rule ParseMockRule(std::string_view name);

/// Scriptable endpoint that also records concurrency and call counts.
class MockEndpoint : public Endpoint {
 public:
  explicit MockEndpoint(MockScript script);
  ChatResponse Send(const ChatRequest& request) override;

  int peak_in_flight() const { return peak_in_flight_.load(); }
  std::size_t request_count() const { return request_count_.load(); }
  std::size_t calls_for(const std::string& request_id) const;
  const MockScript& script() const { return script_; }

  /// Gold label text embedded in a distillation prompt, if any.
  static std::optional<std::string> ExtractGold(std::string_view prompt,
                                                const MockScript& script);

 private:
  ChatResponse Answer(const ChatRequest& request);

  MockScript script_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_in_flight_{0};
  std::atomic<std::size_t> request_count_{0};
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> calls_;
  std::size_t replay_cursor_ = 0;
};

/// Serves any Endpoint over the chat-completions HTTP protocol on
/// 127.0.0.1, so HttpEndpoint can be tested end to end. Port 0 picks a free
/// port.
class MockServer {
 public:
  MockServer(std::shared_ptr<Endpoint> backend, int port = 0);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const { return port_; }
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace mindloom
