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

#include "mindloom/mock_endpoint.hpp"

#include <algorithm>
#include <thread>

#include "json.hpp"
#include "mindloom/text.hpp"

namespace mindloom {

using json = nlohmann::json;

MockScript::Rule ParseMockRule(std::string_view name) {
  if (name == "echo_gold") return MockScript::Rule::kEchoGold;
  if (name == "constant_label") return MockScript::Rule::kConstantLabel;
  if (name == "fixture_replay") return MockScript::Rule::kFixtureReplay;
  throw PreconditionError("unknown mock rule '" + std::string(name) + "'");
}

MockScript MockScript::FromJson(std::string_view json_text, const std::string& origin) {
  MockScript s;
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(origin, 0, "mock", e.what());
  }
  try {
    s.rule = ParseMockRule(root.value("rule", "echo_gold"));
    s.constant_labels = root.value("labels", "");
    if (root.contains("replies")) s.replies = root["replies"].get<std::vector<std::string>>();
    if (root.contains("answer_key")) {
      const auto& key = root["answer_key"];
      if (key.is_string() && key.get<std::string>() == "corpus") {
        s.answer_key_from_corpus = true;
      } else if (key.is_object()) {
        s.answer_key = key.get<std::map<std::string, std::string>>();
      } else {
        throw FormatError(origin, 0, "mock.answer_key", "expected an object or \"corpus\"");
      }
    }
    if (root.contains("overrides")) {
      s.overrides = root["overrides"].get<std::map<std::string, std::string>>();
    }
    if (root.contains("explanation")) s.explanation = root["explanation"].get<std::string>();
    if (root.contains("fail_first")) s.fail_first = root["fail_first"].get<std::vector<int>>();
    if (root.contains("fail_always")) {
      const auto& f = root["fail_always"];
      if (f.is_string()) {
        s.fail_always.insert(f.get<std::string>());
      } else {
        for (const auto& id : f) s.fail_always.insert(id.get<std::string>());
      }
    }
    s.fail_status = root.value("fail_status", 503);
    s.latency = std::chrono::milliseconds(root.value("latency_ms", 0));
    if (root.contains("query_marker")) s.query_marker = root["query_marker"].get<std::string>();
    if (root.contains("label_markers")) {
      s.label_markers = root["label_markers"].get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw FormatError(origin, 0, "mock", e.what());
  }
  if (s.rule == Rule::kConstantLabel && s.constant_labels.empty()) {
    throw FormatError(origin, 0, "mock.labels", "constant_label needs 'labels'");
  }
  return s;
}

MockEndpoint::MockEndpoint(MockScript script) : script_(std::move(script)) {}

std::size_t MockEndpoint::calls_for(const std::string& request_id) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find(request_id);
  return it == calls_.end() ? 0 : it->second;
}

std::optional<std::string> MockEndpoint::ExtractGold(std::string_view prompt,
                                                     const MockScript& script) {
  const std::size_t at = prompt.rfind(script.query_marker);
  if (at == std::string_view::npos) return std::nullopt;
  std::vector<std::string> markers;
  for (const auto& m : script.label_markers) markers.push_back(text::FoldWidth(m).value);

  for (std::string_view line : text::SplitLines(prompt.substr(at + script.query_marker.size()))) {
    const text::Folded folded = text::FoldWidth(line);
    std::string_view f = folded.value;
    std::size_t lead = 0;
    std::size_t width = 0;
    while (lead < f.size() && text::IsSpace(f, lead, &width)) lead += width;
    for (const auto& marker : markers) {
      if (f.substr(lead, marker.size()) != marker) continue;
      std::size_t pos = lead + marker.size();
      while (pos < f.size() && text::IsSpace(f, pos, &width)) pos += width;
      if (pos < f.size() && f[pos] == ':') {
        return std::string(text::Trim(line.substr(folded.source_offset[pos + 1])));
      }
    }
  }
  return std::nullopt;
}

ChatResponse MockEndpoint::Answer(const ChatRequest& request) {
  ChatResponse response;
  response.finish_reason = "stop";
  std::size_t call_index = 0;
  {
    std::lock_guard lock(mu_);
    call_index = ++calls_[request.request_id];
  }
  if (script_.fail_always.count("*") || script_.fail_always.count(request.request_id)) {
    response.status = script_.fail_status;
    response.error = "scripted failure";
    return response;
  }
  if (call_index <= script_.fail_first.size()) {
    response.status = script_.fail_first[call_index - 1];
    response.error = "scripted failure";
    return response;
  }
  if (auto it = script_.overrides.find(request.request_id); it != script_.overrides.end()) {
    response.text = it->second;
    return response;
  }

  auto canonical = [&](const std::string& labels) {
    return script_.reply_label_marker + ": " + labels + "\n" + script_.reply_explanation_marker +
           ": " + script_.explanation;
  };
  switch (script_.rule) {
    case MockScript::Rule::kEchoGold: {
      std::optional<std::string> gold = ExtractGold(request.prompt, script_);
      if (!gold) {
        if (auto it = script_.answer_key.find(request.request_id); it != script_.answer_key.end()) {
          gold = it->second;
        }
      }
      if (!gold) {
        response.status = 400;
        response.error = "echo_gold: no gold label in prompt or answer key";
        return response;
      }
      response.text = canonical(*gold);
      return response;
    }
    case MockScript::Rule::kConstantLabel:
      response.text = canonical(script_.constant_labels);
      return response;
    case MockScript::Rule::kFixtureReplay: {
      std::lock_guard lock(mu_);
      if (replay_cursor_ >= script_.replies.size()) {
        response.status = 410;
        response.error = "fixture replay exhausted";
        return response;
      }
      response.text = script_.replies[replay_cursor_++];
      return response;
    }
  }
  response.status = 500;
  response.error = "unreachable mock rule";
  return response;
}

ChatResponse MockEndpoint::Send(const ChatRequest& request) {
  const int now = in_flight_.fetch_add(1) + 1;
  int peak = peak_in_flight_.load();
  while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
  }
  ++request_count_;
  if (script_.latency.count() > 0) std::this_thread::sleep_for(script_.latency);
  ChatResponse response = Answer(request);
  in_flight_.fetch_sub(1);
  return response;
}

}  // namespace mindloom
