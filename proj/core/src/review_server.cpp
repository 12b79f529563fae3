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

#include "mindloom/review_server.hpp"

#include <ctime>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mindloom/errors.hpp"

namespace mindloom {

using json = nlohmann::ordered_json;

namespace {

// Field-level validation failure, reported as 422.
struct FieldErrors {
  json fields = json::object();
  void Add(const std::string& field, const std::string& message) { fields[field] = message; }
  bool empty() const { return fields.empty(); }
};

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

void ReplyError(httplib::Response& res, int status, const std::string& message,
                const json& fields = json::object()) {
  json body{{"error", message}};
  if (!fields.empty()) body["fields"] = fields;
  Reply(res, status, body);
}

std::string Iso(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RequireString(const json& body, const std::string& key, FieldErrors& errs) {
  if (!body.contains(key)) {
    errs.Add(key, "required");
  } else if (!body[key].is_string() || body[key].get<std::string>().empty()) {
    errs.Add(key, "must be a non-empty string");
  } else {
    return body[key].get<std::string>();
  }
  return {};
}

int RequireDimension(const json& body, const std::string& key, FieldErrors& errs) {
  if (!body.contains(key)) {
    errs.Add(key, "required");
    return 0;
  }
  if (!body[key].is_number_integer()) {
    errs.Add(key, "must be an integer in 0..3");
    return 0;
  }
  const auto v = body[key].get<long long>();
  if (v < 0 || v > 3) {
    errs.Add(key, "must be an integer in 0..3");
    return 0;
  }
  return static_cast<int>(v);
}

std::optional<Correction> ReadCorrection(const json& node, const std::string& prefix,
                                         FieldErrors& errs) {
  if (!node.is_object()) {
    errs.Add(prefix.empty() ? "body" : prefix, "must be an object");
    return std::nullopt;
  }
  const std::string p = prefix.empty() ? "" : prefix + ".";
  Correction c;
  if (!node.contains("decision") || !node["decision"].is_array() || node["decision"].empty()) {
    errs.Add(p + "decision", "must be a non-empty array of label codes");
  } else {
    for (const auto& code : node["decision"]) {
      if (!code.is_string()) {
        errs.Add(p + "decision", "must be a non-empty array of label codes");
        break;
      }
      if (!c.decision.Insert(code.get<std::string>())) {
        errs.Add(p + "decision", "duplicate label code");
        break;
      }
    }
  }
  if (!node.contains("explanation") || !node["explanation"].is_string() ||
      node["explanation"].get<std::string>().find_first_not_of(" \t\r\n") == std::string::npos) {
    errs.Add(p + "explanation", "must be a non-empty string");
  } else {
    c.explanation = node["explanation"].get<std::string>();
  }
  return c;
}

json Labels(const LabelSet& set, const TaskSpec& task) {
  json out = json::array();
  for (const auto& code : set) {
    out.push_back({{"code", code},
                   {"name", task.taxonomy.Contains(code) ? task.taxonomy.DisplayName(code) : code}});
  }
  return out;
}

json TaxonomyJson(const TaskSpec& task) {
  json labels = json::array();
  for (const auto& l : task.taxonomy.labels()) {
    json node{{"code", l.code}, {"name", l.name}};
    node["parent"] = l.parent ? json(*l.parent) : json(nullptr);
    labels.push_back(node);
  }
  return json{{"task_id", task.task_id}, {"kind", ToString(task.kind)}, {"labels", labels}};
}

json ProgressJson(const Progress& p) {
  return json{{"total", p.total},         {"complete", p.complete},
              {"claimed", p.claimed},     {"scores", p.scores},
              {"corrected", p.corrected}, {"percent", p.fraction() * 100.0}};
}

json SummaryJson(const Summary& s) {
  return json{{"n", s.n},   {"mean", s.mean}, {"median", s.median}, {"q1", s.q1},
              {"q3", s.q3}, {"min", s.min},   {"max", s.max}};
}

json ScoreJson(const RubricScore& s) {
  return json{{"item_id", s.item_id},
              {"reviewer", s.reviewer},
              {"consistency", s.consistency},
              {"reliability", s.reliability},
              {"professionality", s.professionality},
              {"overall", s.overall()},
              {"timestamp", s.timestamp}};
}

// Maps library errors onto HTTP statuses.
template <typename Fn>
void Guard(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    json fields = json::object();
    fields[e.field().empty() ? "body" : e.field()] = e.what();
    ReplyError(res, 422, "invalid request", fields);
  } catch (const IdMismatchError& e) {
    ReplyError(res, 404, e.what());
  } catch (const StateError& e) {
    ReplyError(res, 409, e.what());
  } catch (const PreconditionError& e) {
    ReplyError(res, 422, e.what());
  } catch (const std::exception& e) {
    ReplyError(res, 500, e.what());
  }
}

std::optional<json> Body(const httplib::Request& req, httplib::Response& res) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    ReplyError(res, 400, "body must be a JSON object");
    return std::nullopt;
  }
  return body;
}

}  // namespace

struct ReviewServer::Impl {
  httplib::Server server;
  std::thread thread;
};

ReviewServer::ReviewServer(ReviewStore& store, const TaskRegistry& registry,
                           ReviewServerOptions options)
    : impl_(std::make_unique<Impl>()), host_(options.host) {
  auto& srv = impl_->server;
  ReviewStore* st = &store;
  auto reg = std::make_shared<TaskRegistry>(registry);

  srv.Post("/api/claim-next", [st, reg](const httplib::Request& req, httplib::Response& res) {
    auto body = Body(req, res);
    if (!body) return;
    Guard(res, [&] {
      FieldErrors errs;
      const auto reviewer = RequireString(*body, "reviewer", errs);
      if (!errs.empty()) return ReplyError(res, 422, "invalid request", errs.fields);
      const auto claim = st->ClaimNext(reviewer);
      json out{{"item", nullptr}, {"lease_expires_at", nullptr}};
      if (claim) {
        const ReviewItem& item = claim->item;
        const TaskSpec& task = reg->Get(item.task_id);
        out["item"] = json{{"id", item.id},
                           {"task_id", item.task_id},
                           {"text", item.text},
                           {"generation", item.generation},
                           {"parsed", Labels(item.parsed, task)},
                           {"gold", Labels(item.gold, task)},
                           {"taxonomy", TaxonomyJson(task)}};
        out["lease_expires_at"] = Iso(claim->expires);
      }
      out["progress"] = ProgressJson(st->progress());
      Reply(res, 200, out);
    });
  });

  srv.Post("/api/submit-score", [st](const httplib::Request& req, httplib::Response& res) {
    auto body = Body(req, res);
    if (!body) return;
    Guard(res, [&] {
      FieldErrors errs;
      ScoreSubmission sub;
      sub.reviewer = RequireString(*body, "reviewer", errs);
      sub.item_id = RequireString(*body, "item_id", errs);
      sub.consistency = RequireDimension(*body, "consistency", errs);
      sub.reliability = RequireDimension(*body, "reliability", errs);
      sub.professionality = RequireDimension(*body, "professionality", errs);
      if (body->contains("overall")) errs.Add("overall", "is derived by the server; do not send it");
      const auto verdict = RequireString(*body, "verdict", errs);
      if (!verdict.empty() && verdict != "agree" && verdict != "disagree") {
        errs.Add("verdict", "must be \"agree\" or \"disagree\"");
      }
      sub.verdict = verdict == "disagree" ? Verdict::kDisagree : Verdict::kAgree;
      if (body->contains("correction") && !(*body)["correction"].is_null()) {
        sub.correction = ReadCorrection((*body)["correction"], "correction", errs);
      } else if (verdict == "disagree") {
        errs.Add("correction", "required when verdict is \"disagree\"");
      }
      if (!errs.empty()) return ReplyError(res, 422, "invalid request", errs.fields);
      const RubricScore s = st->SubmitScore(sub);
      Reply(res, 200, json{{"score", ScoreJson(s)}, {"progress", ProgressJson(st->progress())}});
    });
  });

  srv.Post("/api/submit-correction", [st](const httplib::Request& req, httplib::Response& res) {
    auto body = Body(req, res);
    if (!body) return;
    Guard(res, [&] {
      FieldErrors errs;
      const auto reviewer = RequireString(*body, "reviewer", errs);
      const auto item_id = RequireString(*body, "item_id", errs);
      auto c = ReadCorrection(*body, "", errs);
      if (!errs.empty()) return ReplyError(res, 422, "invalid request", errs.fields);
      c->reviewer = reviewer;
      c->item_id = item_id;
      st->SubmitCorrection(*c);
      Reply(res, 200, json{{"ok", true}, {"progress", ProgressJson(st->progress())}});
    });
  });

  srv.Get("/api/progress", [st](const httplib::Request&, httplib::Response& res) {
    Guard(res, [&] { Reply(res, 200, ProgressJson(st->progress())); });
  });

  srv.Get("/api/aggregate", [st](const httplib::Request&, httplib::Response& res) {
    Guard(res, [&] {
      const auto scores = st->scores();
      if (scores.empty()) {
        return Reply(res, 200,
                     json{{"n", 0},
                          {"consistency", nullptr},
                          {"reliability", nullptr},
                          {"professionality", nullptr},
                          {"overall", nullptr},
                          {"reviewers", json::object()}});
      }
      const AggregateStats a = AggregateRubric(scores);
      json reviewers = json::object();
      for (const auto& [id, m] : a.reviewers) {
        reviewers[id] = json{{"n", m.n},
                             {"consistency", m.consistency},
                             {"reliability", m.reliability},
                             {"professionality", m.professionality},
                             {"overall", m.overall}};
      }
      Reply(res, 200,
            json{{"n", a.overall.n},
                 {"consistency", SummaryJson(a.consistency)},
                 {"reliability", SummaryJson(a.reliability)},
                 {"professionality", SummaryJson(a.professionality)},
                 {"overall", SummaryJson(a.overall)},
                 {"reviewers", reviewers}});
    });
  });

  srv.Get("/api/aggregate.csv", [st](const httplib::Request&, httplib::Response& res) {
    Guard(res, [&] {
      const auto scores = st->scores();
      std::string csv = AggregateCsv(AggregateStats{});
      if (scores.empty()) {
        csv.erase(csv.find('\n') + 1);  // header only
      } else {
        csv = AggregateCsv(AggregateRubric(scores));
      }
      res.status = 200;
      res.set_content(csv, "text/csv");
    });
  });

  srv.Get("/api/taxonomy", [reg](const httplib::Request&, httplib::Response& res) {
    json tasks = json::array();
    for (const auto& id : reg->TaskIds()) tasks.push_back(TaxonomyJson(reg->Get(id)));
    Reply(res, 200, json{{"tasks", tasks}});
  });

  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    Reply(res, 200, json{{"status", "ok"}});
  });

  // httplib's defaults add SO_REUSEPORT, which lets a second server share a
  // busy port silently.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });

  if (!options.ui_dir.empty() && !srv.set_mount_point("/", options.ui_dir.string())) {
    throw IoError("ui directory not found: " + options.ui_dir.string());
  }

  if (options.port == 0) {
    port_ = srv.bind_to_any_port(options.host);
  } else {
    port_ = srv.bind_to_port(options.host, options.port) ? options.port : -1;
  }
  if (port_ <= 0) {
    throw IoError("cannot bind review server to " + options.host + ":" +
                  std::to_string(options.port));
  }
}

ReviewServer::~ReviewServer() { Stop(); }

std::string ReviewServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

void ReviewServer::Start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ReviewServer::Run() { impl_->server.listen_after_bind(); }

void ReviewServer::Stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace mindloom
