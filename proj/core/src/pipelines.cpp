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

#include "mindloom/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "json.hpp"
#include "mindloom/errors.hpp"
#include "mindloom/hashing.hpp"
#include "mindloom/io.hpp"
#include "mindloom/text.hpp"

namespace mindloom {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string Dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

FlowKind ParseFlow(std::string_view s) {
  if (s == "distill") return FlowKind::kDistill;
  if (s == "bench") return FlowKind::kBench;
  throw FormatError("", 0, "flow", "unknown flow '" + std::string(s) + "'");
}

RunState ParseState(std::string_view s) {
  if (s == "running") return RunState::kRunning;
  if (s == "paused") return RunState::kPaused;
  if (s == "complete") return RunState::kComplete;
  throw FormatError("", 0, "state", "unknown state '" + std::string(s) + "'");
}

std::string RunId(const RunManifest& m) {
  const std::string key =
      fmt::format("{}|{}|{}|{}|{}|{}|{}|{}", ToString(m.flow), m.endpoint_hash, m.template_id,
                  m.parser_mode, m.prompt_mode, m.k, m.seed, m.dataset_fingerprint);
  return Sha256Hex(key).substr(0, 16);
}

void SaveManifest(RunManifest& m, const fs::path& dir) {
  m.updated_at = UtcNow();
  WriteTextFile(dir / "manifest.json", m.ToJson());
}

// Loads or starts the manifest for `fresh` in `dir`. Refuses to resume a
// directory that belongs to another run.
RunManifest OpenRun(RunManifest fresh, const fs::path& dir) {
  fresh.run_id = RunId(fresh);
  fs::create_directories(dir / "checkpoint");
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) {
    fresh.created_at = UtcNow();
    return fresh;
  }
  RunManifest old = RunManifest::FromJson(ReadTextFile(path), path.string());
  if (!old.SameRun(fresh)) {
    throw StateError("run directory " + dir.string() + " holds run " + old.run_id +
                     " with different inputs; use a fresh --out directory");
  }
  fresh.created_at = old.created_at;
  fresh.requests_issued = old.requests_issued;
  return fresh;
}

struct IssueOutcome {
  std::size_t issued = 0;
  std::map<std::string, std::string> failures;
};

// Sends the pending prompts (already in id order) within the budget and
// appends every completion to the checkpoint as it arrives.
IssueOutcome Issue(std::vector<std::pair<std::string, std::string>> pending, Checkpoint& checkpoint,
                   const GatewayClient& client, const RunOptions& options, std::size_t total) {
  IssueOutcome out;
  if (options.max_requests && pending.size() > *options.max_requests) {
    pending.resize(*options.max_requests);
  }
  if (pending.empty()) return out;
  out.issued = pending.size();
  std::size_t done = checkpoint.entries().size();
  try {
    auto result = client.CompleteBatch(pending, [&](const std::string& id, const Completion& c) {
      checkpoint.Append(id, c.text);
      if (options.progress) options.progress(++done, total);
    });
    out.failures = std::move(result.failures);
  } catch (const BatchError& e) {
    out.failures = e.causes();
  }
  return out;
}

std::vector<const InstructionRecord*> ById(const Corpus& corpus) {
  std::vector<const InstructionRecord*> out;
  for (const auto& r : corpus.records) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->id == out[i - 1]->id) {
      throw PreconditionError("duplicate record id '" + out[i]->id + "'");
    }
  }
  return out;
}

void Finish(RunManifest& m, const Checkpoint& cp, const IssueOutcome& o, const fs::path& dir) {
  m.completed = cp.entries().size();
  m.requests_issued += o.issued;
  m.failures = o.failures;
  m.state = m.completed == m.total ? RunState::kComplete : RunState::kPaused;
  SaveManifest(m, dir);
}

}  // namespace

std::string_view ToString(FlowKind flow) { return flow == FlowKind::kDistill ? "distill" : "bench"; }

std::string_view ToString(RunState state) {
  switch (state) {
    case RunState::kRunning:
      return "running";
    case RunState::kPaused:
      return "paused";
    case RunState::kComplete:
      return "complete";
  }
  return "running";
}

bool RunManifest::SameRun(const RunManifest& o) const {
  return flow == o.flow && endpoint_hash == o.endpoint_hash && template_id == o.template_id &&
         parser_mode == o.parser_mode && prompt_mode == o.prompt_mode && k == o.k &&
         seed == o.seed && dataset_fingerprint == o.dataset_fingerprint && total == o.total;
}

std::string RunManifest::ToJson() const {
  json j{{"run_id", run_id},
         {"flow", ToString(flow)},
         {"endpoint_name", endpoint_name},
         {"endpoint_hash", endpoint_hash},
         {"model", model},
         {"template_id", template_id},
         {"parser_mode", parser_mode},
         {"prompt_mode", prompt_mode},
         {"k", k},
         {"seed", seed},
         {"dataset_fingerprint", dataset_fingerprint},
         {"total", total},
         {"completed", completed},
         {"requests_issued", requests_issued},
         {"state", ToString(state)},
         {"failures", failures},
         {"created_at", created_at},
         {"updated_at", updated_at}};
  return j.dump(2) + "\n";
}

RunManifest RunManifest::FromJson(std::string_view text, const std::string& origin) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.flow = ParseFlow(j.at("flow").get<std::string>());
    m.endpoint_name = j.value("endpoint_name", "");
    m.endpoint_hash = j.at("endpoint_hash").get<std::string>();
    m.model = j.value("model", "");
    m.template_id = j.at("template_id").get<std::string>();
    m.parser_mode = j.at("parser_mode").get<std::string>();
    m.prompt_mode = j.value("prompt_mode", "");
    m.k = j.value("k", std::size_t{0});
    m.seed = j.value("seed", std::uint64_t{0});
    m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    m.total = j.at("total").get<std::size_t>();
    m.completed = j.value("completed", std::size_t{0});
    m.requests_issued = j.value("requests_issued", std::size_t{0});
    m.state = ParseState(j.value("state", "running"));
    m.failures = j.value("failures", std::map<std::string, std::string>{});
    m.created_at = j.value("created_at", "");
    m.updated_at = j.value("updated_at", "");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(origin, 0, "", e.what());
  }
}

Checkpoint::Checkpoint(fs::path path) : path_(std::move(path)) {
  if (!fs::exists(path_)) return;
  const std::string bytes = ReadTextFile(path_);
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < bytes.size()) {
    const std::size_t nl = bytes.find('\n', start);
    if (nl == std::string::npos) {
      // Torn write from an interrupted run.
      fs::resize_file(path_, start);
      break;
    }
    ++line_no;
    const std::string_view line(bytes.data() + start, nl - start);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path_.string(), line_no, "", e.what());
    }
    if (!j.contains("id") || !j.contains("raw")) {
      throw FormatError(path_.string(), line_no, "", "checkpoint line needs id and raw");
    }
    const auto id = j["id"].get<std::string>();
    if (!entries_.emplace(id, j["raw"].get<std::string>()).second) {
      throw FormatError(path_.string(), line_no, "id", "'" + id + "' checkpointed twice");
    }
    start = nl + 1;
  }
}

void Checkpoint::Append(const std::string& id, const std::string& raw) {
  if (!entries_.emplace(id, raw).second) {
    throw StateError("'" + id + "' is already checkpointed");
  }
  AppendLine(path_, Dump(json{{"id", id}, {"raw", raw}}));
}

std::string SerializeGenerations(const std::map<std::string, std::string>& generations,
                                 const Corpus& corpus) {
  std::map<std::string, std::string> task_of;
  for (const auto& r : corpus.records) task_of[r.id] = r.task_id;
  std::string out;
  for (const auto& [id, raw] : generations) {
    auto it = task_of.find(id);
    out += Dump(json{{"id", id}, {"task_id", it == task_of.end() ? "" : it->second}, {"raw", raw}});
    out += '\n';
  }
  return out;
}

std::map<std::string, std::string> LoadGenerations(const fs::path& path) {
  const std::string bytes = ReadTextFile(path);
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  for (auto line : text::SplitLines(bytes)) {
    ++line_no;
    if (text::Trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      const auto id = j.at("id").get<std::string>();
      if (!out.emplace(id, j.at("raw").get<std::string>()).second) {
        throw FormatError(path.string(), line_no, "id", "duplicate generation for '" + id + "'");
      }
    } catch (const json::exception& e) {
      throw FormatError(path.string(), line_no, "", e.what());
    }
  }
  return out;
}

DistillResult RunDistillation(const DistillInputs& in, const GatewayClient& client,
                              const RunOptions& options) {
  if (!in.corpus || !in.exemplars || !in.tmpl || !in.registry) {
    throw PreconditionError("distillation inputs are incomplete");
  }
  if (in.tmpl->kind() != TemplateKind::kDistill) {
    throw PreconditionError("template '" + in.tmpl->id() + "' is not a distillation template");
  }
  if (in.corpus->records.empty()) throw PreconditionError("corpus is empty");
  std::vector<std::string> unlabeled;
  for (const auto& r : in.corpus->records) {
    if (r.decision.empty()) unlabeled.push_back(r.id);
  }
  if (!unlabeled.empty()) throw IdMismatchError("records without gold labels", unlabeled);

  const auto records = ById(*in.corpus);
  RunManifest fresh;
  fresh.flow = FlowKind::kDistill;
  fresh.endpoint_name = client.config().name;
  fresh.endpoint_hash = client.config().Hash();
  fresh.model = client.config().model;
  fresh.template_id = in.tmpl->id();
  fresh.parser_mode = std::string(ToString(options.parse_mode));
  fresh.prompt_mode = in.options.coverage == CoverageMode::kAll
                          ? "all_exemplars"
                          : fmt::format("per_label_{}", in.options.per_label);
  fresh.dataset_fingerprint = Fingerprint(*in.corpus);
  fresh.total = records.size();

  DistillResult result;
  result.manifest = OpenRun(std::move(fresh), options.out_dir);
  RunManifest& m = result.manifest;
  SaveManifest(m, options.out_dir);

  Checkpoint checkpoint(options.out_dir / "checkpoint" / "generations.jsonl");
  std::vector<std::pair<std::string, std::string>> pending;
  for (const auto* r : records) {
    if (checkpoint.Has(r->id)) continue;
    pending.emplace_back(r->id, RenderDistillationPrompt(*r, *in.exemplars, *in.tmpl,
                                                         in.registry->Get(r->task_id), in.options));
  }
  const IssueOutcome outcome = Issue(std::move(pending), checkpoint, client, options, m.total);
  result.issued = outcome.issued;
  Finish(m, checkpoint, outcome, options.out_dir);
  result.generations = checkpoint.entries();
  if (m.state != RunState::kComplete) return result;

  const LabelParser parser(*in.registry, ParserConfig::For(*in.registry, options.parse_mode));
  result.gate = CorrectnessGate(*in.corpus, result.generations, parser, *in.registry,
                                in.thresholds);
  // Only agreed records keep the teacher explanation; the rest wait for an
  // expert in the revision queue.
  Corpus distilled = *in.corpus;
  for (auto& r : distilled.records) {
    if (result.gate->queue.Find(r.id)) {
      r.explanation.clear();
      continue;
    }
    r.explanation = parser.Parse(result.generations.at(r.id), r.task_id).explanation;
  }

  const fs::path& dir = options.out_dir;
  WriteTextFile(dir / "generations.jsonl", SerializeGenerations(result.generations, *in.corpus));
  SaveCorpus(distilled, dir / "distilled.jsonl");
  WriteTextFile(dir / "gate_report.csv", GateReportCsv(result.gate->report));
  WriteTextFile(dir / "gate_summary.txt", GateReportSummary(result.gate->report));
  result.gate->queue.Save(dir / "revision_queue.jsonl");
  result.distilled = std::move(distilled);
  return result;
}

BenchResult RunBenchmark(const BenchInputs& in, const GatewayClient& client,
                         const RunOptions& options) {
  if (!in.corpus || !in.tmpl || !in.registry) {
    throw PreconditionError("benchmark inputs are incomplete");
  }
  if (in.tmpl->kind() != TemplateKind::kEval) {
    throw PreconditionError("template '" + in.tmpl->id() + "' is not an evaluation template");
  }
  const Corpus test = SelectSplit(*in.corpus, Split::kTest);
  if (test.records.empty()) throw PreconditionError("corpus has no test split");
  const auto records = ById(test);

  RunManifest fresh;
  fresh.flow = FlowKind::kBench;
  fresh.endpoint_name = client.config().name;
  fresh.endpoint_hash = client.config().Hash();
  fresh.model = client.config().model;
  fresh.template_id = in.tmpl->id();
  fresh.parser_mode = std::string(ToString(options.parse_mode));
  fresh.prompt_mode = in.k == 0 ? "zero_shot" : fmt::format("few_shot_{}", in.k);
  fresh.k = in.k;
  fresh.seed = in.seed;
  fresh.dataset_fingerprint = Fingerprint(test);
  fresh.total = records.size();

  BenchResult result;
  result.manifest = OpenRun(std::move(fresh), options.out_dir);
  RunManifest& m = result.manifest;
  SaveManifest(m, options.out_dir);

  std::map<std::string, std::vector<InstructionRecord>> shots;
  if (in.k > 0) {
    const ExemplarSet pool(SelectSplit(*in.corpus, Split::kTrain).records);
    for (const auto* r : records) {
      if (!shots.count(r->task_id)) {
        shots[r->task_id] = SelectExemplars(in.registry->Get(r->task_id), pool, in.k, in.seed);
      }
    }
  }

  Checkpoint checkpoint(options.out_dir / "checkpoint" / "generations.jsonl");
  std::vector<std::pair<std::string, std::string>> pending;
  static const std::vector<InstructionRecord> kNoShots;
  for (const auto* r : records) {
    if (checkpoint.Has(r->id)) continue;
    auto it = shots.find(r->task_id);
    pending.emplace_back(r->id, RenderEvalPrompt(*r, it == shots.end() ? kNoShots : it->second,
                                                 *in.tmpl, in.registry->Get(r->task_id)));
  }
  const IssueOutcome outcome = Issue(std::move(pending), checkpoint, client, options, m.total);
  result.issued = outcome.issued;
  Finish(m, checkpoint, outcome, options.out_dir);
  if (m.state != RunState::kComplete) return result;

  // Parse everything first; gold is only touched when scoring below.
  const LabelParser parser(*in.registry, ParserConfig::For(*in.registry, options.parse_mode));
  for (const auto* r : records) {
    const std::string& raw = checkpoint.entries().at(r->id);
    const ParsedOutput parsed = parser.Parse(raw, r->task_id);
    result.predictions.push_back(
        {r->id, r->task_id, raw, parsed.ok() ? parsed.decision : LabelSet{}, parsed.status});
  }

  MetricsReport report;
  report.meta.model = in.label.empty() ? client.config().model : in.label;
  report.meta.endpoint = client.config().name;
  report.meta.prompt_mode = m.prompt_mode;
  report.meta.parser_mode = m.parser_mode;
  report.meta.timestamp = m.created_at;
  report.meta.seed = in.seed;
  report.meta.dataset_fingerprint = m.dataset_fingerprint;
  for (const auto& task_id : in.registry->TaskIds()) {
    std::vector<LabelSet> gold, pred;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i]->task_id != task_id) continue;
      gold.push_back(records[i]->decision);
      pred.push_back(result.predictions[i].decision);
    }
    if (!gold.empty()) report.tasks.push_back(EvaluateTask(in.registry->Get(task_id), gold, pred));
  }

  std::string lines;
  for (const auto& p : result.predictions) {
    lines += Dump(json{{"id", p.id},
                       {"task_id", p.task_id},
                       {"raw", p.raw},
                       {"decision", p.decision.codes()},
                       {"status", ToString(p.status)}});
    lines += '\n';
  }
  const fs::path& dir = options.out_dir;
  WriteTextFile(dir / "predictions.jsonl", lines);
  WriteTextFile(dir / "report.json", ReportToJson(report));
  WriteTextFile(dir / "report.csv", FormatReportTable(std::span(&report, 1)).csv);
  result.report = std::move(report);
  return result;
}

ComparisonTable CompareRuns(std::span<const MetricsReport> reports, std::size_t baseline) {
  if (reports.size() < 2) throw PreconditionError("comparison needs at least two reports");
  if (baseline >= reports.size()) throw PreconditionError("baseline index out of range");
  for (const auto& r : reports) {
    if (r.meta.dataset_fingerprint != reports[0].meta.dataset_fingerprint) {
      throw PreconditionError("reports '" + reports[0].meta.model + "' and '" + r.meta.model +
                              "' were computed on different datasets; refusing to compare");
    }
  }

  struct Column {
    std::string title;
    std::string task_id;
    int level;
  };
  std::vector<Column> cols;
  for (const auto& r : reports) {
    for (const auto& t : r.tasks) {
      auto add = [&](std::string title, int level) {
        if (std::none_of(cols.begin(), cols.end(),
                         [&](const Column& c) { return c.title == title; })) {
          cols.push_back({std::move(title), t.task_id, level});
        }
      };
      if (t.flat) add(t.task_id, 0);
      if (t.parent) add(t.task_id + "_Parent", 1);
      if (t.child) add(t.task_id + "_Child", 2);
    }
  }

  ComparisonTable table;
  for (const auto& c : cols) table.columns.push_back(c.title);
  for (const auto& r : reports) {
    std::string label = r.meta.model;
    if (!r.meta.prompt_mode.empty()) label += " (" + r.meta.prompt_mode + ")";
    table.rows.push_back(label);
    std::vector<std::optional<double>> row;
    for (const auto& c : cols) {
      const TaskMetrics* t = r.Find(c.task_id);
      const std::optional<LevelMetrics>* lv =
          !t ? nullptr : c.level == 0 ? &t->flat : c.level == 1 ? &t->parent : &t->child;
      row.push_back(lv && *lv ? std::optional<double>((**lv).prf.f1) : std::nullopt);
    }
    table.f1.push_back(std::move(row));
  }

  auto delta = [&](std::size_t row, std::size_t col) -> std::optional<double> {
    const auto& a = table.f1[row][col];
    const auto& b = table.f1[baseline][col];
    if (!a || !b) return std::nullopt;
    return *a - *b;
  };
  auto signed_pct = [](double d) {
    const std::string body = FormatPercent(std::abs(d));
    return (d < 0 && body != "0.00" ? "-" : "+") + body;
  };

  std::size_t label_width = 3;
  for (const auto& r : table.rows) label_width = std::max(label_width, r.size());
  constexpr std::size_t kCell = 16;
  std::string& text = table.text;
  text += fmt::format("{:<{}}", "Run", label_width);
  for (const auto& c : table.columns) text += fmt::format(" | {:>{}}", c, kCell);
  text += "\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    text += fmt::format("{:<{}}", table.rows[i], label_width);
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      std::string cell = "-";
      if (table.f1[i][j]) {
        cell = FormatPercent(*table.f1[i][j]);
        if (i != baseline) {
          const auto d = delta(i, j);
          if (d) cell += " (" + signed_pct(*d) + ")";
        }
      }
      text += fmt::format(" | {:>{}}", cell, kCell);
    }
    text += i == baseline ? "  [baseline]\n" : "\n";
  }

  std::string& csv = table.csv;
  csv = "run,baseline";
  for (const auto& c : table.columns) csv += "," + c + "_f1," + c + "_delta";
  csv += "\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    csv += table.rows[i] + (i == baseline ? ",true" : ",false");
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      const auto& v = table.f1[i][j];
      const auto d = delta(i, j);
      csv += "," + (v ? FormatPercent(*v) : std::string()) + "," +
             (d ? signed_pct(*d) : std::string());
    }
    csv += "\n";
  }
  return table;
}

}  // namespace mindloom
