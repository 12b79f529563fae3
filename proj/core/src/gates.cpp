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

#include "mindloom/gates.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "json.hpp"
#include "mindloom/errors.hpp"
#include "mindloom/io.hpp"
#include "mindloom/metrics.hpp"
#include "mindloom/text.hpp"

namespace mindloom {

using json = nlohmann::ordered_json;

namespace {

double Rate(std::size_t k, std::size_t n) {
  return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n);
}

TaskGate& GateFor(std::vector<TaskGate>& gates, const std::string& task_id) {
  for (auto& g : gates) {
    if (g.task_id == task_id) return g;
  }
  gates.push_back(TaskGate{});
  gates.back().task_id = task_id;
  return gates.back();
}

void SortGates(std::vector<TaskGate>& gates, const TaskRegistry& registry) {
  const auto ids = registry.TaskIds();
  auto rank = [&](const std::string& id) {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
  };
  std::stable_sort(gates.begin(), gates.end(),
                   [&](const auto& a, const auto& b) { return rank(a.task_id) < rank(b.task_id); });
}

LabelSet Closed(const LabelSet& s, const TaskSpec& task) {
  return task.taxonomy.HasHierarchy() ? HierarchyClosure(s, task.taxonomy) : s;
}

std::string Fmt(const std::optional<double>& v) {
  return v ? fmt::format("{:.4f}", *v) : std::string();
}

Disagreement ParseDisagreement(std::string_view s) {
  if (s == "label_mismatch") return Disagreement::kLabelMismatch;
  if (s == "parse_failure") return Disagreement::kParseFailure;
  throw FormatError("", 0, "kind", "unknown disagreement kind '" + std::string(s) + "'");
}

ReviewStatus ParseReviewStatus(std::string_view s) {
  if (s == "pending") return ReviewStatus::kPending;
  if (s == "revised") return ReviewStatus::kRevised;
  if (s == "accepted_as_is") return ReviewStatus::kAcceptedAsIs;
  throw FormatError("", 0, "status", "unknown review status '" + std::string(s) + "'");
}

ParseStatus ParseParseStatus(std::string_view s) {
  for (auto st : {ParseStatus::kOk, ParseStatus::kNoMarker, ParseStatus::kUnknownLabel,
                  ParseStatus::kEmptyDecision}) {
    if (ToString(st) == s) return st;
  }
  throw FormatError("", 0, "parse_status", "unknown parse status '" + std::string(s) + "'");
}

InstructionRecord& RecordById(Corpus& corpus, std::string_view id) {
  for (auto& r : corpus.records) {
    if (r.id == id) return r;
  }
  throw IdMismatchError("record not in corpus", {std::string(id)});
}

json Snapshot(const InstructionRecord& r) {
  return json{{"decision", r.decision.codes()}, {"explanation", r.explanation}};
}

RevisionItem& PendingItem(RevisionQueue& queue, std::string_view id) {
  RevisionItem* item = queue.Find(id);
  if (!item) throw IdMismatchError("id is not in the revision queue", {std::string(id)});
  if (item->status != ReviewStatus::kPending) {
    throw StateError("revision item '" + std::string(id) + "' is already " +
                     std::string(ToString(item->status)));
  }
  return *item;
}

void CheckContext(const RevisionContext& ctx) {
  if (!ctx.corpus || !ctx.registry) throw PreconditionError("revision needs a corpus and registry");
}

}  // namespace

double TaskGate::agreed_rate() const { return Rate(agreed, n); }
double TaskGate::disagreed_rate() const { return Rate(disagreed, n); }
double TaskGate::parse_failure_rate() const { return Rate(parse_failure, n); }

const TaskGate* GateReport::Find(std::string_view task_id) const {
  for (const auto& t : tasks) {
    if (t.task_id == task_id) return &t;
  }
  return nullptr;
}

bool GateReport::CorrectnessPassed(const TaskGate& task) const {
  return task.n > 0 && task.agreed_rate() >= thresholds.correctness;
}

bool GateReport::ConsistencyPassed(const TaskGate& task) const {
  if (!task.consistency_test_f1) return false;
  if (*task.consistency_test_f1 < thresholds.consistency_test) return false;
  // A task without expert exemplars is judged on the test split alone.
  return !task.consistency_expert_f1 ||
         *task.consistency_expert_f1 >= thresholds.consistency_expert;
}

bool GateReport::Passed() const {
  if (tasks.empty()) return false;
  for (const auto& t : tasks) {
    if (has_correctness && !CorrectnessPassed(t)) return false;
    if (has_consistency && !ConsistencyPassed(t)) return false;
  }
  return true;
}

std::string GateReportCsv(const GateReport& report) {
  std::string out =
      "task,n,agreed,disagreed,parse_failure,agreed_rate,disagreed_rate,parse_failure_rate,"
      "correctness_pass,consistency_test_n,consistency_test_f1,consistency_expert_n,"
      "consistency_expert_f1,consistency_pass\n";
  for (const auto& t : report.tasks) {
    const std::string cpass =
        report.has_correctness ? (report.CorrectnessPassed(t) ? "true" : "false") : "";
    const std::string kpass =
        report.has_consistency ? (report.ConsistencyPassed(t) ? "true" : "false") : "";
    out += fmt::format("{},{},{},{},{},{:.4f},{:.4f},{:.4f},{},{},{},{},{},{}\n", t.task_id, t.n,
                       t.agreed, t.disagreed, t.parse_failure, t.agreed_rate(),
                       t.disagreed_rate(), t.parse_failure_rate(), cpass, t.consistency_test_n,
                       Fmt(t.consistency_test_f1), t.consistency_expert_n,
                       Fmt(t.consistency_expert_f1), kpass);
  }
  return out;
}

std::string GateReportSummary(const GateReport& report) {
  std::string out;
  for (const auto& t : report.tasks) {
    out += fmt::format("{}\n", t.task_id);
    if (report.has_correctness) {
      out += fmt::format(
          "  correctness  agreed {} / {} ({}%)  disagreed {}  parse failures {}  "
          "threshold {}%  {}\n",
          t.agreed, t.n, FormatPercent(t.agreed_rate()), t.disagreed, t.parse_failure,
          FormatPercent(report.thresholds.correctness),
          report.CorrectnessPassed(t) ? "PASS" : "FAIL");
    }
    if (report.has_consistency) {
      out += fmt::format("  consistency  test F1 {} (n={}, min {})",
                         t.consistency_test_f1 ? FormatPercent(*t.consistency_test_f1) : "-",
                         t.consistency_test_n, FormatPercent(report.thresholds.consistency_test));
      out += fmt::format("  expert F1 {} (n={}, min {})  {}\n",
                         t.consistency_expert_f1 ? FormatPercent(*t.consistency_expert_f1) : "-",
                         t.consistency_expert_n,
                         FormatPercent(report.thresholds.consistency_expert),
                         report.ConsistencyPassed(t) ? "PASS" : "FAIL");
    }
  }
  out += report.Passed() ? "overall: PASS\n" : "overall: FAIL\n";
  return out;
}

std::string_view ToString(Disagreement kind) {
  return kind == Disagreement::kLabelMismatch ? "label_mismatch" : "parse_failure";
}

std::string_view ToString(ReviewStatus status) {
  switch (status) {
    case ReviewStatus::kPending:
      return "pending";
    case ReviewStatus::kRevised:
      return "revised";
    case ReviewStatus::kAcceptedAsIs:
      return "accepted_as_is";
  }
  return "pending";
}

RevisionQueue::RevisionQueue(std::vector<RevisionItem> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < items_.size(); ++i) {
    if (items_[i].id == items_[i - 1].id) {
      throw PreconditionError("revision queue lists '" + items_[i].id + "' twice");
    }
  }
}

RevisionItem* RevisionQueue::Find(std::string_view id) {
  auto it = std::lower_bound(items_.begin(), items_.end(), id,
                             [](const auto& item, std::string_view key) { return item.id < key; });
  return it != items_.end() && it->id == id ? &*it : nullptr;
}

const RevisionItem* RevisionQueue::Find(std::string_view id) const {
  return const_cast<RevisionQueue*>(this)->Find(id);
}

void RevisionQueue::Add(RevisionItem item) {
  if (Find(item.id)) throw PreconditionError("'" + item.id + "' is already queued");
  auto it = std::lower_bound(items_.begin(), items_.end(), item.id,
                             [](const auto& i, const std::string& key) { return i.id < key; });
  items_.insert(it, std::move(item));
}

std::size_t RevisionQueue::pending() const {
  return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [](const auto& i) {
    return i.status == ReviewStatus::kPending;
  }));
}

std::string RevisionQueue::ToJsonl() const {
  std::string out;
  for (const auto& i : items_) {
    json line{{"id", i.id},
              {"task_id", i.task_id},
              {"kind", ToString(i.kind)},
              {"parse_status", ToString(i.parse_status)},
              {"status", ToString(i.status)},
              {"parsed", i.parsed.codes()},
              {"gold", i.gold.codes()},
              {"raw", i.raw}};
    out += line.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

RevisionQueue RevisionQueue::FromJsonl(std::string_view text, const std::string& origin) {
  std::vector<RevisionItem> items;
  std::size_t line_no = 0;
  for (auto line : text::SplitLines(text)) {
    ++line_no;
    if (text::Trim(line).empty()) continue;
    try {
      const json node = json::parse(line);
      RevisionItem item;
      item.id = node.at("id").get<std::string>();
      item.task_id = node.at("task_id").get<std::string>();
      item.kind = ParseDisagreement(node.at("kind").get<std::string>());
      item.parse_status = ParseParseStatus(node.at("parse_status").get<std::string>());
      item.status = ParseReviewStatus(node.at("status").get<std::string>());
      item.parsed = LabelSet(node.at("parsed").get<std::vector<std::string>>());
      item.gold = LabelSet(node.at("gold").get<std::vector<std::string>>());
      item.raw = node.at("raw").get<std::string>();
      items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw FormatError(origin, line_no, "", e.what());
    } catch (const FormatError& e) {
      throw FormatError(origin, line_no, e.field(), e.what());
    }
  }
  return RevisionQueue(std::move(items));
}

void RevisionQueue::Save(const std::filesystem::path& path) const { WriteTextFile(path, ToJsonl()); }

RevisionQueue RevisionQueue::Load(const std::filesystem::path& path) {
  return FromJsonl(ReadTextFile(path), path.string());
}

CorrectnessResult CorrectnessGate(const Corpus& corpus,
                                  const std::map<std::string, std::string>& generations,
                                  const LabelParser& parser, const TaskRegistry& registry,
                                  const GateThresholds& thresholds) {
  std::vector<std::string> missing;
  for (const auto& r : corpus.records) {
    if (!generations.count(r.id)) missing.push_back(r.id);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw IdMismatchError(fmt::format("{} record(s) have no generation", missing.size()),
                          missing);
  }

  CorrectnessResult result;
  result.report.thresholds = thresholds;
  result.report.has_correctness = true;
  std::vector<RevisionItem> items;
  for (const auto& r : corpus.records) {
    const TaskSpec& task = registry.Get(r.task_id);
    TaskGate& gate = GateFor(result.report.tasks, r.task_id);
    ++gate.n;
    const std::string& raw = generations.at(r.id);
    const ParsedOutput parsed = parser.Parse(raw, r.task_id);
    RevisionItem item{r.id, r.task_id, raw, parsed.decision, r.decision};
    item.parse_status = parsed.status;
    if (!parsed.ok()) {
      ++gate.parse_failure;
      item.kind = Disagreement::kParseFailure;
      items.push_back(std::move(item));
    } else if (Closed(parsed.decision, task).SameMembers(Closed(r.decision, task))) {
      ++gate.agreed;
    } else {
      ++gate.disagreed;
      items.push_back(std::move(item));
    }
  }
  SortGates(result.report.tasks, registry);
  result.queue = RevisionQueue(std::move(items));
  return result;
}

void RevisionLog::Append(const std::string& json_line) const { AppendLine(path_, json_line); }

void ApplyRevision(RevisionQueue& queue, const RevisionContext& ctx, std::string_view id,
                   const LabelSet& decision, const std::string& explanation,
                   const std::string& reviewer) {
  CheckContext(ctx);
  RevisionItem& item = PendingItem(queue, id);
  if (reviewer.empty()) throw PreconditionError("a reviewer id is required");
  if (text::Trim(explanation).empty()) throw PreconditionError("corrected explanation is empty");
  InstructionRecord& record = RecordById(*ctx.corpus, id);
  const TaskSpec& task = ctx.registry->Get(record.task_id);

  InstructionRecord revised = record;
  revised.decision = decision;
  revised.explanation = explanation;
  revised.expert_revised = true;
  const auto verdict = ValidateRecord(revised, *ctx.registry);
  if (!verdict.ok()) {
    throw PreconditionError("corrected decision for '" + record.id +
                            "' is invalid: " + verdict.violations.front());
  }
  if (revised.decision.empty()) throw PreconditionError("corrected decision is empty");

  json entry{{"timestamp", UtcNow()},  {"reviewer", reviewer},     {"id", record.id},
             {"action", "revise"},      {"before", Snapshot(record)}, {"after", Snapshot(revised)}};
  record = std::move(revised);
  if (ctx.generations) {
    (*ctx.generations)[record.id] = RenderCanonical(record.decision, record.explanation, task);
  }
  item.status = ReviewStatus::kRevised;
  if (ctx.log) ctx.log->Append(entry.dump(-1, ' ', false, json::error_handler_t::replace));
}

void AcceptAsIs(RevisionQueue& queue, const RevisionContext& ctx, std::string_view id,
                const std::string& reviewer, const std::string& justification) {
  CheckContext(ctx);
  RevisionItem& item = PendingItem(queue, id);
  if (item.kind != Disagreement::kLabelMismatch) {
    throw StateError("'" + item.id + "' failed to parse; there is no teacher decision to accept");
  }
  if (reviewer.empty()) throw PreconditionError("a reviewer id is required");
  if (text::Trim(justification).empty()) throw PreconditionError("a justification is required");
  InstructionRecord& record = RecordById(*ctx.corpus, id);
  const TaskSpec& task = ctx.registry->Get(record.task_id);

  InstructionRecord accepted = record;
  accepted.decision = Closed(item.parsed, task);
  accepted.expert_revised = true;
  if (ctx.generations) {
    auto it = ctx.generations->find(record.id);
    if (it != ctx.generations->end()) {
      const ParsedOutput parsed = ParseGeneration(it->second, task, ParserConfig::For(*ctx.registry, ParseMode::kLenient));
      if (!parsed.explanation.empty()) accepted.explanation = parsed.explanation;
    }
  }
  const auto verdict = ValidateRecord(accepted, *ctx.registry);
  if (!verdict.ok()) {
    throw PreconditionError("teacher decision for '" + record.id +
                            "' is not a valid record: " + verdict.violations.front());
  }
  json entry{{"timestamp", UtcNow()},     {"reviewer", reviewer},
             {"id", record.id},           {"action", "accept_as_is"},
             {"justification", justification}, {"before", Snapshot(record)},
             {"after", Snapshot(accepted)}};
  record = std::move(accepted);
  item.status = ReviewStatus::kAcceptedAsIs;
  if (ctx.log) ctx.log->Append(entry.dump(-1, ' ', false, json::error_handler_t::replace));
}

ConsistencyExport ExportConsistencyCorpus(const Corpus& corpus) {
  ConsistencyExport out;
  out.corpus.provenance = corpus.provenance;
  for (const auto& r : corpus.records) {
    if (text::Trim(r.explanation).empty()) {
      out.skipped.push_back(r.id);
      continue;
    }
    InstructionRecord d = r;
    d.text = r.explanation;
    d.explanation.clear();
    out.corpus.records.push_back(std::move(d));
  }
  return out;
}

std::map<std::string, LabelSet> ParsePredictions(std::string_view text,
                                                 const std::string& origin) {
  std::map<std::string, LabelSet> out;
  std::size_t line_no = 0;
  for (auto line : text::SplitLines(text)) {
    ++line_no;
    if (text::Trim(line).empty()) continue;
    json node;
    try {
      node = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(origin, line_no, "", e.what());
    }
    if (!node.is_object() || !node.contains("id") || !node["id"].is_string()) {
      throw FormatError(origin, line_no, "id", "missing or not a string");
    }
    if (!node.contains("decision") || !node["decision"].is_array()) {
      throw FormatError(origin, line_no, "decision", "expected an array of strings");
    }
    LabelSet decision;
    for (const auto& code : node["decision"]) {
      if (!code.is_string()) {
        throw FormatError(origin, line_no, "decision", "expected an array of strings");
      }
      decision.Insert(code.get<std::string>());
    }
    const auto id = node["id"].get<std::string>();
    if (!out.emplace(id, std::move(decision)).second) {
      throw FormatError(origin, line_no, "id", "duplicate prediction for '" + id + "'");
    }
  }
  return out;
}

std::map<std::string, LabelSet> LoadPredictions(const std::filesystem::path& path) {
  return ParsePredictions(ReadTextFile(path), path.string());
}

GateReport IngestConsistencyPredictions(const Corpus& derived,
                                        const std::map<std::string, LabelSet>& predictions,
                                        const TaskRegistry& registry,
                                        const GateThresholds& thresholds) {
  struct Bucket {
    std::vector<LabelSet> gold, pred;
  };
  std::map<std::string, Bucket> test, expert;
  std::vector<std::string> missing;
  for (const auto& r : derived.records) {
    const bool is_expert = r.source == "expert";
    if (!is_expert && r.split != Split::kTest) continue;
    auto it = predictions.find(r.id);
    if (it == predictions.end()) {
      missing.push_back(r.id);
      continue;
    }
    const TaskSpec& task = registry.Get(r.task_id);
    Bucket& b = (is_expert ? expert : test)[r.task_id];
    b.gold.push_back(Closed(r.decision, task));
    b.pred.push_back(Closed(it->second, task));
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw IdMismatchError(fmt::format("{} record(s) have no prediction", missing.size()),
                          missing);
  }

  GateReport report;
  report.thresholds = thresholds;
  report.has_consistency = true;
  auto score = [&](const std::string& task_id, const Bucket& b) {
    const TaskSpec& task = registry.Get(task_id);
    return ComputePrf(CountConfusion(b.gold, b.pred, Averaging::For(task))).f1;
  };
  for (const auto& [task_id, b] : test) {
    TaskGate& g = GateFor(report.tasks, task_id);
    g.consistency_test_f1 = score(task_id, b);
    g.consistency_test_n = b.gold.size();
  }
  for (const auto& [task_id, b] : expert) {
    TaskGate& g = GateFor(report.tasks, task_id);
    g.consistency_expert_f1 = score(task_id, b);
    g.consistency_expert_n = b.gold.size();
  }
  SortGates(report.tasks, registry);
  return report;
}

}  // namespace mindloom
