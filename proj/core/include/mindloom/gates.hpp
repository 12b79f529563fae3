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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mindloom/corpus.hpp"
#include "mindloom/parser.hpp"

namespace mindloom {

struct GateThresholds {
  double correctness = 0.95;
  double consistency_test = 0.95;
  double consistency_expert = 0.90;
};

struct TaskGate {
  std::string task_id;
  std::size_t n = 0;
  std::size_t agreed = 0;
  std::size_t disagreed = 0;
  std::size_t parse_failure = 0;
  std::optional<double> consistency_test_f1;
  std::optional<double> consistency_expert_f1;
  std::size_t consistency_test_n = 0;
  std::size_t consistency_expert_n = 0;

  double agreed_rate() const;
  double disagreed_rate() const;
  double parse_failure_rate() const;
};

struct GateReport {
  std::vector<TaskGate> tasks;
  GateThresholds thresholds;
  bool has_correctness = false;
  bool has_consistency = false;

  const TaskGate* Find(std::string_view task_id) const;
  bool CorrectnessPassed(const TaskGate& task) const;
  bool ConsistencyPassed(const TaskGate& task) const;
  /// Every checked gate of every task passes.
  bool Passed() const;
};

std::string GateReportCsv(const GateReport& report);
std::string GateReportSummary(const GateReport& report);

enum class Disagreement { kLabelMismatch, kParseFailure };
enum class ReviewStatus { kPending, kRevised, kAcceptedAsIs };

std::string_view ToString(Disagreement kind);
std::string_view ToString(ReviewStatus status);

struct RevisionItem {
  std::string id;
  std::string task_id;
  std::string raw;
  LabelSet parsed;
  LabelSet gold;
  Disagreement kind = Disagreement::kLabelMismatch;
  ParseStatus parse_status = ParseStatus::kOk;
  ReviewStatus status = ReviewStatus::kPending;
  friend bool operator==(const RevisionItem&, const RevisionItem&) = default;
};

/// Disagreed and parse-failed records in id order, one entry each.
class RevisionQueue {
 public:
  RevisionQueue() = default;
  explicit RevisionQueue(std::vector<RevisionItem> items);

  const std::vector<RevisionItem>& items() const { return items_; }
  RevisionItem* Find(std::string_view id);
  const RevisionItem* Find(std::string_view id) const;
  std::size_t pending() const;
  bool empty() const { return items_.empty(); }
  /// Inserts in id order; throws PreconditionError when the id is present.
  void Add(RevisionItem item);

  std::string ToJsonl() const;
  static RevisionQueue FromJsonl(std::string_view text, const std::string& origin = {});
  void Save(const std::filesystem::path& path) const;
  static RevisionQueue Load(const std::filesystem::path& path);

 private:
  std::vector<RevisionItem> items_;
};

struct CorrectnessResult {
  GateReport report;
  RevisionQueue queue;
};

/// Agreed means the closed parsed label set has the same members as the
/// closed gold set. Throws IdMismatchError naming records without a
/// generation.
CorrectnessResult CorrectnessGate(const Corpus& corpus,
                                  const std::map<std::string, std::string>& generations,
                                  const LabelParser& parser, const TaskRegistry& registry,
                                  const GateThresholds& thresholds = {});

/// Append-only JSONL trail of expert actions.
class RevisionLog {
 public:
  explicit RevisionLog(std::filesystem::path path) : path_(std::move(path)) {}
  void Append(const std::string& json_line) const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct RevisionContext {
  Corpus* corpus = nullptr;
  std::map<std::string, std::string>* generations = nullptr;
  const TaskRegistry* registry = nullptr;
  const RevisionLog* log = nullptr;
};

/// Writes the expert's decision and explanation back into the corpus, marks
/// the record expert_revised and replaces its generation with the canonical
/// rendering. Throws StateError when the item is not pending.
void ApplyRevision(RevisionQueue& queue, const RevisionContext& ctx, std::string_view id,
                   const LabelSet& decision, const std::string& explanation,
                   const std::string& reviewer);

/// The teacher was right: gold becomes the parsed decision. Only for label
/// mismatches; parse failures have nothing to accept.
void AcceptAsIs(RevisionQueue& queue, const RevisionContext& ctx, std::string_view id,
                const std::string& reviewer, const std::string& justification);

struct ConsistencyExport {
  Corpus corpus;
  std::vector<std::string> skipped;
};

/// Explanations take the place of the post text; decision, split and source
/// are copied. Records with an empty explanation are skipped.
ConsistencyExport ExportConsistencyCorpus(const Corpus& corpus);

/// Reads {"id", "decision"} lines.
std::map<std::string, LabelSet> LoadPredictions(const std::filesystem::path& path);
std::map<std::string, LabelSet> ParsePredictions(std::string_view text,
                                                 const std::string& origin = {});

/// Scores predictions on the derived test split and on the expert-source
/// records. Throws IdMismatchError listing ids with no prediction.
GateReport IngestConsistencyPredictions(const Corpus& derived,
                                        const std::map<std::string, LabelSet>& predictions,
                                        const TaskRegistry& registry,
                                        const GateThresholds& thresholds = {});

}  // namespace mindloom
