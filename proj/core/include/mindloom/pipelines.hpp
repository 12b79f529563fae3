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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mindloom/corpus.hpp"
#include "mindloom/gateway.hpp"
#include "mindloom/gates.hpp"
#include "mindloom/metrics.hpp"
#include "mindloom/parser.hpp"
#include "mindloom/prompt.hpp"

namespace mindloom {

enum class FlowKind { kDistill, kBench };
std::string_view ToString(FlowKind flow);

enum class RunState { kRunning, kPaused, kComplete };
std::string_view ToString(RunState state);

/// manifest.json in a run directory. Everything except the timing fields
/// and counters identifies the run; resuming with different inputs is
/// refused.
struct RunManifest {
  std::string run_id;
  FlowKind flow = FlowKind::kDistill;
  std::string endpoint_name;
  std::string endpoint_hash;
  std::string model;
  std::string template_id;
  std::string parser_mode;
  std::string prompt_mode;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;
  std::size_t total = 0;
  std::size_t completed = 0;
  std::size_t requests_issued = 0;
  RunState state = RunState::kRunning;
  std::map<std::string, std::string> failures;
  std::string created_at;
  std::string updated_at;

  /// True when both manifests describe the same run inputs.
  bool SameRun(const RunManifest& other) const;
  std::string ToJson() const;
  static RunManifest FromJson(std::string_view text, const std::string& origin = {});
};

/// Per-record checkpoint: checkpoint/generations.jsonl, one {"id","raw"}
/// line per finished request in arrival order. A torn final line (no
/// newline) is dropped and truncated away on open.
class Checkpoint {
 public:
  explicit Checkpoint(std::filesystem::path path);
  const std::map<std::string, std::string>& entries() const { return entries_; }
  bool Has(const std::string& id) const { return entries_.count(id) > 0; }
  void Append(const std::string& id, const std::string& raw);

 private:
  std::filesystem::path path_;
  std::map<std::string, std::string> entries_;
};

struct RunOptions {
  std::filesystem::path out_dir;
  ParseMode parse_mode = ParseMode::kStrict;
  /// Stop after this many new requests; the run is left paused.
  std::optional<std::size_t> max_requests;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct DistillInputs {
  const Corpus* corpus = nullptr;
  const ExemplarSet* exemplars = nullptr;
  const PromptTemplate* tmpl = nullptr;
  const TaskRegistry* registry = nullptr;
  DistillOptions options;
  GateThresholds thresholds;
};

struct DistillResult {
  RunManifest manifest;
  std::size_t issued = 0;
  std::map<std::string, std::string> generations;
  /// Set once every record has a generation.
  std::optional<CorrectnessResult> gate;
  std::optional<Corpus> distilled;
  bool complete() const { return gate.has_value(); }
};

/// Writes checkpoint/, manifest.json and, when complete, generations.jsonl,
/// distilled.jsonl, gate_report.csv, gate_summary.txt and
/// revision_queue.jsonl into `options.out_dir`.
DistillResult RunDistillation(const DistillInputs& inputs, const GatewayClient& client,
                              const RunOptions& options);

struct BenchInputs {
  /// The full corpus; only its test split is evaluated and fingerprinted.
  const Corpus* corpus = nullptr;
  const PromptTemplate* tmpl = nullptr;
  const TaskRegistry* registry = nullptr;
  /// 0 is zero-shot. Exemplars come from the corpus train split.
  std::size_t k = 0;
  std::uint64_t seed = 0;
  /// Row label in reports; defaults to the endpoint model.
  std::string label;
};

struct Prediction {
  std::string id;
  std::string task_id;
  std::string raw;
  LabelSet decision;
  ParseStatus status = ParseStatus::kOk;
};

struct BenchResult {
  RunManifest manifest;
  std::size_t issued = 0;
  std::vector<Prediction> predictions;
  std::optional<MetricsReport> report;
  bool complete() const { return report.has_value(); }
};

/// Writes checkpoint/, manifest.json and, when complete, predictions.jsonl,
/// report.json and report.csv.
BenchResult RunBenchmark(const BenchInputs& inputs, const GatewayClient& client,
                         const RunOptions& options);

/// Reads the canonical generations.jsonl written by a distillation run.
std::map<std::string, std::string> LoadGenerations(const std::filesystem::path& path);
std::string SerializeGenerations(const std::map<std::string, std::string>& generations,
                                 const Corpus& corpus);

struct ComparisonTable {
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  /// f1[row][column]; missing cells are nullopt.
  std::vector<std::vector<std::optional<double>>> f1;
  std::string text;
  std::string csv;
};

/// One row per report with an F1 column per task (parent and child columns
/// for hierarchical tasks) and deltas against `reports[baseline]`. Refuses
/// fewer than two reports or differing dataset fingerprints.
ComparisonTable CompareRuns(std::span<const MetricsReport> reports, std::size_t baseline = 0);

}  // namespace mindloom
