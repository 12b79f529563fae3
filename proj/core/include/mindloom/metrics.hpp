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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mindloom/taxonomy.hpp"

namespace mindloom {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Precision, recall and F1 as fractions in [0, 1].
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Micro pooling over every (record, label) pair, or counting only the
/// designated positive label.
struct Averaging {
  AverageMode mode = AverageMode::kMicro;
  std::string positive;

  static Averaging Micro() { return {}; }
  static Averaging BinaryPositive(std::string label) {
    return {AverageMode::kBinaryPositive, std::move(label)};
  }
  static Averaging For(const TaskSpec& task) { return {task.average_mode, task.positive_label}; }
};

/// Throws PreconditionError when gold and pred differ in length.
ConfusionCounts CountConfusion(std::span<const LabelSet> gold, std::span<const LabelSet> pred,
                               const Averaging& averaging);

/// Zero denominators give 0 rather than NaN.
Prf ComputePrf(const ConfusionCounts& counts);

/// Harmonic mean of a precision/recall pair (any common scale), 0 when both
/// are 0.
double HarmonicF1(double precision, double recall);

struct LevelMetrics {
  ConfusionCounts counts;
  Prf prf;
};

struct HierarchicalMetrics {
  LevelMetrics parent;
  LevelMetrics child;
};

/// Parent-level metrics over root codes, child-level over non-root codes,
/// both micro-pooled. Inputs must be closed under the hierarchy; anything
/// else throws PreconditionError.
HierarchicalMetrics ComputeHierarchicalMetrics(std::span<const LabelSet> gold,
                                               std::span<const LabelSet> pred,
                                               const LabelTaxonomy& taxonomy);

/// Independent cross-check: walks every (record, label) pair of the label
/// universe and tallies outcomes one at a time, then uses F1 = 2TP/(2TP+FP+FN).
/// Shares no code with CountConfusion/ComputePrf.
Prf BruteForceOracle(std::span<const LabelSet> gold, std::span<const LabelSet> pred,
                     const Averaging& averaging);

/// Metrics for one task within a run. Hierarchical tasks fill `parent` and
/// `child`; all others fill `flat`.
struct TaskMetrics {
  std::string task_id;
  TaskKind kind = TaskKind::kMultilabel;
  std::size_t n = 0;
  std::optional<LevelMetrics> flat;
  std::optional<LevelMetrics> parent;
  std::optional<LevelMetrics> child;
};

struct RunMetadata {
  std::string model;
  std::string endpoint;
  std::string prompt_mode;
  std::string parser_mode;
  std::string timestamp;
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;
};

struct MetricsReport {
  RunMetadata meta;
  std::vector<TaskMetrics> tasks;

  const TaskMetrics* Find(std::string_view task_id) const;
};

/// Builds a TaskMetrics from parallel gold/pred lists using the task's
/// averaging (hierarchical tasks get parent and child levels).
TaskMetrics EvaluateTask(const TaskSpec& task, std::span<const LabelSet> gold,
                         std::span<const LabelSet> pred);

std::string ReportToJson(const MetricsReport& report);
MetricsReport ReportFromJson(std::string_view json_text, const std::string& origin = {});

/// Percentage with two decimals, rounded half-up: 0.8512 -> "85.12".
std::string FormatPercent(double fraction);

struct ReportTable {
  std::string text;
  std::string csv;
};

/// Aligned text shaped like a results table (one row per run, F1/P/R groups
/// per task, hierarchical tasks split into parent and child groups) and a
/// CSV with one row per (model, task).
ReportTable FormatReportTable(std::span<const MetricsReport> reports);

}  // namespace mindloom
