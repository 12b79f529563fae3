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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mindloom/taxonomy.hpp"

namespace mindloom {

enum class Split { kTrain, kVal, kTest, kUnsplit };
enum class Language { kZh, kEn };

std::string_view ToString(Split split);
std::string_view ToString(Language language);
std::optional<Split> ParseSplit(std::string_view text);
std::optional<Language> ParseLanguage(std::string_view text);

/// One interpretable instruction: the (description, text, query) input and
/// the (decision, explanation) output, plus bookkeeping.
struct InstructionRecord {
  std::string id;
  std::string task_id;
  std::string description;
  std::string text;
  std::string query;
  LabelSet decision;
  std::string explanation;
  Split split = Split::kUnsplit;
  std::string source;
  Language language = Language::kZh;
  bool expert_revised = false;

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

struct Provenance {
  std::string created_at;
  std::string tool_version;
  std::optional<std::uint64_t> split_seed;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// ISO-8601 UTC, second resolution ("2026-03-01T12:00:00Z").
std::string UtcNow();
std::string_view ToolVersion();

struct Corpus {
  std::vector<InstructionRecord> records;
  Provenance provenance;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct ValidationVerdict {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks a record against its task. Throws RegistryError when the task id
/// is not registered; every other problem is reported as a violation.
ValidationVerdict ValidateRecord(const InstructionRecord& record,
                                 const TaskRegistry& registry);

/// One line of the record file, without the trailing newline.
std::string SerializeRecord(const InstructionRecord& record);
/// Parses one line; `path` and `line` are only used for error messages.
InstructionRecord ParseRecord(std::string_view line, const std::string& path = {},
                              std::size_t line_number = 0);

/// Reads a line-delimited record file and its optional provenance sidecar.
Corpus LoadCorpus(const std::filesystem::path& path);
/// Writes records sorted by id plus the provenance sidecar. Refuses
/// duplicate ids. Output bytes depend only on the corpus value.
void SaveCorpus(const Corpus& corpus, const std::filesystem::path& path);
/// Canonical serialization (records sorted by id, one per line).
std::string SerializeCorpus(const Corpus& corpus);
std::filesystem::path ProvenancePath(const std::filesystem::path& corpus_path);

struct SplitFractions {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
};

/// Largest-remainder apportionment of `n` items to `weights` (any
/// non-negative scale). The result sums to n and each entry is within 1 of
/// its exact quota.
std::vector<std::size_t> LargestRemainder(std::size_t n,
                                          const std::vector<double>& weights);

/// Stratified by task: within each task, records are ranked by a seeded hash
/// of their id and the first quota go to train, the next to val, the rest
/// to test. Independent of input order.
Corpus SplitCorpus(const Corpus& corpus, const SplitFractions& fractions,
                   std::uint64_t seed);

/// As above with per-task fractions; tasks not in `per_task` use `fractions`.
Corpus SplitCorpus(const Corpus& corpus, const SplitFractions& fractions,
                   const std::map<std::string, SplitFractions>& per_task, std::uint64_t seed);

struct TaskStats {
  /// Indexed by Split.
  std::array<std::size_t, 4> split_counts{};
  /// Label occurrence counts over every record of the task.
  std::map<std::string, std::size_t> label_histogram;
  std::size_t total() const;
};

struct CorpusStats {
  std::map<std::string, TaskStats> per_task;
  std::array<std::size_t, 4> split_totals{};
  std::size_t total = 0;
};

CorpusStats ComputeCorpusStats(const Corpus& corpus);
/// Table-style rendering: one line per task with train/val/test/unsplit.
std::string FormatCorpusStats(const CorpusStats& stats);

/// Records of one split, in id order.
Corpus SelectSplit(const Corpus& corpus, Split split);
/// SHA-256 of the canonical serialization.
std::string Fingerprint(const Corpus& corpus);

}  // namespace mindloom
