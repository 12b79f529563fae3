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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mindloom/corpus.hpp"
#include "mindloom/taxonomy.hpp"

namespace mindloom {

enum class TemplateKind { kDistill, kEval };

/// A three-section prompt (task instruction, expert examples, target query)
/// with {{placeholder}} slots. Loaded from a plain-text file:
///
///   @id sos-distill-zh
///   @kind distill
///   @header instruction 【任务说明】
///   @header examples 【专家示例】
///   @header query 【目标帖子】
///   @header exemplar 【示例{{index}}】
///   @@instruction
///   ...body...
///   @@exemplar
///   ...body, rendered once per exemplar...
///   @@query
///   ...body...
class PromptTemplate {
 public:
  static PromptTemplate Parse(std::string_view source, const std::string& origin = {});
  static PromptTemplate Load(const std::filesystem::path& path);
  static PromptTemplate BuiltinDistill();
  static PromptTemplate BuiltinEval();

  const std::string& id() const { return id_; }
  TemplateKind kind() const { return kind_; }
  const std::string& instruction_header() const { return instruction_header_; }
  const std::string& examples_header() const { return examples_header_; }
  const std::string& query_header() const { return query_header_; }
  const std::string& exemplar_header() const { return exemplar_header_; }
  const std::string& instruction_body() const { return instruction_; }
  const std::string& exemplar_body() const { return exemplar_; }
  const std::string& query_body() const { return query_; }
  /// True when the query section references the gold labels.
  bool QueryUsesGold() const;

 private:
  std::string id_;
  TemplateKind kind_ = TemplateKind::kDistill;
  std::string instruction_header_ = "【任务说明】";
  std::string examples_header_ = "【专家示例】";
  std::string query_header_ = "【目标帖子】";
  std::string exemplar_header_ = "【示例{{index}}】";
  std::string instruction_;
  std::string exemplar_;
  std::string query_;
};

/// Expert-written (text, decision, explanation) examples, stored in the
/// record format with source "expert".
class ExemplarSet {
 public:
  ExemplarSet() = default;
  explicit ExemplarSet(std::vector<InstructionRecord> records);
  static ExemplarSet Load(const std::filesystem::path& path);

  const std::vector<InstructionRecord>& records() const { return records_; }
  /// Exemplars of one task, in id order.
  std::vector<InstructionRecord> ForTask(std::string_view task_id) const;
  bool empty() const { return records_.empty(); }

 private:
  std::vector<InstructionRecord> records_;
};

enum class CoverageMode { kAll, kPerLabel };

struct DistillOptions {
  CoverageMode coverage = CoverageMode::kPerLabel;
  /// Exemplars drawn per gold label in per-label mode.
  std::size_t per_label = 2;
};

/// Teacher prompt: instruction, the selected exemplars verbatim, then the
/// target text with its gold labels. Throws PreconditionError when the
/// record has no gold decision or, in per-label mode, a gold label has no
/// exemplar.
std::string RenderDistillationPrompt(const InstructionRecord& record, const ExemplarSet& exemplars,
                                     const PromptTemplate& tmpl, const TaskSpec& task,
                                     const DistillOptions& options = {});

/// Zero-shot when `shots` is empty. Throws LeakageError when a shot is not
/// from the train split, is the target itself, or the template's query
/// section references gold labels.
std::string RenderEvalPrompt(const InstructionRecord& record,
                             const std::vector<InstructionRecord>& shots,
                             const PromptTemplate& tmpl, const TaskSpec& task);

/// Deterministic in `seed`. When k covers every leaf label, one exemplar per
/// leaf is taken first (where available) and the rest filled by rank.
std::vector<InstructionRecord> SelectExemplars(const TaskSpec& task, const ExemplarSet& pool,
                                               std::size_t k, std::uint64_t seed);

struct PromptSections {
  std::string instruction;
  std::optional<std::string> examples;
  std::string query;
  std::size_t exemplar_blocks = 0;
};

/// Recovers each section of a rendered prompt using the template's headers.
/// Throws FormatError when a header is missing.
PromptSections SplitPromptSections(std::string_view prompt, const PromptTemplate& tmpl);

}  // namespace mindloom
