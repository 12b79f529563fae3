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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mindloom/taxonomy.hpp"

namespace mindloom {

enum class ParseMode { kStrict, kLenient };
enum class ParseStatus { kOk, kNoMarker, kUnknownLabel, kEmptyDecision };

std::string_view ToString(ParseMode mode);
std::string_view ToString(ParseStatus status);
ParseMode ParseParseMode(std::string_view text);

/// Byte range into the raw generation.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct ParserConfig {
  MarkerSet markers;
  /// task_id -> (surface form, code), on top of each label's code, display
  /// name and declared synonyms.
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> extra_synonyms;
  /// Separators inside a label line. Matched after width folding, so the
  /// full-width variants are covered by their ASCII forms.
  std::vector<std::string> delimiters = {"、", ",", ";", "/", "|"};
  /// Add missing parents to hierarchical decisions.
  bool closure = true;
  ParseMode mode = ParseMode::kStrict;

  static ParserConfig For(const TaskRegistry& registry, ParseMode mode);
};

/// Folded surface form -> code for one task. Construction throws
/// RegistryError when one surface form would map to two codes.
class SynonymTable {
 public:
  SynonymTable(const TaskSpec& task, const ParserConfig& config);
  std::optional<std::string> Lookup(std::string_view surface) const;
  /// (width-folded surface, code) pairs, longest surface first.
  const std::vector<std::pair<std::string, std::string>>& surfaces() const { return surfaces_; }

 private:
  std::unordered_map<std::string, std::string> by_key_;
  std::vector<std::pair<std::string, std::string>> surfaces_;
};

struct ParsedOutput {
  LabelSet decision;
  std::string explanation;
  ParseStatus status = ParseStatus::kNoMarker;
  /// Label tokens that matched nothing in the synonym table.
  std::vector<std::string> unknown;
  std::optional<Span> label_span;
  std::optional<Span> explanation_span;

  bool ok() const { return status == ParseStatus::kOk; }
};

struct NormalizedLabels {
  LabelSet codes;
  std::vector<std::string> unknown;
};

/// Looks each surface form up after width/space folding. Unknown forms are
/// reported, never guessed.
NormalizedLabels NormalizeLabels(const std::vector<std::string>& surfaces,
                                 const SynonymTable& table);
NormalizedLabels NormalizeLabels(const std::vector<std::string>& surfaces,
                                 const TaskSpec& task, const ParserConfig& config);

/// decision plus the ancestors of every code in it. Existing order is kept
/// and missing ancestors are appended in declaration order. Throws
/// RegistryError on unknown codes.
LabelSet HierarchyClosure(const LabelSet& decision, const LabelTaxonomy& taxonomy);
bool IsClosed(const LabelSet& decision, const LabelTaxonomy& taxonomy);

ParsedOutput ParseGeneration(std::string_view raw, const TaskSpec& task,
                             const ParserConfig& config);

/// Parses generations for many tasks without rebuilding synonym tables.
class LabelParser {
 public:
  LabelParser(const TaskRegistry& registry, ParserConfig config);
  ParsedOutput Parse(std::string_view raw, std::string_view task_id) const;
  const ParserConfig& config() const { return config_; }

 private:
  TaskRegistry registry_;
  ParserConfig config_;
  std::map<std::string, SynonymTable, std::less<>> tables_;
};

/// How the canonical target format is written out.
struct CanonicalStyle {
  std::string label_marker = "标签";
  std::string explanation_marker = "解释";
  std::string separator = ": ";
  std::string delimiter = "、";
  bool display_names = true;
};

/// "标签: <labels>\n解释: <explanation>".
std::string RenderCanonical(const LabelSet& decision, std::string_view explanation,
                            const TaskSpec& task, const CanonicalStyle& style = {});
/// Only the label list part of the canonical line.
std::string RenderLabelList(const LabelSet& decision, const TaskSpec& task,
                            const CanonicalStyle& style = {});

}  // namespace mindloom
