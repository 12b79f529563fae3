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
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mindloom {

/// Insertion-ordered set of label codes. Equality is order-sensitive (it is
/// what the corpus round-trip compares); use SameMembers for set semantics.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::initializer_list<std::string> codes);
  explicit LabelSet(const std::vector<std::string>& codes);

  /// Appends `code` unless already present. Returns whether it was added.
  bool Insert(std::string code);
  bool Contains(std::string_view code) const;
  bool SameMembers(const LabelSet& other) const;

  std::size_t size() const { return codes_.size(); }
  bool empty() const { return codes_.empty(); }
  auto begin() const { return codes_.begin(); }
  auto end() const { return codes_.end(); }
  const std::vector<std::string>& codes() const { return codes_; }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::string> codes_;
};

struct Label {
  std::string code;
  std::string name;
  std::optional<std::string> parent;
  /// Extra surface forms accepted by the parser besides code and name.
  std::vector<std::string> synonyms;

  friend bool operator==(const Label&, const Label&) = default;
};

/// A validated label vocabulary. Codes are unique, parent references
/// resolve and the parent graph is acyclic.
class LabelTaxonomy {
 public:
  LabelTaxonomy() = default;
  explicit LabelTaxonomy(std::vector<Label> labels);

  const std::vector<Label>& labels() const { return labels_; }
  const Label* Find(std::string_view code) const;
  bool Contains(std::string_view code) const { return Find(code) != nullptr; }
  /// Direct parent, or nullopt for a root.
  std::optional<std::string> ParentOf(std::string_view code) const;
  bool HasHierarchy() const;
  bool HasChildren(std::string_view code) const;

  /// Codes without a parent, in declaration order.
  std::vector<std::string> Roots() const;
  /// Codes with a parent, in declaration order.
  std::vector<std::string> Children() const;
  /// Codes with no children, in declaration order.
  std::vector<std::string> Leaves() const;
  /// Position in declaration order; throws RegistryError for unknown codes.
  std::size_t OrderOf(std::string_view code) const;
  const std::string& DisplayName(std::string_view code) const;

  friend bool operator==(const LabelTaxonomy& a, const LabelTaxonomy& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<Label> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class TaskKind { kBinary, kMulticlass, kMultilabel, kHierarchical };
enum class AverageMode { kBinaryPositive, kMicro };

std::string_view ToString(TaskKind kind);
std::string_view ToString(AverageMode mode);
TaskKind ParseTaskKind(std::string_view text);
AverageMode ParseAverageMode(std::string_view text);

struct TaskSpec {
  std::string task_id;
  TaskKind kind = TaskKind::kMultilabel;
  LabelTaxonomy taxonomy;
  AverageMode average_mode = AverageMode::kMicro;
  /// Designated positive label when average_mode is kBinaryPositive.
  std::string positive_label;
  /// Default task description and query used when building records.
  std::string description;
  std::string query;

  bool SingleLabel() const {
    return kind == TaskKind::kBinary || kind == TaskKind::kMulticlass;
  }
};

/// Throws RegistryError when the kind/taxonomy/averaging combination is
/// inconsistent (e.g. a binary task without exactly two leaves).
void ValidateTaskSpec(const TaskSpec& spec);

/// Marker words that introduce the label line and the explanation in a
/// generation. Matching is width- and case-folded.
struct MarkerSet {
  std::vector<std::string> label = {"标签", "label", "labels"};
  std::vector<std::string> explanation = {"解释", "reasoning", "explanation"};

  friend bool operator==(const MarkerSet&, const MarkerSet&) = default;
};

class TaskRegistry {
 public:
  void Add(TaskSpec spec);
  bool Has(std::string_view task_id) const;
  /// Throws RegistryError for an unknown id.
  const TaskSpec& Get(std::string_view task_id) const;
  std::vector<std::string> TaskIds() const;

  const MarkerSet& markers() const { return markers_; }
  void set_markers(MarkerSet markers) { markers_ = std::move(markers); }

  /// SOS-HL-1K (binary), SocialCD-3K (12 flat codes) and CP (4 parents,
  /// 19 children) with placeholder codes.
  static TaskRegistry Defaults();
  static TaskRegistry FromJson(std::string_view json_text,
                               const std::string& origin = "<taxonomy>");
  static TaskRegistry Load(const std::filesystem::path& path);
  std::string ToJson() const;

 private:
  std::vector<TaskSpec> tasks_;
  MarkerSet markers_;
};

}  // namespace mindloom
