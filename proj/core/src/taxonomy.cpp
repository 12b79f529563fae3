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

#include "mindloom/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mindloom/errors.hpp"

namespace mindloom {

using json = nlohmann::ordered_json;

LabelSet::LabelSet(std::initializer_list<std::string> codes) {
  for (const auto& c : codes) Insert(c);
}

LabelSet::LabelSet(const std::vector<std::string>& codes) {
  for (const auto& c : codes) Insert(c);
}

bool LabelSet::Insert(std::string code) {
  if (Contains(code)) return false;
  codes_.push_back(std::move(code));
  return true;
}

bool LabelSet::Contains(std::string_view code) const {
  return std::find(codes_.begin(), codes_.end(), code) != codes_.end();
}

bool LabelSet::SameMembers(const LabelSet& other) const {
  if (size() != other.size()) return false;
  return std::all_of(codes_.begin(), codes_.end(),
                     [&](const std::string& c) { return other.Contains(c); });
}

LabelTaxonomy::LabelTaxonomy(std::vector<Label> labels)
    : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const Label& label = labels_[i];
    if (label.code.empty()) throw RegistryError("label with empty code");
    if (!index_.emplace(label.code, i).second) {
      throw RegistryError("duplicate label code '" + label.code + "'");
    }
  }
  for (const Label& label : labels_) {
    if (label.parent && !index_.count(*label.parent)) {
      throw RegistryError("label '" + label.code + "' references unknown parent '" +
                          *label.parent + "'");
    }
  }
  // Walking up from any node must terminate within |labels| steps.
  for (const Label& label : labels_) {
    std::size_t steps = 0;
    const Label* cursor = &label;
    while (cursor->parent) {
      if (++steps > labels_.size()) {
        throw RegistryError("cycle in taxonomy through '" + label.code + "'");
      }
      cursor = &labels_[index_.at(*cursor->parent)];
    }
  }
}

const Label* LabelTaxonomy::Find(std::string_view code) const {
  auto it = index_.find(std::string(code));
  return it == index_.end() ? nullptr : &labels_[it->second];
}

std::optional<std::string> LabelTaxonomy::ParentOf(std::string_view code) const {
  const Label* label = Find(code);
  if (!label) throw RegistryError("unknown label code '" + std::string(code) + "'");
  return label->parent;
}

bool LabelTaxonomy::HasHierarchy() const {
  return std::any_of(labels_.begin(), labels_.end(),
                     [](const Label& l) { return l.parent.has_value(); });
}

bool LabelTaxonomy::HasChildren(std::string_view code) const {
  return std::any_of(labels_.begin(), labels_.end(), [&](const Label& l) {
    return l.parent && *l.parent == code;
  });
}

std::vector<std::string> LabelTaxonomy::Roots() const {
  std::vector<std::string> out;
  for (const auto& l : labels_) {
    if (!l.parent) out.push_back(l.code);
  }
  return out;
}

std::vector<std::string> LabelTaxonomy::Children() const {
  std::vector<std::string> out;
  for (const auto& l : labels_) {
    if (l.parent) out.push_back(l.code);
  }
  return out;
}

std::vector<std::string> LabelTaxonomy::Leaves() const {
  std::vector<std::string> out;
  for (const auto& l : labels_) {
    if (!HasChildren(l.code)) out.push_back(l.code);
  }
  return out;
}

std::size_t LabelTaxonomy::OrderOf(std::string_view code) const {
  auto it = index_.find(std::string(code));
  if (it == index_.end()) {
    throw RegistryError("unknown label code '" + std::string(code) + "'");
  }
  return it->second;
}

const std::string& LabelTaxonomy::DisplayName(std::string_view code) const {
  return labels_[OrderOf(code)].name;
}

std::string_view ToString(TaskKind kind) {
  switch (kind) {
    case TaskKind::kBinary: return "binary";
    case TaskKind::kMulticlass: return "multiclass";
    case TaskKind::kMultilabel: return "multilabel";
    case TaskKind::kHierarchical: return "hierarchical";
  }
  return "?";
}

std::string_view ToString(AverageMode mode) {
  return mode == AverageMode::kBinaryPositive ? "binary_positive" : "micro";
}

TaskKind ParseTaskKind(std::string_view text) {
  if (text == "binary") return TaskKind::kBinary;
  if (text == "multiclass") return TaskKind::kMulticlass;
  if (text == "multilabel") return TaskKind::kMultilabel;
  if (text == "hierarchical") return TaskKind::kHierarchical;
  throw RegistryError("unknown task kind '" + std::string(text) + "'");
}

AverageMode ParseAverageMode(std::string_view text) {
  if (text == "binary_positive") return AverageMode::kBinaryPositive;
  if (text == "micro") return AverageMode::kMicro;
  throw RegistryError("unknown average mode '" + std::string(text) + "'");
}

void ValidateTaskSpec(const TaskSpec& spec) {
  const std::string where = "task '" + spec.task_id + "': ";
  if (spec.task_id.empty()) throw RegistryError("task with empty id");
  const auto& tax = spec.taxonomy;
  if (tax.labels().empty()) throw RegistryError(where + "empty taxonomy");

  switch (spec.kind) {
    case TaskKind::kBinary:
      if (tax.Leaves().size() != 2 || tax.HasHierarchy()) {
        throw RegistryError(where + "binary task needs exactly 2 flat labels");
      }
      if (spec.average_mode != AverageMode::kBinaryPositive) {
        throw RegistryError(where + "binary task must use binary_positive averaging");
      }
      break;
    case TaskKind::kMulticlass:
    case TaskKind::kMultilabel:
      if (tax.HasHierarchy()) {
        throw RegistryError(where + "flat task kind with a hierarchical taxonomy");
      }
      if (tax.labels().size() < 2) {
        throw RegistryError(where + "needs at least 2 labels");
      }
      break;
    case TaskKind::kHierarchical:
      if (!tax.HasHierarchy()) {
        throw RegistryError(where + "hierarchical task declares no parent");
      }
      break;
  }
  if (spec.average_mode == AverageMode::kBinaryPositive &&
      !tax.Contains(spec.positive_label)) {
    throw RegistryError(where + "positive label '" + spec.positive_label +
                        "' is not in the taxonomy");
  }
}

void TaskRegistry::Add(TaskSpec spec) {
  ValidateTaskSpec(spec);
  if (Has(spec.task_id)) {
    throw RegistryError("duplicate task id '" + spec.task_id + "'");
  }
  tasks_.push_back(std::move(spec));
}

bool TaskRegistry::Has(std::string_view task_id) const {
  return std::any_of(tasks_.begin(), tasks_.end(),
                     [&](const TaskSpec& t) { return t.task_id == task_id; });
}

const TaskSpec& TaskRegistry::Get(std::string_view task_id) const {
  for (const auto& t : tasks_) {
    if (t.task_id == task_id) return t;
  }
  throw RegistryError("unknown task id '" + std::string(task_id) + "'");
}

std::vector<std::string> TaskRegistry::TaskIds() const {
  std::vector<std::string> ids;
  for (const auto& t : tasks_) ids.push_back(t.task_id);
  return ids;
}

TaskRegistry TaskRegistry::Defaults() {
  TaskRegistry registry;

  TaskSpec sos;
  sos.task_id = "SOS-HL-1K";
  sos.kind = TaskKind::kBinary;
  sos.average_mode = AverageMode::kBinaryPositive;
  sos.positive_label = "high_risk";
  sos.description = "自杀风险检测：判断社交媒体帖子作者的自杀风险等级。";
  sos.query = "该帖子作者的自杀风险是高风险还是低风险？";
  sos.taxonomy = LabelTaxonomy({
      {"high_risk", "高风险", std::nullopt, {"高自杀风险", "high risk"}},
      {"low_risk", "低风险", std::nullopt, {"低自杀风险", "low risk"}},
  });
  registry.Add(std::move(sos));

  TaskSpec cd;
  cd.task_id = "SocialCD-3K";
  cd.kind = TaskKind::kMultilabel;
  cd.average_mode = AverageMode::kMicro;
  cd.description = "认知扭曲检测：识别帖子中出现的认知扭曲类别，可多选。";
  cd.query = "该帖子包含哪些认知扭曲类别？";
  std::vector<Label> cd_labels;
  for (int i = 1; i <= 12; ++i) {
    std::string code = (i < 10 ? "CD0" : "CD") + std::to_string(i);
    cd_labels.push_back({code, code, std::nullopt, {}});
  }
  cd.taxonomy = LabelTaxonomy(std::move(cd_labels));
  registry.Add(std::move(cd));

  TaskSpec cp;
  cp.task_id = "CP";
  cp.kind = TaskKind::kHierarchical;
  cp.average_mode = AverageMode::kMicro;
  cp.description = "认知路径抽取：判断句子属于哪些认知路径父类及子类。";
  cp.query = "该句子属于哪些认知路径类别？";
  std::vector<Label> cp_labels;
  constexpr int kChildrenPerParent[] = {4, 6, 5, 4};
  for (int p = 1; p <= 4; ++p) {
    const std::string parent = "P" + std::to_string(p);
    cp_labels.push_back({parent, parent, std::nullopt, {}});
    for (int c = 1; c <= kChildrenPerParent[p - 1]; ++c) {
      const std::string child = parent + "." + std::to_string(c);
      cp_labels.push_back({child, child, parent, {}});
    }
  }
  cp.taxonomy = LabelTaxonomy(std::move(cp_labels));
  registry.Add(std::move(cp));

  return registry;
}

namespace {

std::vector<std::string> StringList(const json& node, const std::string& origin,
                                    const std::string& field) {
  if (!node.is_array()) throw FormatError(origin, 0, field, "expected an array");
  std::vector<std::string> out;
  for (const auto& v : node) {
    if (!v.is_string()) throw FormatError(origin, 0, field, "expected strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string RequiredString(const json& node, const char* key,
                           const std::string& origin) {
  if (!node.contains(key) || !node[key].is_string()) {
    throw FormatError(origin, 0, key, "missing or not a string");
  }
  return node[key].get<std::string>();
}

}  // namespace

TaskRegistry TaskRegistry::FromJson(std::string_view json_text,
                                    const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(origin, 0, "", e.what());
  }
  TaskRegistry registry;
  if (root.contains("markers")) {
    MarkerSet markers;
    const auto& m = root["markers"];
    if (m.contains("label")) markers.label = StringList(m["label"], origin, "markers.label");
    if (m.contains("explanation")) {
      markers.explanation = StringList(m["explanation"], origin, "markers.explanation");
    }
    if (markers.label.empty() || markers.explanation.empty()) {
      throw FormatError(origin, 0, "markers", "marker lists must be non-empty");
    }
    registry.set_markers(std::move(markers));
  }
  if (!root.contains("tasks") || !root["tasks"].is_array()) {
    throw FormatError(origin, 0, "tasks", "missing task list");
  }
  for (const auto& t : root["tasks"]) {
    TaskSpec spec;
    spec.task_id = RequiredString(t, "task_id", origin);
    spec.kind = ParseTaskKind(RequiredString(t, "kind", origin));
    spec.average_mode = ParseAverageMode(
        t.value("average", spec.kind == TaskKind::kBinary ? "binary_positive" : "micro"));
    spec.positive_label = t.value("positive", "");
    spec.description = t.value("description", "");
    spec.query = t.value("query", "");
    if (!t.contains("labels") || !t["labels"].is_array()) {
      throw FormatError(origin, 0, "labels", "task '" + spec.task_id + "' has no labels");
    }
    std::vector<Label> labels;
    for (const auto& l : t["labels"]) {
      Label label;
      label.code = RequiredString(l, "code", origin);
      label.name = l.value("name", label.code);
      if (l.contains("parent") && !l["parent"].is_null()) {
        label.parent = l["parent"].get<std::string>();
      }
      if (l.contains("synonyms")) label.synonyms = StringList(l["synonyms"], origin, "synonyms");
      labels.push_back(std::move(label));
    }
    spec.taxonomy = LabelTaxonomy(std::move(labels));
    registry.Add(std::move(spec));
  }
  return registry;
}

TaskRegistry TaskRegistry::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read taxonomy file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromJson(buffer.str(), path.string());
}

std::string TaskRegistry::ToJson() const {
  json root;
  root["markers"] = {{"label", markers_.label}, {"explanation", markers_.explanation}};
  json tasks = json::array();
  for (const auto& t : tasks_) {
    json node;
    node["task_id"] = t.task_id;
    node["kind"] = ToString(t.kind);
    node["average"] = ToString(t.average_mode);
    if (!t.positive_label.empty()) node["positive"] = t.positive_label;
    node["description"] = t.description;
    node["query"] = t.query;
    json labels = json::array();
    for (const auto& l : t.taxonomy.labels()) {
      json ln;
      ln["code"] = l.code;
      ln["name"] = l.name;
      if (l.parent) ln["parent"] = *l.parent;
      if (!l.synonyms.empty()) ln["synonyms"] = l.synonyms;
      labels.push_back(std::move(ln));
    }
    node["labels"] = std::move(labels);
    tasks.push_back(std::move(node));
  }
  root["tasks"] = std::move(tasks);
  return root.dump(2, ' ', false) + "\n";
}

}  // namespace mindloom
