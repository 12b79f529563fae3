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

#include "mindloom/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "json.hpp"
#include "mindloom/errors.hpp"

namespace mindloom {

using json = nlohmann::ordered_json;

namespace {

void CheckLengths(std::span<const LabelSet> gold, std::span<const LabelSet> pred) {
  if (gold.size() != pred.size()) {
    throw PreconditionError(fmt::format("gold has {} entries but pred has {}", gold.size(),
                                        pred.size()));
  }
}

ConfusionCounts MicroCounts(const LabelSet& gold, const LabelSet& pred,
                            const std::vector<std::string>* restrict_to) {
  auto keep = [&](const std::string& code) {
    return !restrict_to ||
           std::find(restrict_to->begin(), restrict_to->end(), code) != restrict_to->end();
  };
  ConfusionCounts c;
  for (const auto& code : pred) {
    if (!keep(code)) continue;
    if (gold.Contains(code)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const auto& code : gold) {
    if (keep(code) && !pred.Contains(code)) ++c.fn;
  }
  return c;
}

}  // namespace

ConfusionCounts CountConfusion(std::span<const LabelSet> gold, std::span<const LabelSet> pred,
                               const Averaging& averaging) {
  CheckLengths(gold, pred);
  ConfusionCounts total;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (averaging.mode == AverageMode::kMicro) {
      total += MicroCounts(gold[i], pred[i], nullptr);
    } else {
      const bool g = gold[i].Contains(averaging.positive);
      const bool p = pred[i].Contains(averaging.positive);
      if (g && p) ++total.tp;
      if (!g && p) ++total.fp;
      if (g && !p) ++total.fn;
    }
  }
  return total;
}

Prf ComputePrf(const ConfusionCounts& c) {
  Prf out;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) out.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = tp / static_cast<double>(c.tp + c.fn);
  out.f1 = HarmonicF1(out.precision, out.recall);
  return out;
}

double HarmonicF1(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

HierarchicalMetrics ComputeHierarchicalMetrics(std::span<const LabelSet> gold,
                                               std::span<const LabelSet> pred,
                                               const LabelTaxonomy& taxonomy) {
  CheckLengths(gold, pred);
  auto check_closed = [&](std::span<const LabelSet> sets, const char* which) {
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (const auto& code : sets[i]) {
        if (!taxonomy.Contains(code)) {
          throw PreconditionError(fmt::format("{}[{}] has unknown code '{}'", which, i, code));
        }
        auto parent = taxonomy.ParentOf(code);
        if (parent && !sets[i].Contains(*parent)) {
          throw PreconditionError(fmt::format("{}[{}] is not closed: '{}' without '{}'", which,
                                              i, code, *parent));
        }
      }
    }
  };
  check_closed(gold, "gold");
  check_closed(pred, "pred");

  const auto roots = taxonomy.Roots();
  const auto children = taxonomy.Children();
  HierarchicalMetrics out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    out.parent.counts += MicroCounts(gold[i], pred[i], &roots);
    out.child.counts += MicroCounts(gold[i], pred[i], &children);
  }
  out.parent.prf = ComputePrf(out.parent.counts);
  out.child.prf = ComputePrf(out.child.counts);
  return out;
}

TaskMetrics EvaluateTask(const TaskSpec& task, std::span<const LabelSet> gold,
                         std::span<const LabelSet> pred) {
  TaskMetrics m;
  m.task_id = task.task_id;
  m.kind = task.kind;
  m.n = gold.size();
  if (task.kind == TaskKind::kHierarchical) {
    const auto h = ComputeHierarchicalMetrics(gold, pred, task.taxonomy);
    m.parent = h.parent;
    m.child = h.child;
  } else {
    LevelMetrics level;
    level.counts = CountConfusion(gold, pred, Averaging::For(task));
    level.prf = ComputePrf(level.counts);
    m.flat = level;
  }
  return m;
}

const TaskMetrics* MetricsReport::Find(std::string_view task_id) const {
  for (const auto& t : tasks) {
    if (t.task_id == task_id) return &t;
  }
  return nullptr;
}

std::string FormatPercent(double fraction) {
  const double scaled = std::floor(fraction * 10000.0 + 0.5 + 1e-9);
  const auto hundredths = static_cast<long long>(scaled);
  return fmt::format("{}.{:02}", hundredths / 100, hundredths % 100);
}

namespace {

json LevelToJson(const LevelMetrics& level) {
  json node;
  node["tp"] = level.counts.tp;
  node["fp"] = level.counts.fp;
  node["fn"] = level.counts.fn;
  node["precision"] = level.prf.precision;
  node["recall"] = level.prf.recall;
  node["f1"] = level.prf.f1;
  return node;
}

LevelMetrics LevelFromJson(const json& node) {
  LevelMetrics level;
  level.counts.tp = node.at("tp").get<std::uint64_t>();
  level.counts.fp = node.at("fp").get<std::uint64_t>();
  level.counts.fn = node.at("fn").get<std::uint64_t>();
  level.prf = ComputePrf(level.counts);
  return level;
}

}  // namespace

std::string ReportToJson(const MetricsReport& report) {
  json root;
  root["meta"] = {{"model", report.meta.model},
                  {"endpoint", report.meta.endpoint},
                  {"prompt_mode", report.meta.prompt_mode},
                  {"parser_mode", report.meta.parser_mode},
                  {"timestamp", report.meta.timestamp},
                  {"seed", report.meta.seed},
                  {"dataset_fingerprint", report.meta.dataset_fingerprint}};
  json tasks = json::array();
  for (const auto& t : report.tasks) {
    json node;
    node["task_id"] = t.task_id;
    node["kind"] = ToString(t.kind);
    node["n"] = t.n;
    if (t.flat) node["flat"] = LevelToJson(*t.flat);
    if (t.parent) node["parent"] = LevelToJson(*t.parent);
    if (t.child) node["child"] = LevelToJson(*t.child);
    tasks.push_back(std::move(node));
  }
  root["tasks"] = std::move(tasks);
  return root.dump(2) + "\n";
}

MetricsReport ReportFromJson(std::string_view json_text, const std::string& origin) {
  MetricsReport report;
  try {
    const json root = json::parse(json_text);
    const auto& meta = root.at("meta");
    report.meta.model = meta.value("model", "");
    report.meta.endpoint = meta.value("endpoint", "");
    report.meta.prompt_mode = meta.value("prompt_mode", "");
    report.meta.parser_mode = meta.value("parser_mode", "");
    report.meta.timestamp = meta.value("timestamp", "");
    report.meta.seed = meta.value("seed", std::uint64_t{0});
    report.meta.dataset_fingerprint = meta.value("dataset_fingerprint", "");
    for (const auto& node : root.at("tasks")) {
      TaskMetrics t;
      t.task_id = node.at("task_id").get<std::string>();
      t.kind = ParseTaskKind(node.at("kind").get<std::string>());
      t.n = node.value("n", std::size_t{0});
      if (node.contains("flat")) t.flat = LevelFromJson(node["flat"]);
      if (node.contains("parent")) t.parent = LevelFromJson(node["parent"]);
      if (node.contains("child")) t.child = LevelFromJson(node["child"]);
      report.tasks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(origin, 0, "", std::string("bad metrics report: ") + e.what());
  }
  return report;
}

ReportTable FormatReportTable(std::span<const MetricsReport> reports) {
  struct Group {
    std::string title;
    std::string task_id;
    int level;  // 0 flat, 1 parent, 2 child
  };
  std::vector<Group> groups;
  auto has_group = [&](const std::string& title) {
    return std::any_of(groups.begin(), groups.end(),
                       [&](const Group& g) { return g.title == title; });
  };
  for (const auto& r : reports) {
    for (const auto& t : r.tasks) {
      if (t.flat && !has_group(t.task_id)) groups.push_back({t.task_id, t.task_id, 0});
      if (t.parent && !has_group(t.task_id + "_Parent")) {
        groups.push_back({t.task_id + "_Parent", t.task_id, 1});
      }
      if (t.child && !has_group(t.task_id + "_Child")) {
        groups.push_back({t.task_id + "_Child", t.task_id, 2});
      }
    }
  }
  auto level_of = [](const TaskMetrics& t, int level) -> const LevelMetrics* {
    const std::optional<LevelMetrics>* slot =
        level == 0 ? &t.flat : (level == 1 ? &t.parent : &t.child);
    return *slot ? &**slot : nullptr;
  };

  std::size_t model_width = 5;
  for (const auto& r : reports) model_width = std::max(model_width, r.meta.model.size());
  constexpr std::size_t kCell = 7;
  const std::size_t group_width = 3 * kCell + 2;

  ReportTable table;
  std::string& text = table.text;
  text += fmt::format("{:<{}}", "Model", model_width);
  for (const auto& g : groups) text += fmt::format(" | {:^{}}", g.title, group_width);
  text += "\n";
  text += fmt::format("{:<{}}", "", model_width);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    text += fmt::format(" | {:>{}} {:>{}} {:>{}}", "F1", kCell, "P", kCell, "R", kCell);
  }
  text += "\n";
  for (const auto& r : reports) {
    text += fmt::format("{:<{}}", r.meta.model, model_width);
    for (const auto& g : groups) {
      const TaskMetrics* t = r.Find(g.task_id);
      const LevelMetrics* lv = t ? level_of(*t, g.level) : nullptr;
      if (lv) {
        text += fmt::format(" | {:>{}} {:>{}} {:>{}}", FormatPercent(lv->prf.f1), kCell,
                            FormatPercent(lv->prf.precision), kCell,
                            FormatPercent(lv->prf.recall), kCell);
      } else {
        text += fmt::format(" | {:>{}} {:>{}} {:>{}}", "-", kCell, "-", kCell, "-", kCell);
      }
    }
    text += "\n";
  }

  std::string& csv = table.csv;
  csv =
      "model,task,n,f1,precision,recall,parent_f1,parent_precision,parent_recall,"
      "child_f1,child_precision,child_recall\n";
  auto cells = [](const std::optional<LevelMetrics>& lv) {
    if (!lv) return std::string(",,");
    return FormatPercent(lv->prf.f1) + "," + FormatPercent(lv->prf.precision) + "," +
           FormatPercent(lv->prf.recall);
  };
  for (const auto& r : reports) {
    for (const auto& t : r.tasks) {
      csv += fmt::format("{},{},{},{},{},{}\n", r.meta.model, t.task_id, t.n, cells(t.flat),
                         cells(t.parent), cells(t.child));
    }
  }
  return table;
}

}  // namespace mindloom
