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

#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <unistd.h>

namespace mindloom::fixtures {

namespace {

// Filler sentences so records look like posts rather than bare ids.
constexpr const char* kFragments[] = {
    "最近总是睡不好，脑子里反复想同一件事。", "今天和朋友出去走了走，心情好了一些。",
    "感觉所有人都在看不起我。",             "工作又出错了，我是不是什么都做不好。",
    "不知道坚持下去还有什么意义。",         "家里人不理解我，说我想太多。",
    "如果那次考试没考好，我的人生就完了。", "周末去爬山，风景很好。",
};

std::string Slug(const std::string& task_id) {
  std::string out;
  for (char c : task_id) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(c));
  }
  return out;
}

}  // namespace

TaskRegistry FourKindRegistry() {
  TaskRegistry registry = TaskRegistry::Defaults();
  TaskSpec emo;
  emo.task_id = kMulticlassTask;
  emo.kind = TaskKind::kMulticlass;
  emo.average_mode = AverageMode::kMicro;
  emo.description = "情绪分类：判断帖子表达的主要情绪。";
  emo.query = "该帖子的主要情绪是什么？";
  emo.taxonomy = LabelTaxonomy({
      {"joy", "喜悦", std::nullopt, {}},
      {"anger", "愤怒", std::nullopt, {}},
      {"fear", "恐惧", std::nullopt, {}},
      {"sadness", "悲伤", std::nullopt, {}},
  });
  registry.Add(std::move(emo));
  return registry;
}

LabelSet RandomDecision(const TaskSpec& task, std::mt19937_64& rng) {
  const auto& labels = task.taxonomy.labels();
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  LabelSet out;
  switch (task.kind) {
    case TaskKind::kBinary:
    case TaskKind::kMulticlass:
      out.Insert(labels[pick(labels.size())].code);
      return out;
    case TaskKind::kMultilabel: {
      const std::size_t k = 1 + pick(3);
      std::vector<std::string> chosen;
      while (chosen.size() < k) {
        const auto& code = labels[pick(labels.size())].code;
        if (std::find(chosen.begin(), chosen.end(), code) == chosen.end()) chosen.push_back(code);
      }
      std::sort(chosen.begin(), chosen.end(), [&](const auto& a, const auto& b) {
        return task.taxonomy.OrderOf(a) < task.taxonomy.OrderOf(b);
      });
      for (auto& c : chosen) out.Insert(c);
      return out;
    }
    case TaskKind::kHierarchical: {
      const auto children = task.taxonomy.Children();
      const auto roots = task.taxonomy.Roots();
      std::vector<std::string> chosen;
      // Mostly child labels; now and then a bare parent.
      if (pick(8) == 0) {
        chosen.push_back(roots[pick(roots.size())]);
      } else {
        const std::size_t k = 1 + pick(2);
        while (chosen.size() < k) {
          const auto& code = children[pick(children.size())];
          if (std::find(chosen.begin(), chosen.end(), code) == chosen.end()) chosen.push_back(code);
        }
        for (std::size_t i = 0, n = chosen.size(); i < n; ++i) {
          const auto parent = *task.taxonomy.ParentOf(chosen[i]);
          if (std::find(chosen.begin(), chosen.end(), parent) == chosen.end()) {
            chosen.push_back(parent);
          }
        }
      }
      std::sort(chosen.begin(), chosen.end(), [&](const auto& a, const auto& b) {
        return task.taxonomy.OrderOf(a) < task.taxonomy.OrderOf(b);
      });
      for (auto& c : chosen) out.Insert(c);
      return out;
    }
  }
  return out;
}

std::vector<InstructionRecord> MakeRecords(const TaskSpec& task, std::size_t count,
                                           std::uint64_t seed, const std::string& prefix,
                                           const DecisionFn& decide) {
  std::mt19937_64 rng(seed ^ std::hash<std::string>{}(task.task_id));
  std::vector<InstructionRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    InstructionRecord r;
    r.id = fmt::format("{}-{}-{:05d}", prefix, Slug(task.task_id), i);
    r.task_id = task.task_id;
    r.description = task.description;
    r.query = task.query;
    r.text = fmt::format("{}{}", kFragments[(i * 7 + seed) % std::size(kFragments)],
                         kFragments[(i * 3 + 1) % std::size(kFragments)]);
    r.decision = decide ? decide(task, i, rng) : RandomDecision(task, rng);
    r.source = "fixture";
    out.push_back(std::move(r));
  }
  return out;
}

Corpus MakeCorpus(const TaskRegistry& registry, std::size_t per_task, std::uint64_t seed) {
  Corpus corpus;
  corpus.provenance = {"2026-01-01T00:00:00Z", "fixture", std::nullopt};
  for (const auto& id : registry.TaskIds()) {
    auto records = MakeRecords(registry.Get(id), per_task, seed);
    corpus.records.insert(corpus.records.end(), records.begin(), records.end());
  }
  return corpus;
}

Corpus MakeFullScaleCorpus(std::uint64_t seed) {
  const TaskRegistry registry = TaskRegistry::Defaults();
  Corpus corpus;
  corpus.provenance = {"2026-01-01T00:00:00Z", "fixture", std::nullopt};
  const std::pair<const char*, std::size_t> sizes[] = {
      {"SOS-HL-1K", 1249}, {"SocialCD-3K", 3407}, {"CP", 4595}};
  for (const auto& [task, n] : sizes) {
    auto records = MakeRecords(registry.Get(task), n, seed);
    corpus.records.insert(corpus.records.end(), records.begin(), records.end());
  }
  return corpus;
}

ExemplarSet MakeExemplars(const TaskRegistry& registry, std::size_t per_label) {
  std::vector<InstructionRecord> out;
  for (const auto& id : registry.TaskIds()) {
    const TaskSpec& task = registry.Get(id);
    std::size_t n = 0;
    for (const auto& leaf : task.taxonomy.Leaves()) {
      for (std::size_t k = 0; k < per_label; ++k, ++n) {
        InstructionRecord r;
        r.id = fmt::format("expert-{}-{:03d}", Slug(id), n);
        r.task_id = id;
        r.description = task.description;
        r.query = task.query;
        r.text = fmt::format("专家示例帖子{}：{}", n, kFragments[n % std::size(kFragments)]);
        r.decision.Insert(leaf);
        if (auto parent = task.taxonomy.ParentOf(leaf)) {
          r.decision = LabelSet{*parent, leaf};
        }
        r.explanation = fmt::format("帖子的表述符合{}的特征。", task.taxonomy.DisplayName(leaf));
        r.source = "expert";
        out.push_back(std::move(r));
      }
    }
  }
  return ExemplarSet(std::move(out));
}

std::vector<RubricScore> MakeRubricScores(const std::map<int, std::size_t>& consistency,
                                          const std::map<int, std::size_t>& reliability,
                                          const std::map<int, std::size_t>& professionality,
                                          const std::string& reviewer) {
  auto expand = [](const std::map<int, std::size_t>& hist) {
    std::vector<int> v;
    for (const auto& [value, count] : hist) v.insert(v.end(), count, value);
    return v;
  };
  const auto c = expand(consistency), r = expand(reliability), p = expand(professionality);
  if (c.size() != r.size() || c.size() != p.size()) {
    throw std::invalid_argument("rubric histograms must have equal totals");
  }
  std::vector<RubricScore> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out.push_back({fmt::format("item-{:03d}", i), reviewer, c[i], r[i], p[i], ""});
  }
  return out;
}

const std::vector<PublishedRow>& PublishedRows() {
  static const std::vector<PublishedRow> rows = [] {
    struct Line {
      const char* model;
      double v[12];
    };
    const Line lines[] = {
        {"model-01", {77.91, 77.60, 78.22, 71.92, 79.19, 65.87, 77.01, 76.68, 78.13, 44.66, 51.84, 41.85}},
        {"model-02",
         {79.32, 83.18, 75.80, 73.06, 84.22, 64.50, 77.96, 80.36, 75.71, 42.98, 71.26, 30.77}},
        {"model-03",
         {79.83, 81.51, 78.22, 73.91, 82.61, 66.87, 76.81, 78.28, 75.39, 43.61, 54.81, 36.21}},
        {"model-04",
         {81.30, 81.96, 80.64, 74.91, 83.03, 68.24, 79.22, 79.68, 78.76, 47.58, 50.70, 44.82}},
        {"model-05",
         {67.23, 51.50, 96.77, 34.24, 29.09, 41.59, 49.93, 46.01, 54.57, 24.54, 18.84, 35.18}},
        {"model-06",
         {68.66, 54.50, 92.74, 41.00, 32.62, 55.17, 43.85, 44.06, 43.64, 27.37, 21.44, 37.85}},
        {"model-07",
         {65.42, 52.00, 88.23, 12.06, 10.63, 13.95, 32.08, 28.61, 36.50, 13.42, 12.19, 14.92}},
        {"model-08",
         {68.71, 59.37, 81.61, 18.10, 16.76, 19.68, 54.87, 51.87, 58.25, 27.00, 24.80, 29.64}},
        {"model-09", {71.72, 57.43, 95.48, 26.61, 17.13, 59.65, 35.93, 31.69, 41.47, 17.22, 15.44, 19.45}},
        {"model-10", {75.81, 70.16, 82.58, 40.39, 31.38, 56.66, 59.09, 55.49, 63.19, 28.61, 23.23, 37.23}},
        {"model-11",
         {77.97, 82.14, 74.19, 70.97, 74.52, 67.75, 79.11, 79.37, 78.86, 48.23, 48.99, 47.49}},
        {"model-12",
         {79.32, 83.19, 75.81, 70.90, 73.05, 68.87, 78.96, 78.42, 79.50, 49.32, 50.16, 48.51}},
        {"model-13", {79.20, 78.57, 79.84, 73.06, 76.71, 69.74, 79.41, 79.75, 79.07, 50.91, 51.69, 50.15}},
        {"model-14",
         {85.12, 87.29, 83.06, 71.04, 74.22, 68.12, 80.55, 80.76, 80.34, 47.85, 48.42, 47.28}},
    };
    const char* columns[] = {"SOS-HL-1K", "SocialCD-3K", "CP_Parent", "CP_Child"};
    std::vector<PublishedRow> out;
    for (const auto& l : lines) {
      for (int c = 0; c < 4; ++c) {
        out.push_back({l.model, columns[c], l.v[3 * c], l.v[3 * c + 1], l.v[3 * c + 2]});
      }
    }
    // Consistency classifier: test split, then expert exemplars.
    const double consistency[2][9] = {
        {100.00, 100.00, 100.00, 99.56, 99.25, 99.87, 98.47, 99.81, 97.16},
        {95.65, 91.66, 100.00, 92.53, 93.93, 91.17, 100.00, 100.00, 100.00}};
    const char* sets[] = {"consistency-test", "consistency-expert"};
    const char* tasks[] = {"SOS-HL-1K", "SocialCD-3K", "CP"};
    for (int s = 0; s < 2; ++s) {
      for (int c = 0; c < 3; ++c) {
        out.push_back({sets[s], tasks[c], consistency[s][3 * c], consistency[s][3 * c + 1],
                       consistency[s][3 * c + 2]});
      }
    }
    return out;
  }();
  return rows;
}

bool IsInconsistentRow(const PublishedRow& row) {
  return std::abs(HarmonicF1(row.precision, row.recall) - row.f1) > 0.01;
}

std::optional<ConfusionCounts> FitCounts(double precision_pct, double recall_pct,
                                         std::uint64_t max_tp) {
  auto rounds_to = [](double value_pct, double target) {
    return std::abs(value_pct - target) <= 0.005 + 1e-9;
  };
  // Smallest k >= 0 with 100*tp/(tp+k) rounding to target.
  auto solve = [&](std::uint64_t tp, double target) -> std::optional<std::uint64_t> {
    if (target >= 100.0) return 0;
    const double ideal = static_cast<double>(tp) * (100.0 / target - 1.0);
    const auto lo = static_cast<std::int64_t>(std::floor(ideal)) - 1;
    for (std::int64_t k = std::max<std::int64_t>(lo, 0); k <= lo + 3; ++k) {
      const double v = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + k);
      if (rounds_to(v, target)) return static_cast<std::uint64_t>(k);
    }
    return std::nullopt;
  };
  for (std::uint64_t tp = 1; tp <= max_tp; ++tp) {
    const auto fp = solve(tp, precision_pct);
    if (!fp) continue;
    const auto fn = solve(tp, recall_pct);
    if (!fn) continue;
    return ConfusionCounts{tp, *fp, *fn};
  }
  return std::nullopt;
}

void Realise(const ConfusionCounts& counts, std::vector<LabelSet>& gold, std::vector<LabelSet>& pred,
             const std::string& positive, const std::string& negative) {
  for (std::uint64_t i = 0; i < counts.tp; ++i) {
    gold.push_back({positive});
    pred.push_back({positive});
  }
  for (std::uint64_t i = 0; i < counts.fp; ++i) {
    gold.push_back({negative});
    pred.push_back({positive});
  }
  for (std::uint64_t i = 0; i < counts.fn; ++i) {
    gold.push_back({positive});
    pred.push_back({negative});
  }
  // One true negative so the set is not degenerate.
  gold.push_back({negative});
  pred.push_back({negative});
}

std::filesystem::path TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   fmt::format("mindloom-{}-{}-{}", tag, ::getpid(), counter++);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mindloom::fixtures
