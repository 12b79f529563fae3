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

// Deterministic corpora and reference data shared by unit and acceptance
// tests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mindloom/corpus.hpp"
#include "mindloom/human_eval.hpp"
#include "mindloom/metrics.hpp"
#include "mindloom/prompt.hpp"
#include "mindloom/taxonomy.hpp"

namespace mindloom::fixtures {

inline constexpr char kMulticlassTask[] = "EMO-4";

/// Built-in tasks plus a four-way multiclass task, so every task kind is
/// covered.
TaskRegistry FourKindRegistry();

/// A valid (closed, kind-respecting) random decision.
LabelSet RandomDecision(const TaskSpec& task, std::mt19937_64& rng);

using DecisionFn = std::function<LabelSet(const TaskSpec&, std::size_t index, std::mt19937_64&)>;

/// `count` records of one task with ids "<prefix>-<task>-00000".., random
/// decisions unless `decide` is given, split left unsplit.
std::vector<InstructionRecord> MakeRecords(const TaskSpec& task, std::size_t count,
                                           std::uint64_t seed, const std::string& prefix = "r",
                                           const DecisionFn& decide = {});

/// Records for every task of `registry`, `per_task` each.
Corpus MakeCorpus(const TaskRegistry& registry, std::size_t per_task, std::uint64_t seed);

/// Whole-dataset shape with the published per-task sizes (1,249 posts,
/// 3,407 posts, 4,595 sentences), unsplit.
Corpus MakeFullScaleCorpus(std::uint64_t seed);

/// Expert exemplars (source "expert"): `per_label` per leaf label of every
/// task, so per-label coverage never runs dry.
ExemplarSet MakeExemplars(const TaskRegistry& registry, std::size_t per_label = 2);

/// Scores whose per-dimension value histograms are given as {value: count};
/// each histogram must sum to the same n. Dimensions are paired in order.
std::vector<RubricScore> MakeRubricScores(const std::map<int, std::size_t>& consistency,
                                          const std::map<int, std::size_t>& reliability,
                                          const std::map<int, std::size_t>& professionality,
                                          const std::string& reviewer = "expert-a");

struct PublishedRow {
  std::string row;
  std::string column;
  double f1;
  double precision;
  double recall;
};

/// Every printed (F1, P, R) triple from the model-comparison and
/// consistency-classifier results, in percent.
const std::vector<PublishedRow>& PublishedRows();

/// Triples whose printed F1 is not the harmonic mean of the printed P and R
/// (beyond rounding). Excluded from fixtures.
bool IsInconsistentRow(const PublishedRow& row);

/// Smallest confusion counts whose P and R round to the given percentages
/// at two decimals. Searches tp up to `max_tp`.
std::optional<ConfusionCounts> FitCounts(double precision_pct, double recall_pct,
                                         std::uint64_t max_tp = 5000);

/// Binary gold/prediction sets realising `counts` for a positive label.
void Realise(const ConfusionCounts& counts, std::vector<LabelSet>& gold,
             std::vector<LabelSet>& pred, const std::string& positive = "high_risk",
             const std::string& negative = "low_risk");

/// Fresh empty directory under the system temp dir.
std::filesystem::path TempDir(const std::string& tag);

}  // namespace mindloom::fixtures
