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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mindloom/corpus.hpp"
#include "mindloom/parser.hpp"

namespace mindloom {

/// Largest-remainder allocation of `n` across strata proportional to their
/// sizes. Throws PreconditionError when n exceeds the total.
std::vector<std::size_t> AllocateSample(const std::vector<std::size_t>& sizes, std::size_t n);

/// Sums to n, never exceeds a stratum, and each count is within 1 of its
/// proportional quota.
bool IsValidAllocation(const std::vector<std::size_t>& sizes, std::size_t n,
                       const std::vector<std::size_t>& allocation);

struct ReviewItem {
  std::string id;
  std::string task_id;
  std::string text;
  std::string generation;
  LabelSet parsed;
  LabelSet gold;
  friend bool operator==(const ReviewItem&, const ReviewItem&) = default;
};

struct ReviewBatch {
  std::uint64_t seed = 0;
  std::vector<std::string> strata;
  std::vector<std::size_t> stratum_sizes;
  std::vector<std::size_t> allocation;
  std::vector<ReviewItem> items;

  std::string ToJson() const;
  static ReviewBatch FromJson(std::string_view text, const std::string& origin = {});
  void Save(const std::filesystem::path& path) const;
  static ReviewBatch Load(const std::filesystem::path& path);
};

struct SampleOptions {
  std::size_t n = 100;
  std::uint64_t seed = 0;
  /// Explicit per-stratum counts (registry task order) instead of the
  /// largest-remainder default. Must pass IsValidAllocation.
  std::optional<std::vector<std::size_t>> allocation;
};

/// Strata are the tasks present in `corpus`, in registry order. Within a
/// stratum the items with the lowest SeededHash(seed, id) are taken. The
/// generation shown to reviewers is `generations[id]` when present, else the
/// canonical rendering of the record's decision and explanation.
ReviewBatch SampleForReview(const Corpus& corpus,
                            const std::map<std::string, std::string>& generations,
                            const TaskRegistry& registry, ParseMode parse_mode,
                            const SampleOptions& options);

struct RubricScore {
  std::string item_id;
  std::string reviewer;
  int consistency = 0;
  int reliability = 0;
  int professionality = 0;
  std::string timestamp;

  int sum() const { return consistency + reliability + professionality; }
  /// Always derived; never stored or accepted from clients.
  double overall() const { return sum() / 3.0; }
};

/// Throws FormatError naming the first dimension outside 0..3.
void ValidateRubric(int consistency, int reliability, int professionality);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
Summary Summarize(std::vector<double> values);

struct AggregateStats {
  Summary consistency;
  Summary reliability;
  Summary professionality;
  Summary overall;
  struct ReviewerMeans {
    std::size_t n = 0;
    double consistency = 0.0;
    double reliability = 0.0;
    double professionality = 0.0;
    double overall = 0.0;
  };
  std::map<std::string, ReviewerMeans> reviewers;
};

/// Scores from all reviewers are pooled. Throws PreconditionError when empty.
AggregateStats AggregateRubric(const std::vector<RubricScore>& scores);

std::string AggregateCsv(const AggregateStats& stats);

struct Correction {
  std::string item_id;
  std::string reviewer;
  LabelSet decision;
  std::string explanation;
};

enum class Verdict { kAgree, kDisagree };

struct ScoreSubmission {
  std::string item_id;
  std::string reviewer;
  int consistency = 0;
  int reliability = 0;
  int professionality = 0;
  Verdict verdict = Verdict::kAgree;
  std::optional<Correction> correction;
};

struct ReviewConfig {
  std::size_t reviews_per_item = 1;
  std::chrono::seconds lease{15 * 60};
  std::function<std::chrono::system_clock::time_point()> clock;
  /// Append-only event log (scores and corrections); replayed on start.
  std::filesystem::path state_path;
  /// Called for each accepted correction, under the store lock.
  std::function<void(const Correction&)> on_correction;
};

struct Claim {
  ReviewItem item;
  std::chrono::system_clock::time_point expires;
};

struct Progress {
  std::size_t total = 0;
  std::size_t complete = 0;
  std::size_t claimed = 0;
  std::size_t scores = 0;
  std::size_t corrected = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(complete) / total; }
};

/// Thread-safe claim/score state over one ReviewBatch.
class ReviewStore {
 public:
  ReviewStore(ReviewBatch batch, const TaskRegistry& registry, ReviewConfig config = {});

  /// Next item this reviewer has not scored, that needs more scores and is
  /// not held by someone else's live lease. Empty when nothing is left.
  std::optional<Claim> ClaimNext(const std::string& reviewer);

  /// Requires a live claim by the reviewer. A disagree verdict needs a
  /// correction. Throws PreconditionError (bad payload), StateError (claim
  /// or duplicate problems) or IdMismatchError (unknown item).
  RubricScore SubmitScore(const ScoreSubmission& submission);

  /// Requires a live claim or an earlier score by the same reviewer.
  void SubmitCorrection(const Correction& correction);

  Progress progress() const;
  std::vector<RubricScore> scores() const;
  std::vector<Correction> corrections() const;
  const ReviewBatch& batch() const { return batch_; }
  AggregateStats Aggregate() const;

 private:
  struct ItemState {
    std::optional<std::string> holder;
    std::chrono::system_clock::time_point expires{};
    std::map<std::string, RubricScore> by_reviewer;
    bool corrected = false;
  };
  std::chrono::system_clock::time_point Now() const;
  std::size_t IndexOf(const std::string& id) const;
  void CheckClaim(const ItemState& state, const std::string& id, const std::string& reviewer) const;
  void ValidateCorrection(const Correction& c) const;
  void RecordScore(const RubricScore& s);
  void RecordCorrection(const Correction& c);
  void Persist(const std::string& line) const;

  ReviewBatch batch_;
  TaskRegistry registry_;
  ReviewConfig config_;
  mutable std::mutex mu_;
  std::vector<ItemState> states_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<RubricScore> scores_;
  std::vector<Correction> corrections_;
};

}  // namespace mindloom
