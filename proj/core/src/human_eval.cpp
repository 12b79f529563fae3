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

#include "mindloom/human_eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ctime>
#include <numeric>

#include <fmt/format.h>

#include "json.hpp"
#include "mindloom/errors.hpp"
#include "mindloom/hashing.hpp"
#include "mindloom/io.hpp"
#include "mindloom/text.hpp"

namespace mindloom {

using json = nlohmann::ordered_json;

namespace {

std::string Dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::string Iso(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json ItemJson(const ReviewItem& i) {
  return json{{"id", i.id},
              {"task_id", i.task_id},
              {"text", i.text},
              {"generation", i.generation},
              {"parsed", i.parsed.codes()},
              {"gold", i.gold.codes()}};
}

double Interpolate(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<std::size_t> AllocateSample(const std::vector<std::size_t>& sizes, std::size_t n) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (sizes.empty()) throw PreconditionError("no strata to sample from");
  if (n > total) {
    throw PreconditionError(fmt::format("cannot sample {} items from {} available", n, total));
  }
  if (n == 0) return std::vector<std::size_t>(sizes.size(), 0);
  std::vector<double> weights(sizes.begin(), sizes.end());
  return LargestRemainder(n, weights);
}

bool IsValidAllocation(const std::vector<std::size_t>& sizes, std::size_t n,
                       const std::vector<std::size_t>& allocation) {
  if (sizes.size() != allocation.size() || sizes.empty()) return false;
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total == 0) return n == 0;
  if (std::accumulate(allocation.begin(), allocation.end(), std::size_t{0}) != n) return false;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (allocation[i] > sizes[i]) return false;
    const double quota = static_cast<double>(n) * static_cast<double>(sizes[i]) /
                         static_cast<double>(total);
    if (std::abs(static_cast<double>(allocation[i]) - quota) > 1.0 + 1e-9) return false;
  }
  return true;
}

std::string ReviewBatch::ToJson() const {
  json items_json = json::array();
  for (const auto& i : items) items_json.push_back(ItemJson(i));
  json j{{"seed", seed},
         {"strata", strata},
         {"stratum_sizes", stratum_sizes},
         {"allocation", allocation},
         {"items", items_json}};
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

ReviewBatch ReviewBatch::FromJson(std::string_view text, const std::string& origin) {
  try {
    const json j = json::parse(text);
    ReviewBatch b;
    b.seed = j.at("seed").get<std::uint64_t>();
    b.strata = j.at("strata").get<std::vector<std::string>>();
    b.stratum_sizes = j.at("stratum_sizes").get<std::vector<std::size_t>>();
    b.allocation = j.at("allocation").get<std::vector<std::size_t>>();
    for (const auto& node : j.at("items")) {
      ReviewItem i;
      i.id = node.at("id").get<std::string>();
      i.task_id = node.at("task_id").get<std::string>();
      i.text = node.at("text").get<std::string>();
      i.generation = node.at("generation").get<std::string>();
      i.parsed = LabelSet(node.at("parsed").get<std::vector<std::string>>());
      i.gold = LabelSet(node.at("gold").get<std::vector<std::string>>());
      b.items.push_back(std::move(i));
    }
    return b;
  } catch (const json::exception& e) {
    throw FormatError(origin, 0, "", e.what());
  }
}

void ReviewBatch::Save(const std::filesystem::path& path) const { WriteTextFile(path, ToJson()); }

ReviewBatch ReviewBatch::Load(const std::filesystem::path& path) {
  return FromJson(ReadTextFile(path), path.string());
}

ReviewBatch SampleForReview(const Corpus& corpus,
                            const std::map<std::string, std::string>& generations,
                            const TaskRegistry& registry, ParseMode parse_mode,
                            const SampleOptions& options) {
  ReviewBatch batch;
  batch.seed = options.seed;
  std::vector<std::vector<const InstructionRecord*>> members;
  for (const auto& task_id : registry.TaskIds()) {
    std::vector<const InstructionRecord*> in_task;
    for (const auto& r : corpus.records) {
      if (r.task_id == task_id) in_task.push_back(&r);
    }
    if (in_task.empty()) continue;
    batch.strata.push_back(task_id);
    batch.stratum_sizes.push_back(in_task.size());
    members.push_back(std::move(in_task));
  }
  if (batch.strata.empty()) throw PreconditionError("nothing to sample: corpus is empty");

  if (options.allocation) {
    const auto& a = *options.allocation;
    if (a.size() != batch.strata.size()) {
      throw PreconditionError(fmt::format("allocation has {} entries for {} strata", a.size(),
                                          batch.strata.size()));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] > batch.stratum_sizes[i]) {
        throw PreconditionError(fmt::format("stratum {} has {} items but {} were requested",
                                            batch.strata[i], batch.stratum_sizes[i], a[i]));
      }
    }
    if (!IsValidAllocation(batch.stratum_sizes, options.n, a)) {
      throw PreconditionError("allocation is not within 1 of the proportional quota");
    }
    batch.allocation = a;
  } else {
    batch.allocation = AllocateSample(batch.stratum_sizes, options.n);
  }

  const LabelParser parser(registry, ParserConfig::For(registry, parse_mode));
  for (std::size_t s = 0; s < members.size(); ++s) {
    auto& pool = members[s];
    std::vector<std::pair<std::uint64_t, const InstructionRecord*>> ranked;
    for (const auto* r : pool) ranked.emplace_back(SeededHash(options.seed, r->id), r);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
    });
    for (std::size_t i = 0; i < batch.allocation[s]; ++i) {
      const InstructionRecord& r = *ranked[i].second;
      const TaskSpec& task = registry.Get(r.task_id);
      ReviewItem item;
      item.id = r.id;
      item.task_id = r.task_id;
      item.text = r.text;
      auto g = generations.find(r.id);
      item.generation =
          g != generations.end() ? g->second : RenderCanonical(r.decision, r.explanation, task);
      const ParsedOutput parsed = parser.Parse(item.generation, r.task_id);
      item.parsed = parsed.decision;
      item.gold = r.decision;
      batch.items.push_back(std::move(item));
    }
  }
  return batch;
}

void ValidateRubric(int consistency, int reliability, int professionality) {
  const std::pair<const char*, int> dims[] = {
      {"consistency", consistency}, {"reliability", reliability},
      {"professionality", professionality}};
  for (const auto& [name, v] : dims) {
    if (v < 0 || v > 3) {
      throw FormatError("", 0, name, fmt::format("{} must be an integer in 0..3, got {}", name, v));
    }
  }
}

Summary Summarize(std::vector<double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  s.min = values.front();
  s.max = values.back();
  s.median = Interpolate(values, 0.5);
  s.q1 = Interpolate(values, 0.25);
  s.q3 = Interpolate(values, 0.75);
  return s;
}

AggregateStats AggregateRubric(const std::vector<RubricScore>& scores) {
  if (scores.empty()) throw PreconditionError("no scores to aggregate");
  std::vector<double> c, r, p, o;
  long sums[3] = {0, 0, 0};
  long total = 0;
  std::map<std::string, std::array<long, 4>> per;
  for (const auto& s : scores) {
    c.push_back(s.consistency);
    r.push_back(s.reliability);
    p.push_back(s.professionality);
    o.push_back(s.overall());
    sums[0] += s.consistency;
    sums[1] += s.reliability;
    sums[2] += s.professionality;
    total += s.sum();
    auto& acc = per[s.reviewer];
    acc[0] += s.consistency;
    acc[1] += s.reliability;
    acc[2] += s.professionality;
    acc[3] += 1;
  }
  AggregateStats a;
  a.consistency = Summarize(std::move(c));
  a.reliability = Summarize(std::move(r));
  a.professionality = Summarize(std::move(p));
  a.overall = Summarize(std::move(o));
  // Means from integer sums so submission order cannot move the last bit.
  const double n = static_cast<double>(scores.size());
  a.consistency.mean = sums[0] / n;
  a.reliability.mean = sums[1] / n;
  a.professionality.mean = sums[2] / n;
  a.overall.mean = total / (3.0 * n);
  for (const auto& [reviewer, acc] : per) {
    const double k = static_cast<double>(acc[3]);
    a.reviewers[reviewer] = {static_cast<std::size_t>(acc[3]), acc[0] / k, acc[1] / k,
                             acc[2] / k, (acc[0] + acc[1] + acc[2]) / (3.0 * k)};
  }
  return a;
}

std::string AggregateCsv(const AggregateStats& stats) {
  std::string out = "dimension,n,mean,median,q1,q3,min,max\n";
  const std::pair<const char*, const Summary*> rows[] = {{"consistency", &stats.consistency},
                                                         {"reliability", &stats.reliability},
                                                         {"professionality", &stats.professionality},
                                                         {"overall", &stats.overall}};
  for (const auto& [name, s] : rows) {
    out += fmt::format("{},{},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f}\n", name, s->n, s->mean,
                       s->median, s->q1, s->q3, s->min, s->max);
  }
  return out;
}

ReviewStore::ReviewStore(ReviewBatch batch, const TaskRegistry& registry, ReviewConfig config)
    : batch_(std::move(batch)), registry_(registry), config_(std::move(config)) {
  if (config_.reviews_per_item == 0) throw PreconditionError("reviews_per_item must be >= 1");
  states_.resize(batch_.items.size());
  for (std::size_t i = 0; i < batch_.items.size(); ++i) {
    if (!index_.emplace(batch_.items[i].id, i).second) {
      throw PreconditionError("review batch lists '" + batch_.items[i].id + "' twice");
    }
  }
  if (config_.state_path.empty() || !std::filesystem::exists(config_.state_path)) return;

  const std::string bytes = ReadTextFile(config_.state_path);
  std::size_t line_no = 0;
  for (auto line : text::SplitLines(bytes)) {
    ++line_no;
    if (text::Trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "score") {
        RubricScore s{j.at("item_id").get<std::string>(), j.at("reviewer").get<std::string>(),
                      j.at("consistency").get<int>(),     j.at("reliability").get<int>(),
                      j.at("professionality").get<int>(), j.value("timestamp", "")};
        RecordScore(s);
      } else if (type == "correction") {
        Correction c{j.at("item_id").get<std::string>(), j.at("reviewer").get<std::string>(),
                     LabelSet(j.at("decision").get<std::vector<std::string>>()),
                     j.at("explanation").get<std::string>()};
        RecordCorrection(c);
      } else {
        throw FormatError(config_.state_path.string(), line_no, "type",
                          "unknown event '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw FormatError(config_.state_path.string(), line_no, "", e.what());
    }
  }
}

std::chrono::system_clock::time_point ReviewStore::Now() const {
  return config_.clock ? config_.clock() : std::chrono::system_clock::now();
}

std::size_t ReviewStore::IndexOf(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw IdMismatchError("unknown review item", {id});
  return it->second;
}

void ReviewStore::CheckClaim(const ItemState& st, const std::string& id,
                             const std::string& reviewer) const {
  if (!st.holder || *st.holder != reviewer) {
    throw StateError("item '" + id + "' is not claimed by '" + reviewer + "'");
  }
  if (Now() >= st.expires) throw StateError("claim on item '" + id + "' has expired");
}

void ReviewStore::ValidateCorrection(const Correction& c) const {
  const ReviewItem& item = batch_.items[IndexOf(c.item_id)];
  const TaskSpec& task = registry_.Get(item.task_id);
  if (c.decision.empty()) throw FormatError("", 0, "correction.decision", "must not be empty");
  for (const auto& code : c.decision) {
    if (!task.taxonomy.Contains(code)) {
      throw FormatError("", 0, "correction.decision",
                        "'" + code + "' is not a label of " + task.task_id);
    }
  }
  if (task.SingleLabel() && c.decision.size() != 1) {
    throw FormatError("", 0, "correction.decision", task.task_id + " takes exactly one label");
  }
  if (text::Trim(c.explanation).empty()) {
    throw FormatError("", 0, "correction.explanation", "must not be empty");
  }
}

void ReviewStore::RecordScore(const RubricScore& s) {
  ValidateRubric(s.consistency, s.reliability, s.professionality);
  ItemState& st = states_[IndexOf(s.item_id)];
  if (!st.by_reviewer.emplace(s.reviewer, s).second) {
    throw StateError("'" + s.reviewer + "' already scored item '" + s.item_id + "'");
  }
  scores_.push_back(s);
}

void ReviewStore::RecordCorrection(const Correction& c) {
  states_[IndexOf(c.item_id)].corrected = true;
  corrections_.push_back(c);
}

void ReviewStore::Persist(const std::string& line) const {
  if (!config_.state_path.empty()) AppendLine(config_.state_path, line);
}

std::optional<Claim> ReviewStore::ClaimNext(const std::string& reviewer) {
  if (text::Trim(reviewer).empty()) throw FormatError("", 0, "reviewer", "must not be empty");
  std::lock_guard lock(mu_);
  const auto now = Now();
  // A reviewer holding a live claim gets the same item back.
  for (std::size_t i = 0; i < states_.size(); ++i) {
    auto& st = states_[i];
    if (st.holder && *st.holder == reviewer && now < st.expires) {
      st.expires = now + config_.lease;
      return Claim{batch_.items[i], st.expires};
    }
  }
  for (std::size_t i = 0; i < states_.size(); ++i) {
    auto& st = states_[i];
    if (st.by_reviewer.size() >= config_.reviews_per_item) continue;
    if (st.by_reviewer.count(reviewer)) continue;
    if (st.holder && now < st.expires) continue;
    st.holder = reviewer;
    st.expires = now + config_.lease;
    return Claim{batch_.items[i], st.expires};
  }
  return std::nullopt;
}

RubricScore ReviewStore::SubmitScore(const ScoreSubmission& sub) {
  ValidateRubric(sub.consistency, sub.reliability, sub.professionality);
  if (sub.verdict == Verdict::kDisagree && !sub.correction) {
    throw FormatError("", 0, "correction", "a disagree verdict needs a correction");
  }
  std::lock_guard lock(mu_);
  const std::size_t idx = IndexOf(sub.item_id);
  ItemState& st = states_[idx];
  if (st.by_reviewer.count(sub.reviewer)) {
    throw StateError("'" + sub.reviewer + "' already scored item '" + sub.item_id + "'");
  }
  CheckClaim(st, sub.item_id, sub.reviewer);
  std::optional<Correction> correction = sub.correction;
  if (correction) {
    correction->item_id = sub.item_id;
    correction->reviewer = sub.reviewer;
    ValidateCorrection(*correction);
  }

  RubricScore s{sub.item_id, sub.reviewer, sub.consistency, sub.reliability, sub.professionality,
                Iso(Now())};
  if (correction && config_.on_correction) config_.on_correction(*correction);
  RecordScore(s);
  Persist(Dump(json{{"type", "score"},
                    {"item_id", s.item_id},
                    {"reviewer", s.reviewer},
                    {"consistency", s.consistency},
                    {"reliability", s.reliability},
                    {"professionality", s.professionality},
                    {"verdict", sub.verdict == Verdict::kAgree ? "agree" : "disagree"},
                    {"timestamp", s.timestamp}}));
  if (correction) {
    RecordCorrection(*correction);
    Persist(Dump(json{{"type", "correction"},
                      {"item_id", correction->item_id},
                      {"reviewer", correction->reviewer},
                      {"decision", correction->decision.codes()},
                      {"explanation", correction->explanation},
                      {"timestamp", s.timestamp}}));
  }
  st.holder.reset();
  return s;
}

void ReviewStore::SubmitCorrection(const Correction& c) {
  std::lock_guard lock(mu_);
  ItemState& st = states_[IndexOf(c.item_id)];
  if (!st.by_reviewer.count(c.reviewer)) CheckClaim(st, c.item_id, c.reviewer);
  ValidateCorrection(c);
  if (config_.on_correction) config_.on_correction(c);
  RecordCorrection(c);
  Persist(Dump(json{{"type", "correction"},
                    {"item_id", c.item_id},
                    {"reviewer", c.reviewer},
                    {"decision", c.decision.codes()},
                    {"explanation", c.explanation},
                    {"timestamp", Iso(Now())}}));
}

Progress ReviewStore::progress() const {
  std::lock_guard lock(mu_);
  Progress p;
  p.total = states_.size();
  const auto now = Now();
  for (const auto& st : states_) {
    if (st.by_reviewer.size() >= config_.reviews_per_item) ++p.complete;
    if (st.holder && now < st.expires) ++p.claimed;
    if (st.corrected) ++p.corrected;
    p.scores += st.by_reviewer.size();
  }
  return p;
}

std::vector<RubricScore> ReviewStore::scores() const {
  std::lock_guard lock(mu_);
  return scores_;
}

std::vector<Correction> ReviewStore::corrections() const {
  std::lock_guard lock(mu_);
  return corrections_;
}

AggregateStats ReviewStore::Aggregate() const { return AggregateRubric(scores()); }

}  // namespace mindloom
