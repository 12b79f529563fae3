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

#include "mindloom/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "json.hpp"
#include "mindloom/errors.hpp"
#include "mindloom/hashing.hpp"
#include "mindloom/io.hpp"

namespace mindloom {

using json = nlohmann::ordered_json;

namespace {

constexpr std::array<const char*, 11> kFields = {
    "id",          "task_id", "description", "text",     "query",         "decision",
    "explanation", "split",   "source",      "language", "expert_revised"};

}  // namespace

std::string_view ToString(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnsplit: return "unsplit";
  }
  return "unsplit";
}

std::string_view ToString(Language language) {
  return language == Language::kZh ? "zh" : "en";
}

std::optional<Split> ParseSplit(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  if (text == "unsplit") return Split::kUnsplit;
  return std::nullopt;
}

std::optional<Language> ParseLanguage(std::string_view text) {
  if (text == "zh") return Language::kZh;
  if (text == "en") return Language::kEn;
  return std::nullopt;
}

ValidationVerdict ValidateRecord(const InstructionRecord& record,
                                 const TaskRegistry& registry) {
  const TaskSpec& spec = registry.Get(record.task_id);
  ValidationVerdict verdict;
  auto& v = verdict.violations;
  if (record.id.empty()) v.push_back("empty id");
  if (record.decision.empty()) {
    if (record.split != Split::kUnsplit) v.push_back("empty decision on a split record");
    return verdict;
  }
  for (const auto& code : record.decision) {
    if (!spec.taxonomy.Contains(code)) v.push_back("unknown label '" + code + "'");
  }
  if (spec.SingleLabel() && record.decision.size() != 1) {
    v.push_back(std::string(ToString(spec.kind)) + " task must carry exactly one label");
  }
  if (spec.kind == TaskKind::kHierarchical) {
    for (const auto& code : record.decision) {
      if (!spec.taxonomy.Contains(code)) continue;
      auto parent = spec.taxonomy.ParentOf(code);
      if (parent && !record.decision.Contains(*parent)) {
        v.push_back("closure: '" + code + "' present without parent '" + *parent + "'");
      }
    }
  }
  return verdict;
}

std::string SerializeRecord(const InstructionRecord& r) {
  json node;
  node["id"] = r.id;
  node["task_id"] = r.task_id;
  node["description"] = r.description;
  node["text"] = r.text;
  node["query"] = r.query;
  node["decision"] = r.decision.codes();
  node["explanation"] = r.explanation;
  node["split"] = ToString(r.split);
  node["source"] = r.source;
  node["language"] = ToString(r.language);
  node["expert_revised"] = r.expert_revised;
  try {
    return node.dump(-1, ' ', false);
  } catch (const json::type_error& e) {
    throw FormatError("", 0, "", "record '" + r.id + "' is not valid UTF-8: " + e.what());
  }
}

InstructionRecord ParseRecord(std::string_view line, const std::string& path,
                              std::size_t line_number) {
  json node;
  try {
    node = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(path, line_number, "", std::string("invalid JSON: ") + e.what());
  }
  if (!node.is_object()) throw FormatError(path, line_number, "", "expected an object");
  for (auto it = node.begin(); it != node.end(); ++it) {
    if (std::find(kFields.begin(), kFields.end(), it.key()) == kFields.end()) {
      throw FormatError(path, line_number, it.key(), "unknown field");
    }
  }
  auto string_field = [&](const char* key, bool required) -> std::string {
    if (!node.contains(key)) {
      if (required) throw FormatError(path, line_number, key, "missing");
      return {};
    }
    if (!node[key].is_string()) throw FormatError(path, line_number, key, "expected a string");
    return node[key].get<std::string>();
  };

  InstructionRecord r;
  r.id = string_field("id", true);
  if (r.id.empty()) throw FormatError(path, line_number, "id", "empty");
  r.task_id = string_field("task_id", true);
  r.description = string_field("description", false);
  r.text = string_field("text", true);
  r.query = string_field("query", false);
  if (!node.contains("decision")) throw FormatError(path, line_number, "decision", "missing");
  if (!node["decision"].is_array()) {
    throw FormatError(path, line_number, "decision", "expected an array of strings");
  }
  for (const auto& code : node["decision"]) {
    if (!code.is_string()) {
      throw FormatError(path, line_number, "decision", "expected an array of strings");
    }
    if (!r.decision.Insert(code.get<std::string>())) {
      throw FormatError(path, line_number, "decision", "duplicate label code");
    }
  }
  r.explanation = string_field("explanation", false);
  if (node.contains("split")) {
    auto split = ParseSplit(string_field("split", true));
    if (!split) throw FormatError(path, line_number, "split", "must be train, val, test or unsplit");
    r.split = *split;
  }
  r.source = string_field("source", false);
  if (node.contains("language")) {
    auto lang = ParseLanguage(string_field("language", true));
    if (!lang) throw FormatError(path, line_number, "language", "must be zh or en");
    r.language = *lang;
  }
  if (node.contains("expert_revised")) {
    if (!node["expert_revised"].is_boolean()) {
      throw FormatError(path, line_number, "expert_revised", "expected a boolean");
    }
    r.expert_revised = node["expert_revised"].get<bool>();
  }
  return r;
}

std::filesystem::path ProvenancePath(const std::filesystem::path& corpus_path) {
  auto p = corpus_path;
  p += ".provenance.json";
  return p;
}

Corpus LoadCorpus(const std::filesystem::path& path) {
  const std::string bytes = ReadTextFile(path);
  Corpus corpus;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start < bytes.size()) {
    std::size_t nl = bytes.find('\n', start);
    if (nl == std::string::npos) nl = bytes.size();
    ++line_number;
    std::string_view line(bytes.data() + start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) throw FormatError(path.string(), line_number, "", "empty line");
    corpus.records.push_back(ParseRecord(line, path.string(), line_number));
    start = nl + 1;
  }

  const auto prov_path = ProvenancePath(path);
  if (std::filesystem::exists(prov_path)) {
    json prov;
    try {
      prov = json::parse(ReadTextFile(prov_path));
    } catch (const json::parse_error& e) {
      throw FormatError(prov_path.string(), 0, "", e.what());
    }
    corpus.provenance.created_at = prov.value("created_at", "");
    corpus.provenance.tool_version = prov.value("tool_version", "");
    if (prov.contains("split_seed") && !prov["split_seed"].is_null()) {
      corpus.provenance.split_seed = prov["split_seed"].get<std::uint64_t>();
    }
  }
  return corpus;
}

std::string SerializeCorpus(const Corpus& corpus) {
  std::vector<const InstructionRecord*> ordered;
  ordered.reserve(corpus.records.size());
  for (const auto& r : corpus.records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->id == ordered[i - 1]->id) {
      throw PreconditionError("duplicate record id '" + ordered[i]->id + "'");
    }
  }
  std::string out;
  for (const auto* r : ordered) {
    out += SerializeRecord(*r);
    out += '\n';
  }
  return out;
}

void SaveCorpus(const Corpus& corpus, const std::filesystem::path& path) {
  const std::string bytes = SerializeCorpus(corpus);
  WriteTextFile(path, bytes);
  json prov;
  prov["created_at"] = corpus.provenance.created_at;
  prov["tool_version"] = corpus.provenance.tool_version;
  if (corpus.provenance.split_seed) {
    prov["split_seed"] = *corpus.provenance.split_seed;
  } else {
    prov["split_seed"] = nullptr;
  }
  WriteTextFile(ProvenancePath(path), prov.dump(2) + "\n");
}

std::vector<std::size_t> LargestRemainder(std::size_t n,
                                          const std::vector<double>& weights) {
  if (weights.empty()) throw PreconditionError("no strata to allocate to");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw PreconditionError("allocation weights must be finite and non-negative");
    }
    total += w;
  }
  if (total <= 0.0) throw PreconditionError("allocation weights sum to zero");

  std::vector<std::size_t> out(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(n) * weights[i] / total;
    // The epsilon absorbs representation error in quotas that are integers.
    const double base = std::floor(quota + 1e-9);
    out[i] = static_cast<std::size_t>(base);
    remainder[i] = quota - base;
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % order.size()) {
    if (weights[order[k]] > 0.0) {
      ++out[order[k]];
      ++assigned;
    }
  }
  return out;
}

namespace {

std::vector<double> CheckedWeights(const SplitFractions& fractions) {
  const std::vector<double> weights = {fractions.train, fractions.val, fractions.test};
  for (double f : weights) {
    if (f < 0.0 || !std::isfinite(f)) throw PreconditionError("split fractions must be >= 0");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw PreconditionError("split fractions must sum to 1");
  }
  return weights;
}

}  // namespace

Corpus SplitCorpus(const Corpus& corpus, const SplitFractions& fractions,
                   std::uint64_t seed) {
  return SplitCorpus(corpus, fractions, {}, seed);
}

Corpus SplitCorpus(const Corpus& corpus, const SplitFractions& fractions,
                   const std::map<std::string, SplitFractions>& per_task, std::uint64_t seed) {
  const std::vector<double> default_weights = CheckedWeights(fractions);
  std::map<std::string, std::vector<double>> task_weights;
  for (const auto& [task_id, f] : per_task) task_weights[task_id] = CheckedWeights(f);

  std::map<std::string, std::vector<std::size_t>> by_task;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    by_task[corpus.records[i].task_id].push_back(i);
  }

  Corpus out = corpus;
  out.provenance.split_seed = seed;
  for (auto& [task_id, indices] : by_task) {
    auto tw = task_weights.find(task_id);
    const std::vector<double>& weights = tw == task_weights.end() ? default_weights : tw->second;
    const auto nonzero = static_cast<std::size_t>(
        std::count_if(weights.begin(), weights.end(), [](double f) { return f > 0.0; }));
    if (indices.size() < nonzero) {
      throw PreconditionError(fmt::format("task '{}' has {} records for {} splits", task_id,
                                          indices.size(), nonzero));
    }
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
    ranked.reserve(indices.size());
    for (std::size_t idx : indices) {
      ranked.emplace_back(SeededHash(seed, corpus.records[idx].id), idx);
    }
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return corpus.records[a.second].id < corpus.records[b.second].id;
    });
    const auto quota = LargestRemainder(indices.size(), weights);
    std::size_t cursor = 0;
    const Split targets[] = {Split::kTrain, Split::kVal, Split::kTest};
    for (int s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < quota[s]; ++k, ++cursor) {
        out.records[ranked[cursor].second].split = targets[s];
      }
    }
  }
  return out;
}

std::size_t TaskStats::total() const {
  return std::accumulate(split_counts.begin(), split_counts.end(), std::size_t{0});
}

CorpusStats ComputeCorpusStats(const Corpus& corpus) {
  CorpusStats stats;
  for (const auto& r : corpus.records) {
    auto& task = stats.per_task[r.task_id];
    const auto s = static_cast<std::size_t>(r.split);
    ++task.split_counts[s];
    ++stats.split_totals[s];
    ++stats.total;
    for (const auto& code : r.decision) ++task.label_histogram[code];
  }
  return stats;
}

std::string FormatCorpusStats(const CorpusStats& stats) {
  std::string out = fmt::format("{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "task", "train",
                                "val", "test", "unsplit", "total");
  auto row = [&](const std::string& name, const std::array<std::size_t, 4>& c,
                 std::size_t total) {
    out += fmt::format("{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}\n", name, c[0], c[1], c[2], c[3],
                       total);
  };
  for (const auto& [task_id, task] : stats.per_task) row(task_id, task.split_counts, task.total());
  row("total", stats.split_totals, stats.total);
  return out;
}

Corpus SelectSplit(const Corpus& corpus, Split split) {
  Corpus out;
  out.provenance = corpus.provenance;
  for (const auto& r : corpus.records) {
    if (r.split == split) out.records.push_back(r);
  }
  std::sort(out.records.begin(), out.records.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::string Fingerprint(const Corpus& corpus) {
  return Sha256Hex(SerializeCorpus(corpus));
}

std::string UtcNow() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string_view ToolVersion() { return MINDLOOM_VERSION; }

}  // namespace mindloom
