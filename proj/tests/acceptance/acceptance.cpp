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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runs against mocks and fixtures only.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fcntl.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <fmt/core.h>

#include "fixtures.hpp"
#include "mindloom/corpus.hpp"
#include "mindloom/gateway.hpp"
#include "mindloom/human_eval.hpp"
#include "mindloom/io.hpp"
#include "mindloom/metrics.hpp"
#include "mindloom/mock_endpoint.hpp"
#include "mindloom/parser.hpp"
#include "mindloom/pipelines.hpp"

namespace fs = std::filesystem;
using namespace mindloom;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void Report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  const auto start = Clock::now();
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (!o.ok) ++failures;
  fmt::print("{} {} ({:.2f}s): {}\n", o.ok ? "PASS" : "FAIL", name, secs, o.detail);
  std::fflush(stdout);
}

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

LabelSet Noisy(const TaskSpec& task, const LabelSet& gold, std::mt19937_64& rng) {
  switch (rng() % 4) {
    case 0: return gold;
    case 1: return {};
    default: return fixtures::RandomDecision(task, rng);
  }
}

LabelSet Project(const LabelSet& s, const std::vector<std::string>& keep) {
  LabelSet out;
  for (const auto& c : s) {
    if (std::find(keep.begin(), keep.end(), c) != keep.end()) out.Insert(c);
  }
  return out;
}

double MaxDiff(const Prf& a, const Prf& b) {
  return std::max({std::abs(a.precision - b.precision), std::abs(a.recall - b.recall),
                   std::abs(a.f1 - b.f1)});
}

Outcome OracleEquivalence() {
  const auto start = Clock::now();
  const TaskRegistry reg = fixtures::FourKindRegistry();
  const auto ids = reg.TaskIds();
  std::mt19937_64 rng(20260101);
  double worst = 0.0;
  std::map<std::string, int> per_kind;
  for (int instance = 0; instance < 1000; ++instance) {
    const TaskSpec& task = reg.Get(ids[instance % ids.size()]);
    const std::size_t n = 1 + rng() % 60;
    std::vector<LabelSet> gold, pred;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(fixtures::RandomDecision(task, rng));
      pred.push_back(Noisy(task, gold.back(), rng));
    }
    ++per_kind[std::string(ToString(task.kind))];
    if (task.kind == TaskKind::kHierarchical) {
      const auto h = ComputeHierarchicalMetrics(gold, pred, task.taxonomy);
      for (const auto& [level, keep] : {std::pair{&h.parent, task.taxonomy.Roots()},
                                        std::pair{&h.child, task.taxonomy.Children()}}) {
        std::vector<LabelSet> g, p;
        for (std::size_t i = 0; i < n; ++i) {
          g.push_back(Project(gold[i], keep));
          p.push_back(Project(pred[i], keep));
        }
        worst = std::max(worst, MaxDiff(level->prf, BruteForceOracle(g, p, Averaging::Micro())));
      }
    } else {
      const Averaging avg = Averaging::For(task);
      worst = std::max(worst, MaxDiff(ComputePrf(CountConfusion(gold, pred, avg)),
                                      BruteForceOracle(gold, pred, avg)));
    }
  }
  const double secs = Seconds(start);
  std::string kinds;
  for (const auto& [k, c] : per_kind) kinds += fmt::format("{}={} ", k, c);
  return {worst <= 1e-12 && secs < 10.0,
          fmt::format("1000 instances ({}), max |diff| {:.3g}, {:.2f}s", kinds, worst, secs)};
}

Outcome PublishedRows() {
  std::size_t checked = 0;
  std::vector<std::string> bad, skipped;
  for (const auto& row : fixtures::PublishedRows()) {
    const std::string name = row.row + "/" + row.column;
    if (fixtures::IsInconsistentRow(row)) {
      skipped.push_back(name);
      continue;
    }
    const auto counts = fixtures::FitCounts(row.precision, row.recall);
    if (!counts) {
      bad.push_back(name + " (no integer fit)");
      continue;
    }
    std::vector<LabelSet> gold, pred;
    fixtures::Realise(*counts, gold, pred);
    const Prf prf = ComputePrf(CountConfusion(gold, pred, Averaging::BinaryPositive("high_risk")));
    ++checked;
    if (std::abs(100 * prf.f1 - row.f1) > 0.01 ||
        std::abs(HarmonicF1(row.precision, row.recall) - row.f1) > 0.01) {
      bad.push_back(fmt::format("{} ({:.4f} vs {:.2f})", name, 100 * prf.f1, row.f1));
    }
  }
  const bool anchors =
      std::abs(HarmonicF1(87.29, 83.06) - 85.12) <= 0.01 &&
      std::abs(HarmonicF1(91.66, 100.0) - 95.65) <= 0.01;
  std::string detail = fmt::format("{} rows reproduced within 0.01", checked);
  if (!skipped.empty()) {
    detail += fmt::format("; {} printed cells whose F1 is not the harmonic mean of their P/R "
                          "were excluded:",
                          skipped.size());
    for (const auto& s : skipped) detail += " " + s;
  }
  for (const auto& b : bad) detail += "; mismatch " + b;
  return {bad.empty() && anchors && checked >= 10, detail};
}

Outcome RubricAlgebra() {
  const auto a = AggregateRubric(
      fixtures::MakeRubricScores({{3, 51}, {2, 49}}, {{3, 30}, {2, 70}}, {{3, 3}, {2, 97}}));
  const auto b = AggregateRubric(
      fixtures::MakeRubricScores({{3, 73}, {2, 27}}, {{3, 57}, {2, 43}}, {{2, 92}, {1, 8}}));
  const bool ok = std::abs(a.overall.mean - 2.28) <= 0.005 &&
                  std::abs(a.consistency.mean - 2.51) < 1e-9 &&
                  std::abs(a.reliability.mean - 2.30) < 1e-9 &&
                  std::abs(a.professionality.mean - 2.03) < 1e-9 &&
                  std::abs(b.overall.mean - 2.4067) <= 0.00005;
  return {ok, fmt::format("means (2.51, 2.30, 2.03) -> overall {:.4f}; (2.73, 2.57, 1.92) -> {:.4f}",
                          a.overall.mean, b.overall.mean)};
}

Outcome SamplingQuota() {
  const std::vector<std::size_t> sizes = {250, 682, 945};
  const auto alloc = AllocateSample(sizes, 100);
  const bool ours = IsValidAllocation(sizes, 100, alloc);
  const bool published = IsValidAllocation(sizes, 100, {14, 36, 50});
  return {ours && published && alloc[0] + alloc[1] + alloc[2] == 100,
          fmt::format("allocator ({}, {}, {}) valid={}; (14, 36, 50) valid={}", alloc[0], alloc[1],
                      alloc[2], ours, published)};
}

Outcome SplitSizes() {
  const TaskRegistry reg = TaskRegistry::Defaults();
  Corpus sos;
  sos.records = fixtures::MakeRecords(reg.Get("SOS-HL-1K"), 1249, 7);
  const auto s = ComputeCorpusStats(SplitCorpus(sos, {0.6, 0.2, 0.2}, 42)).split_totals;

  auto frac = [](double tr, double va, double te) {
    const double n = tr + va + te;
    return SplitFractions{tr / n, va / n, te / n};
  };
  const std::map<std::string, SplitFractions> per_task = {
      {"SOS-HL-1K", frac(749, 250, 250)},
      {"SocialCD-3K", frac(2043, 682, 682)},
      {"CP", frac(2740, 910, 945)},
  };
  const auto full =
      ComputeCorpusStats(SplitCorpus(fixtures::MakeFullScaleCorpus(7), {0.6, 0.2, 0.2}, per_task, 42));
  const auto& t = full.split_totals;
  const bool ok = s[0] == 749 && s[1] == 250 && s[2] == 250 && t[0] == 5532 && t[1] == 1842 &&
                  t[2] == 1877;
  return {ok, fmt::format("SOS {}/{}/{}; full fixture ({} records) {}/{}/{}", s[0], s[1], s[2],
                          full.total, t[0], t[1], t[2])};
}

GatewayClient MockClient(std::shared_ptr<MockEndpoint> mock, int in_flight = 8) {
  EndpointConfig c;
  c.name = "mock-echo";
  c.model = "mock";
  c.max_in_flight = in_flight;
  c.mock = std::make_shared<MockScript>(mock->script());
  return GatewayClient(c, std::move(mock), [](auto) {});
}

Outcome EchoFixpoint() {
  const auto start = Clock::now();
  const TaskRegistry reg = fixtures::FourKindRegistry();
  const Corpus corpus = SplitCorpus(fixtures::MakeCorpus(reg, 50, 13), {0.6, 0.2, 0.2}, 5);
  const ExemplarSet exemplars = fixtures::MakeExemplars(reg);
  const PromptTemplate distill_tmpl = PromptTemplate::BuiltinDistill();
  const PromptTemplate eval_tmpl = PromptTemplate::BuiltinEval();

  DistillInputs din;
  din.corpus = &corpus;
  din.exemplars = &exemplars;
  din.tmpl = &distill_tmpl;
  din.registry = &reg;
  RunOptions dopt;
  dopt.out_dir = fixtures::TempDir("accept-echo-distill");
  const auto distilled =
      RunDistillation(din, MockClient(std::make_shared<MockEndpoint>(MockScript{})), dopt);
  bool ok = distilled.complete() && distilled.gate->queue.empty() &&
            distilled.generations.size() == 200;
  std::string detail = fmt::format("distilled {} records;", distilled.generations.size());
  if (distilled.complete()) {
    for (const auto& g : distilled.gate->report.tasks) {
      ok = ok && g.agreed_rate() == 1.0;
      detail += fmt::format(" {} agreed {:.2f}", g.task_id, g.agreed_rate());
    }
  }

  MockScript key;
  for (const auto& r : corpus.records) {
    key.answer_key[r.id] = RenderLabelList(r.decision, reg.Get(r.task_id));
  }
  for (std::size_t k : {0u, 2u}) {
    BenchInputs bin{&corpus, &eval_tmpl, &reg, k, 1, "echo"};
    RunOptions bopt;
    bopt.out_dir = fixtures::TempDir("accept-echo-bench");
    const auto bench = RunBenchmark(bin, MockClient(std::make_shared<MockEndpoint>(key)), bopt);
    ok = ok && bench.complete();
    if (!bench.complete()) continue;
    detail += fmt::format("; bench k={}:", k);
    for (const auto& t : bench.report->tasks) {
      for (const auto& [name, lv] : {std::pair{"", &t.flat}, std::pair{"_Parent", &t.parent},
                                     std::pair{"_Child", &t.child}}) {
        if (!*lv) continue;
        ok = ok && (**lv).prf.f1 == 1.0;
        detail += fmt::format(" {}{}={}", t.task_id, name, FormatPercent((**lv).prf.f1));
      }
    }
  }
  const double secs = Seconds(start);
  return {ok && secs < 30.0, detail + fmt::format("; {:.2f}s", secs)};
}

Outcome ParserFuzz() {
  const TaskRegistry reg = fixtures::FourKindRegistry();
  const auto ids = reg.TaskIds();
  const LabelParser strict(reg, ParserConfig::For(reg, ParseMode::kStrict));
  std::mt19937_64 rng(77);
  const std::vector<std::string> delimiters = {"、", ", ", "，", "; ", " / ", "|"};
  std::size_t failures_seen = 0, closure_failures = 0;
  std::string first;
  for (int i = 0; i < 10000; ++i) {
    const TaskSpec& task = reg.Get(ids[rng() % ids.size()]);
    LabelSet decision = fixtures::RandomDecision(task, rng);
    // Shuffle insertion order; sets compare by membership.
    std::vector<std::string> codes = decision.codes();
    std::shuffle(codes.begin(), codes.end(), rng);
    decision = LabelSet(codes);

    CanonicalStyle style;
    style.delimiter = delimiters[rng() % delimiters.size()];
    style.display_names = rng() % 2 == 0;
    if (rng() % 3 == 0) {
      style.label_marker = "Label";
      style.explanation_marker = "Reasoning";
    }
    if (rng() % 4 == 0) style.separator = "：";
    const std::string raw = RenderCanonical(decision, "解释" + std::to_string(i), task, style);
    const ParsedOutput parsed = strict.Parse(raw, task.task_id);
    if (!parsed.ok() || !parsed.decision.SameMembers(decision) ||
        parsed.explanation != "解释" + std::to_string(i)) {
      if (failures_seen++ == 0) first = raw;
    }
    const LabelSet once = HierarchyClosure(decision, task.taxonomy);
    if (!HierarchyClosure(once, task.taxonomy).SameMembers(once) ||
        !IsClosed(once, task.taxonomy)) {
      ++closure_failures;
    }
  }
  std::string detail = fmt::format("10000 samples, {} round-trip failures, {} closure failures",
                                   failures_seen, closure_failures);
  if (!first.empty()) detail += "; first: " + first;
  return {failures_seen == 0 && closure_failures == 0, detail};
}

int Exec(const std::vector<std::string>& args, std::optional<std::chrono::microseconds> kill_after,
         bool* killed) {
  const pid_t pid = ::fork();
  if (pid == 0) {
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    const int devnull = ::open("/dev/null", O_WRONLY);
    ::dup2(devnull, 1);
    ::dup2(devnull, 2);
    ::execv(argv[0], argv.data());
    ::_exit(127);
  }
  if (kill_after) {
    std::this_thread::sleep_for(*kill_after);
    ::kill(pid, SIGKILL);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (killed) *killed = WIFSIGNALED(status);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome ResumeIdempotence() {
  const fs::path work = fixtures::TempDir("accept-resume");
  const TaskRegistry reg = fixtures::FourKindRegistry();
  const Corpus corpus = fixtures::MakeCorpus(reg, 10, 31);
  SaveCorpus(corpus, work / "corpus.jsonl");
  SaveCorpus(Corpus{fixtures::MakeExemplars(reg).records(), {}}, work / "exemplars.jsonl");
  WriteTextFile(work / "taxonomy.json", reg.ToJson());
  // Two contradicted records keep the revision queue non-trivial.
  std::string overrides;
  for (int i : {0, 7}) {
    const auto& r = corpus.records[i];
    const LabelSet wrong = r.decision.Contains("high_risk") ? LabelSet{"low_risk"} : LabelSet{"high_risk"};
    overrides += fmt::format("{}\"{}\":\"{}\"", overrides.empty() ? "" : ",", r.id,
                             RenderCanonical(wrong, "相反", reg.Get("SOS-HL-1K")));
  }
  std::string escaped;
  for (char c : overrides) escaped += c == '\n' ? std::string("\\n") : std::string(1, c);
  WriteTextFile(work / "endpoint.json",
                fmt::format(R"({{"name":"mock","provider":"mock","model":"mock","max_in_flight":3,)"
                            R"("mock":{{"rule":"echo_gold","latency_ms":8,"overrides":{{{}}}}}}})",
                            escaped));

  auto command = [&](const fs::path& out) {
    return std::vector<std::string>{MINDLOOM_CLI_PATH, "distill",
                                    "--corpus", (work / "corpus.jsonl").string(),
                                    "--exemplars", (work / "exemplars.jsonl").string(),
                                    "--endpoint", (work / "endpoint.json").string(),
                                    "--taxonomy", (work / "taxonomy.json").string(),
                                    "--out", out.string()};
  };
  const std::vector<std::string> artifacts = {"generations.jsonl", "distilled.jsonl",
                                              "gate_report.csv", "gate_summary.txt",
                                              "revision_queue.jsonl"};
  const fs::path reference = work / "reference";
  const int ref_status = Exec(command(reference), std::nullopt, nullptr);
  if (ref_status != 0 && ref_status != 2) {
    return {false, fmt::format("reference run exited {}", ref_status)};
  }
  const auto t0 = Clock::now();
  Exec(command(work / "timing"), std::nullopt, nullptr);
  const auto full_us =
      std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();

  std::mt19937_64 rng(4242);
  int killed_mid = 0, identical = 0;
  std::vector<std::string> diffs;
  for (int trial = 0; trial < 20; ++trial) {
    const fs::path out = work / fmt::format("trial-{:02d}", trial);
    bool killed = false;
    Exec(command(out), std::chrono::microseconds(rng() % std::max<long long>(full_us, 1)), &killed);
    killed_mid += killed && !fs::exists(out / "revision_queue.jsonl");
    const int status = Exec(command(out), std::nullopt, nullptr);
    bool same = status == 0 || status == 2;
    for (const auto& a : artifacts) {
      if (!fs::exists(out / a) || ReadTextFile(out / a) != ReadTextFile(reference / a)) {
        same = false;
        diffs.push_back(fmt::format("trial {} {}", trial, a));
      }
    }
    identical += same;
  }
  std::string detail = fmt::format(
      "{}/20 trials byte-identical after SIGKILL + resume ({} killed mid-run, full run {} ms)",
      identical, killed_mid, full_us / 1000);
  for (const auto& d : diffs) detail += "; differs: " + d;
  return {identical == 20 && killed_mid > 0, detail};
}

Outcome GatewayBounds() {
  std::string detail;
  bool ok = true;
  for (int bound : {1, 3, 8, 16}) {
    MockScript s;
    s.rule = MockScript::Rule::kConstantLabel;
    s.constant_labels = "低风险";
    s.latency = std::chrono::milliseconds(1);
    auto mock = std::make_shared<MockEndpoint>(s);
    std::vector<std::pair<std::string, std::string>> prompts;
    for (int i = 0; i < 120; ++i) prompts.emplace_back(fmt::format("p{:03d}", i), "prompt");
    const auto r = MockClient(mock, bound).CompleteBatch(prompts);
    ok = ok && r.completions.size() == 120 && mock->peak_in_flight() <= bound;
    detail += fmt::format("bound {} peak {}; ", bound, mock->peak_in_flight());
  }
  for (int max_attempts : {1, 2, 3, 5}) {
    MockScript s;
    s.rule = MockScript::Rule::kConstantLabel;
    s.constant_labels = "低风险";
    s.fail_first = {429, 503, 500, 429, 502, 503};
    s.fail_always = {"dead"};
    auto mock = std::make_shared<MockEndpoint>(s);
    EndpointConfig c;
    c.name = "mock";
    c.mock = std::make_shared<MockScript>(s);
    c.retry.max_attempts = max_attempts;
    GatewayClient client(c, mock, [](auto) {});
    std::vector<std::pair<std::string, std::string>> prompts = {{"dead", "x"}};
    for (int i = 0; i < 20; ++i) prompts.emplace_back(fmt::format("k{:02d}", i), "x");
    try {
      client.CompleteBatch(prompts);
    } catch (const BatchError&) {
    }
    std::size_t worst = 0;
    for (const auto& [id, _] : prompts) worst = std::max(worst, mock->calls_for(id));
    ok = ok && worst <= static_cast<std::size_t>(max_attempts) &&
         mock->calls_for("dead") == static_cast<std::size_t>(max_attempts);
    detail += fmt::format("max_attempts {} worst {}; ", max_attempts, worst);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  Report("metric-oracle-equivalence", OracleEquivalence);
  Report("published-prf-rows", PublishedRows);
  Report("rubric-algebra", RubricAlgebra);
  Report("sampling-quota", SamplingQuota);
  Report("split-size-reconstruction", SplitSizes);
  Report("echo-fixpoint", EchoFixpoint);
  Report("parser-roundtrip-fuzz", ParserFuzz);
  Report("resume-idempotence", ResumeIdempotence);
  Report("gateway-bounds", GatewayBounds);
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
