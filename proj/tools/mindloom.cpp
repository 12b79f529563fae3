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

// mindloom: command-line front end for the dataset and evaluation flows.
//
// Exit codes: 0 success (and every checked gate passed), 1 usage or runtime
// error, 2 a gate failed, 3 a run stopped before every record finished.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "mindloom/corpus.hpp"
#include "mindloom/errors.hpp"
#include "mindloom/gates.hpp"
#include "mindloom/gateway.hpp"
#include "mindloom/human_eval.hpp"
#include "mindloom/io.hpp"
#include "mindloom/metrics.hpp"
#include "mindloom/mock_endpoint.hpp"
#include "mindloom/parser.hpp"
#include "mindloom/pipelines.hpp"
#include "mindloom/prompt.hpp"
#include "mindloom/review_server.hpp"

namespace fs = std::filesystem;
using namespace mindloom;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitGateFailed = 2;
constexpr int kExitIncomplete = 3;

struct Common {
  std::string taxonomy;
  std::string parser_mode = "strict";

  TaskRegistry Registry() const {
    return taxonomy.empty() ? TaskRegistry::Defaults() : TaskRegistry::Load(taxonomy);
  }
  ParseMode Mode() const { return ParseParseMode(parser_mode); }
};

void AddCommon(CLI::App* cmd, Common& c, bool with_parser = true) {
  cmd->add_option("--taxonomy", c.taxonomy, "Task taxonomy JSON (default: built-in tasks)")
      ->check(CLI::ExistingFile);
  if (with_parser) {
    cmd->add_option("--parser-mode", c.parser_mode, "strict or lenient")
        ->check(CLI::IsMember({"strict", "lenient"}));
  }
}

void ShowProgress(std::size_t done, std::size_t total) {
  if (done == total || done % 50 == 0) std::cerr << fmt::format("  {}/{}\n", done, total);
}

// Loads the endpoint and, for echo mocks keyed on the corpus, fills the
// answer key with each record's rendered gold labels.
GatewayClient MakeClient(const std::string& path, const Corpus* corpus,
                         const TaskRegistry& registry) {
  EndpointConfig config = EndpointConfig::Load(path);
  if (config.mock && config.mock->answer_key_from_corpus && corpus) {
    auto script = std::make_shared<MockScript>(*config.mock);
    for (const auto& r : corpus->records) {
      script->answer_key[r.id] = RenderLabelList(r.decision, registry.Get(r.task_id));
    }
    config.mock = script;
  }
  auto endpoint = MakeEndpoint(config);
  return GatewayClient(std::move(config), std::move(endpoint));
}

void PrintFailures(const std::map<std::string, std::string>& failures) {
  std::size_t shown = 0;
  for (const auto& [id, why] : failures) {
    if (shown++ == 10) {
      std::cerr << fmt::format("  ... and {} more\n", failures.size() - 10);
      break;
    }
    std::cerr << fmt::format("  {}: {}\n", id, why);
  }
}

std::vector<std::size_t> ParseCounts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stoul(part));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mindloom: instruction-data distillation and evaluation toolkit"};
  app.set_version_flag("--version", std::string(ToolVersion()));
  app.require_subcommand(1);
  int exit_code = kExitOk;

  // split
  Common split_c;
  std::string split_in, split_out;
  double f_train = 0.6, f_val = 0.2, f_test = 0.2;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Assign train/val/test per task");
  AddCommon(split, split_c, false);
  split->add_option("--in", split_in, "Input corpus")->required()->check(CLI::ExistingFile);
  split->add_option("--out", split_out, "Output corpus")->required();
  split->add_option("--train", f_train, "Train fraction");
  split->add_option("--val", f_val, "Validation fraction");
  split->add_option("--test", f_test, "Test fraction");
  split->add_option("--seed", split_seed, "Split seed");
  std::vector<std::string> task_fractions;
  split->add_option("--task-fractions", task_fractions,
                    "Per-task override TASK=train,val,test (repeatable)");
  split->callback([&] {
    const TaskRegistry registry = split_c.Registry();
    const Corpus in = LoadCorpus(split_in);
    for (const auto& r : in.records) {
      const auto v = ValidateRecord(r, registry);
      if (!v.ok()) throw PreconditionError(r.id + ": " + v.violations.front());
    }
    std::map<std::string, SplitFractions> per_task;
    for (const auto& spec : task_fractions) {
      const auto eq = spec.rfind('=');
      if (eq == std::string::npos) throw PreconditionError("expected TASK=train,val,test: " + spec);
      std::vector<double> f;
      std::stringstream ss(spec.substr(eq + 1));
      std::string part;
      while (std::getline(ss, part, ',')) f.push_back(std::stod(part));
      if (f.size() != 3) throw PreconditionError("expected three fractions: " + spec);
      per_task[spec.substr(0, eq)] = {f[0], f[1], f[2]};
    }
    Corpus out = SplitCorpus(in, {f_train, f_val, f_test}, per_task, split_seed);
    out.provenance.tool_version = std::string(ToolVersion());
    if (out.provenance.created_at.empty()) out.provenance.created_at = UtcNow();
    SaveCorpus(out, split_out);
    std::cout << FormatCorpusStats(ComputeCorpusStats(out));
  });

  // stats
  std::string stats_in;
  auto* stats = app.add_subcommand("stats", "Per-task split and label counts");
  stats->add_option("--in", stats_in, "Corpus")->required()->check(CLI::ExistingFile);
  stats->callback([&] { std::cout << FormatCorpusStats(ComputeCorpusStats(LoadCorpus(stats_in))); });

  // taxonomy
  Common tax_c;
  std::string tax_out;
  auto* taxonomy = app.add_subcommand("taxonomy", "Print the task taxonomy as JSON");
  AddCommon(taxonomy, tax_c, false);
  taxonomy->add_option("--out", tax_out, "Write here instead of stdout");
  taxonomy->callback([&] {
    const std::string json = tax_c.Registry().ToJson();
    if (tax_out.empty()) {
      std::cout << json;
    } else {
      WriteTextFile(tax_out, json);
    }
  });

  // validate
  Common val_c;
  std::string val_in;
  auto* validate = app.add_subcommand("validate", "Check every record against the taxonomy");
  AddCommon(validate, val_c, false);
  validate->add_option("--in", val_in, "Corpus")->required()->check(CLI::ExistingFile);
  validate->callback([&] {
    const TaskRegistry registry = val_c.Registry();
    std::size_t bad = 0;
    const Corpus corpus = LoadCorpus(val_in);
    for (const auto& r : corpus.records) {
      for (const auto& v : ValidateRecord(r, registry).violations) {
        std::cout << fmt::format("{}: {}\n", r.id, v);
        ++bad;
      }
    }
    std::cout << fmt::format("{} records, {} violations\n", corpus.records.size(), bad);
    if (bad) exit_code = kExitGateFailed;
  });

  // distill
  Common dist_c;
  std::string dist_corpus, dist_exemplars, dist_endpoint, dist_out, dist_template, coverage = "per-label";
  std::size_t per_label = 2;
  std::optional<std::size_t> dist_budget;
  double dist_threshold = 0.95;
  auto* distill = app.add_subcommand("distill", "Generate explanations with a teacher endpoint");
  AddCommon(distill, dist_c);
  distill->add_option("--corpus", dist_corpus, "Labeled corpus")->required()->check(CLI::ExistingFile);
  distill->add_option("--exemplars", dist_exemplars, "Expert exemplar records")
      ->required()->check(CLI::ExistingFile);
  distill->add_option("--endpoint", dist_endpoint, "Endpoint config JSON")
      ->required()->check(CLI::ExistingFile);
  distill->add_option("--out", dist_out, "Run directory (resumed if it exists)")->required();
  distill->add_option("--template", dist_template, "Prompt template file")->check(CLI::ExistingFile);
  distill->add_option("--coverage", coverage, "all or per-label")
      ->check(CLI::IsMember({"all", "per-label"}));
  distill->add_option("--per-label", per_label, "Exemplars per gold label");
  distill->add_option("--max-requests", dist_budget, "Stop after this many new requests");
  distill->add_option("--threshold", dist_threshold, "Correctness gate threshold");
  distill->callback([&] {
    const TaskRegistry registry = dist_c.Registry();
    const Corpus corpus = LoadCorpus(dist_corpus);
    const ExemplarSet exemplars = ExemplarSet::Load(dist_exemplars);
    const PromptTemplate tmpl =
        dist_template.empty() ? PromptTemplate::BuiltinDistill() : PromptTemplate::Load(dist_template);
    const GatewayClient client = MakeClient(dist_endpoint, &corpus, registry);
    DistillInputs in;
    in.corpus = &corpus;
    in.exemplars = &exemplars;
    in.tmpl = &tmpl;
    in.registry = &registry;
    in.options.coverage = coverage == "all" ? CoverageMode::kAll : CoverageMode::kPerLabel;
    in.options.per_label = per_label;
    in.thresholds.correctness = dist_threshold;
    RunOptions opts{dist_out, dist_c.Mode(), dist_budget, ShowProgress};
    const DistillResult r = RunDistillation(in, client, opts);
    std::cerr << fmt::format("run {}: {} new requests, {}/{} records done\n", r.manifest.run_id,
                             r.issued, r.manifest.completed, r.manifest.total);
    if (!r.complete()) {
      PrintFailures(r.manifest.failures);
      std::cerr << "run paused; rerun the same command to resume\n";
      exit_code = kExitIncomplete;
      return;
    }
    std::cout << GateReportSummary(r.gate->report);
    if (!r.gate->report.Passed()) exit_code = kExitGateFailed;
  });

  // bench
  Common bench_c;
  std::string bench_corpus, bench_endpoint, bench_out, bench_template, bench_label;
  std::size_t bench_k = 0;
  std::uint64_t bench_seed = 0;
  std::optional<std::size_t> bench_budget;
  auto* bench = app.add_subcommand("bench", "Evaluate an endpoint on the test split");
  AddCommon(bench, bench_c);
  bench->add_option("--corpus", bench_corpus, "Split corpus")->required()->check(CLI::ExistingFile);
  bench->add_option("--endpoint", bench_endpoint, "Endpoint config JSON")
      ->required()->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "Run directory (resumed if it exists)")->required();
  bench->add_option("--template", bench_template, "Evaluation template file")->check(CLI::ExistingFile);
  bench->add_option("--k", bench_k, "Few-shot exemplars per prompt (0 = zero-shot)");
  bench->add_option("--seed", bench_seed, "Exemplar selection seed");
  bench->add_option("--label", bench_label, "Row label in reports");
  bench->add_option("--max-requests", bench_budget, "Stop after this many new requests");
  bench->callback([&] {
    const TaskRegistry registry = bench_c.Registry();
    const Corpus corpus = LoadCorpus(bench_corpus);
    const PromptTemplate tmpl =
        bench_template.empty() ? PromptTemplate::BuiltinEval() : PromptTemplate::Load(bench_template);
    const GatewayClient client = MakeClient(bench_endpoint, &corpus, registry);
    BenchInputs in{&corpus, &tmpl, &registry, bench_k, bench_seed, bench_label};
    RunOptions opts{bench_out, bench_c.Mode(), bench_budget, ShowProgress};
    const BenchResult r = RunBenchmark(in, client, opts);
    std::cerr << fmt::format("run {}: {} new requests, {}/{} records done\n", r.manifest.run_id,
                             r.issued, r.manifest.completed, r.manifest.total);
    if (!r.complete()) {
      PrintFailures(r.manifest.failures);
      std::cerr << "run paused; rerun the same command to resume\n";
      exit_code = kExitIncomplete;
      return;
    }
    std::cout << FormatReportTable(std::span(&*r.report, 1)).text;
  });

  // gate
  Common gate_c;
  std::string gate_corpus, gate_generations, gate_out;
  double gate_threshold = 0.95;
  auto* gate = app.add_subcommand("gate", "Correctness gate over stored generations");
  AddCommon(gate, gate_c);
  gate->add_option("--corpus", gate_corpus, "Corpus with gold labels")->required()->check(CLI::ExistingFile);
  gate->add_option("--generations", gate_generations, "generations.jsonl")
      ->required()->check(CLI::ExistingFile);
  gate->add_option("--out", gate_out, "Directory for the report and revision queue");
  gate->add_option("--threshold", gate_threshold, "Agreed-rate threshold");
  gate->callback([&] {
    const TaskRegistry registry = gate_c.Registry();
    const LabelParser parser(registry, ParserConfig::For(registry, gate_c.Mode()));
    GateThresholds t;
    t.correctness = gate_threshold;
    const auto result =
        CorrectnessGate(LoadCorpus(gate_corpus), LoadGenerations(gate_generations), parser, registry, t);
    if (!gate_out.empty()) {
      fs::create_directories(gate_out);
      WriteTextFile(fs::path(gate_out) / "gate_report.csv", GateReportCsv(result.report));
      WriteTextFile(fs::path(gate_out) / "gate_summary.txt", GateReportSummary(result.report));
      result.queue.Save(fs::path(gate_out) / "revision_queue.jsonl");
    }
    std::cout << GateReportSummary(result.report);
    if (!result.report.Passed()) exit_code = kExitGateFailed;
  });

  // consistency export|ingest
  auto* consistency = app.add_subcommand("consistency", "Explanation-consistency audit");
  consistency->require_subcommand(1);
  std::string cx_corpus, cx_out;
  auto* cx = consistency->add_subcommand("export", "Write the explanation-as-text corpus");
  cx->add_option("--corpus", cx_corpus, "Distilled corpus")->required()->check(CLI::ExistingFile);
  cx->add_option("--out", cx_out, "Derived corpus path")->required();
  cx->callback([&] {
    const ConsistencyExport e = ExportConsistencyCorpus(LoadCorpus(cx_corpus));
    SaveCorpus(e.corpus, cx_out);
    std::cout << fmt::format("{} records written, {} skipped (empty explanation)\n",
                             e.corpus.records.size(), e.skipped.size());
  });
  Common ci_c;
  std::string ci_corpus, ci_predictions, ci_out;
  double test_min = 0.95, expert_min = 0.90;
  auto* ci = consistency->add_subcommand("ingest", "Score classifier predictions");
  AddCommon(ci, ci_c, false);
  ci->add_option("--corpus", ci_corpus, "Derived corpus")->required()->check(CLI::ExistingFile);
  ci->add_option("--predictions", ci_predictions, "JSONL of {id, decision}")
      ->required()->check(CLI::ExistingFile);
  ci->add_option("--test-min", test_min, "Minimum F1 on the test split");
  ci->add_option("--expert-min", expert_min, "Minimum F1 on the expert set");
  ci->add_option("--out", ci_out, "Directory for the report");
  ci->callback([&] {
    const TaskRegistry registry = ci_c.Registry();
    GateThresholds t;
    t.consistency_test = test_min;
    t.consistency_expert = expert_min;
    const GateReport report =
        IngestConsistencyPredictions(LoadCorpus(ci_corpus), LoadPredictions(ci_predictions), registry, t);
    if (!ci_out.empty()) {
      fs::create_directories(ci_out);
      WriteTextFile(fs::path(ci_out) / "consistency_report.csv", GateReportCsv(report));
      WriteTextFile(fs::path(ci_out) / "consistency_summary.txt", GateReportSummary(report));
    }
    std::cout << GateReportSummary(report);
    if (!report.Passed()) exit_code = kExitGateFailed;
  });

  // sample
  Common sample_c;
  std::string sample_corpus, sample_generations, sample_out, sample_split = "test", sample_alloc;
  std::size_t sample_n = 100;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "Draw a stratified batch for expert review");
  AddCommon(sample, sample_c);
  sample->add_option("--corpus", sample_corpus, "Corpus")->required()->check(CLI::ExistingFile);
  sample->add_option("--generations", sample_generations, "generations.jsonl")
      ->check(CLI::ExistingFile);
  sample->add_option("--out", sample_out, "Batch JSON")->required();
  sample->add_option("--n", sample_n, "Batch size");
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--split", sample_split, "train, val, test, unsplit or all");
  sample->add_option("--allocation", sample_alloc, "Explicit per-task counts, e.g. 14,36,50");
  sample->callback([&] {
    const TaskRegistry registry = sample_c.Registry();
    Corpus corpus = LoadCorpus(sample_corpus);
    if (sample_split != "all") {
      const auto s = ParseSplit(sample_split);
      if (!s) throw PreconditionError("unknown split '" + sample_split + "'");
      corpus = SelectSplit(corpus, *s);
    }
    std::map<std::string, std::string> generations;
    if (!sample_generations.empty()) generations = LoadGenerations(sample_generations);
    SampleOptions opts;
    opts.n = sample_n;
    opts.seed = sample_seed;
    if (!sample_alloc.empty()) opts.allocation = ParseCounts(sample_alloc);
    const ReviewBatch batch = SampleForReview(corpus, generations, registry, sample_c.Mode(), opts);
    batch.Save(sample_out);
    for (std::size_t i = 0; i < batch.strata.size(); ++i) {
      std::cout << fmt::format("{:<14} {:>4} of {}\n", batch.strata[i], batch.allocation[i],
                               batch.stratum_sizes[i]);
    }
  });

  // serve-review
  Common sr_c;
  std::string sr_batch, sr_state, sr_host = "127.0.0.1", sr_ui, sr_corpus, sr_generations, sr_queue,
                                  sr_audit;
  int sr_port = 8080;
  std::size_t sr_reviews = 1;
  long sr_lease = 900;
  auto* serve = app.add_subcommand("serve-review", "Serve the review API for a batch");
  AddCommon(serve, sr_c, false);
  serve->add_option("--batch", sr_batch, "Batch JSON from `sample`")->required()->check(CLI::ExistingFile);
  serve->add_option("--state", sr_state, "Append-only score log")->required();
  serve->add_option("--host", sr_host, "Bind address");
  serve->add_option("--port", sr_port, "Port (0 picks one)");
  serve->add_option("--ui-dir", sr_ui, "Static review UI build")->check(CLI::ExistingDirectory);
  serve->add_option("--reviews-per-item", sr_reviews, "Scores required per item");
  serve->add_option("--lease-seconds", sr_lease, "Claim lease length");
  serve->add_option("--corpus", sr_corpus, "Corpus that corrections are written back to")
      ->check(CLI::ExistingFile);
  serve->add_option("--generations", sr_generations, "generations.jsonl kept in step with --corpus")
      ->check(CLI::ExistingFile);
  serve->add_option("--queue", sr_queue, "revision_queue.jsonl kept in step with --corpus");
  serve->add_option("--audit", sr_audit, "Revision audit log (default: <corpus>.revisions.jsonl)");
  serve->callback([&] {
    const TaskRegistry registry = sr_c.Registry();
    ReviewConfig config;
    config.reviews_per_item = sr_reviews;
    config.lease = std::chrono::seconds(sr_lease);
    config.state_path = sr_state;

    // Corrections become revisions of the distilled corpus when one is given.
    struct Revisions {
      Corpus corpus;
      std::map<std::string, std::string> generations;
      RevisionQueue queue;
      std::optional<RevisionLog> log;
    };
    auto rev = std::make_shared<Revisions>();
    if (!sr_corpus.empty()) {
      rev->corpus = LoadCorpus(sr_corpus);
      if (!sr_generations.empty()) rev->generations = LoadGenerations(sr_generations);
      if (!sr_queue.empty() && fs::exists(sr_queue)) rev->queue = RevisionQueue::Load(sr_queue);
      rev->log.emplace(sr_audit.empty() ? sr_corpus + ".revisions.jsonl" : sr_audit);
      config.on_correction = [&, rev](const Correction& c) {
        RevisionContext ctx{&rev->corpus, sr_generations.empty() ? nullptr : &rev->generations,
                            &registry, &*rev->log};
        if (!rev->queue.Find(c.item_id)) {
          // Reviewer disagreed with an item the gate had accepted.
          RevisionItem item;
          item.id = c.item_id;
          for (const auto& r : rev->corpus.records) {
            if (r.id == c.item_id) {
              item.task_id = r.task_id;
              item.gold = r.decision;
            }
          }
          rev->queue.Add(std::move(item));
        }
        ApplyRevision(rev->queue, ctx, c.item_id, c.decision, c.explanation, c.reviewer);
        SaveCorpus(rev->corpus, sr_corpus);
        if (!sr_generations.empty()) {
          WriteTextFile(sr_generations, SerializeGenerations(rev->generations, rev->corpus));
        }
        if (!sr_queue.empty()) rev->queue.Save(sr_queue);
      };
    }
    ReviewStore store(ReviewBatch::Load(sr_batch), registry, config);
    ReviewServerOptions opts;
    opts.host = sr_host;
    opts.port = sr_port;
    opts.ui_dir = sr_ui;
    ReviewServer server(store, registry, opts);
    std::cout << fmt::format("review API on {} ({} items)\n", server.base_url(),
                             store.batch().items.size())
              << std::flush;
    server.Run();
  });

  // report
  std::vector<std::string> report_in;
  std::string report_csv;
  auto* report = app.add_subcommand("report", "Render metrics reports as a table");
  report->add_option("reports", report_in, "report.json files")->required()->check(CLI::ExistingFile);
  report->add_option("--csv", report_csv, "Also write CSV here");
  report->callback([&] {
    std::vector<MetricsReport> reports;
    for (const auto& p : report_in) reports.push_back(ReportFromJson(ReadTextFile(p), p));
    const ReportTable table = FormatReportTable(reports);
    std::cout << table.text;
    if (!report_csv.empty()) WriteTextFile(report_csv, table.csv);
  });

  // compare
  std::vector<std::string> cmp_in;
  std::size_t cmp_baseline = 0;
  std::string cmp_csv;
  auto* compare = app.add_subcommand("compare", "Ablation-style F1 table with deltas");
  compare->add_option("reports", cmp_in, "report.json files")->required()->check(CLI::ExistingFile);
  compare->add_option("--baseline", cmp_baseline, "Index of the baseline report");
  compare->add_option("--csv", cmp_csv, "Also write CSV here");
  compare->callback([&] {
    std::vector<MetricsReport> reports;
    for (const auto& p : cmp_in) reports.push_back(ReportFromJson(ReadTextFile(p), p));
    const ComparisonTable table = CompareRuns(reports, cmp_baseline);
    std::cout << table.text;
    if (!cmp_csv.empty()) WriteTextFile(cmp_csv, table.csv);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const IdMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (std::size_t i = 0; i < e.ids().size() && i < 20; ++i) std::cerr << "  " << e.ids()[i] << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return exit_code;
}
