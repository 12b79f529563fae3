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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mindloom/errors.hpp"
#include "mindloom/gates.hpp"
#include "mindloom/io.hpp"

namespace mindloom {
namespace {

class GatesTest : public ::testing::Test {
 protected:
  TaskRegistry reg = fixtures::FourKindRegistry();
  LabelParser parser{reg, ParserConfig::For(reg, ParseMode::kStrict)};

  Corpus SosCorpus(std::size_t n) {
    Corpus c;
    c.records = fixtures::MakeRecords(reg.Get("SOS-HL-1K"), n, 5);
    for (auto& r : c.records) r.split = Split::kTrain;
    return c;
  }

  std::map<std::string, std::string> Echo(const Corpus& c) {
    std::map<std::string, std::string> g;
    for (const auto& r : c.records) {
      g[r.id] = RenderCanonical(r.decision, "解释文字" + r.id, reg.Get(r.task_id));
    }
    return g;
  }

  static LabelSet Flip(const LabelSet& d) {
    return d.Contains("high_risk") ? LabelSet{"low_risk"} : LabelSet{"high_risk"};
  }
};

TEST_F(GatesTest, NineOfTenFailsDefaultThreshold) {
  const Corpus c = SosCorpus(10);
  auto gens = Echo(c);
  gens[c.records[3].id] = RenderCanonical(Flip(c.records[3].decision), "x", reg.Get("SOS-HL-1K"));
  const auto result = CorrectnessGate(c, gens, parser, reg);
  const auto* g = result.report.Find("SOS-HL-1K");
  ASSERT_NE(g, nullptr);
  EXPECT_DOUBLE_EQ(g->agreed_rate(), 0.9);
  EXPECT_FALSE(result.report.CorrectnessPassed(*g));
  EXPECT_FALSE(result.report.Passed());
  ASSERT_EQ(result.queue.items().size(), 1u);
  EXPECT_EQ(result.queue.items()[0].kind, Disagreement::kLabelMismatch);
}

TEST_F(GatesTest, ThresholdAnchor) {
  TaskGate g;
  g.n = 1000;
  g.agreed = 951;
  GateReport r;
  r.has_correctness = true;
  r.tasks = {g};
  EXPECT_TRUE(r.CorrectnessPassed(g));
  EXPECT_TRUE(r.Passed());
  g.agreed = 949;
  EXPECT_FALSE(r.CorrectnessPassed(g));
}

TEST_F(GatesTest, EchoGivesFullAgreementAcrossKinds) {
  const Corpus c = fixtures::MakeCorpus(reg, 25, 8);
  const auto result = CorrectnessGate(c, Echo(c), parser, reg);
  EXPECT_TRUE(result.queue.empty());
  EXPECT_EQ(result.report.tasks.size(), 4u);
  for (const auto& t : result.report.tasks) {
    EXPECT_EQ(t.agreed_rate(), 1.0) << t.task_id;
    EXPECT_DOUBLE_EQ(t.agreed_rate() + t.disagreed_rate() + t.parse_failure_rate(), 1.0);
  }
  EXPECT_NE(GateReportSummary(result.report).find("overall: PASS"), std::string::npos);
}

TEST_F(GatesTest, ParseFailureIsItsOwnCategory) {
  const Corpus c = SosCorpus(4);
  auto gens = Echo(c);
  gens[c.records[0].id] = "没有任何标记的回答";
  const auto result = CorrectnessGate(c, gens, parser, reg);
  const auto* g = result.report.Find("SOS-HL-1K");
  EXPECT_EQ(g->parse_failure, 1u);
  EXPECT_EQ(g->disagreed, 0u);
  EXPECT_EQ(result.queue.items()[0].kind, Disagreement::kParseFailure);
  EXPECT_EQ(result.queue.items()[0].parse_status, ParseStatus::kNoMarker);
}

TEST_F(GatesTest, MissingGenerationsAreNamed) {
  const Corpus c = SosCorpus(5);
  auto gens = Echo(c);
  gens.erase(c.records[1].id);
  try {
    CorrectnessGate(c, gens, parser, reg);
    FAIL();
  } catch (const IdMismatchError& e) {
    EXPECT_EQ(e.ids(), std::vector<std::string>{c.records[1].id});
  }
}

TEST_F(GatesTest, CsvHeaderAndRows) {
  const Corpus c = SosCorpus(3);
  const auto result = CorrectnessGate(c, Echo(c), parser, reg);
  const std::string csv = GateReportCsv(result.report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "task,n,agreed,disagreed,parse_failure,agreed_rate,disagreed_rate,parse_failure_rate,"
            "correctness_pass,consistency_test_n,consistency_test_f1,consistency_expert_n,"
            "consistency_expert_f1,consistency_pass");
  EXPECT_NE(csv.find("SOS-HL-1K,3,3,0,0,1.0000,0.0000,0.0000,true,0,,0,,"), std::string::npos);
}

TEST_F(GatesTest, ReviseOneRegatesToFullAgreement) {
  Corpus c = SosCorpus(6);
  auto gens = Echo(c);
  const auto& target = c.records[2];
  gens[target.id] = RenderCanonical(Flip(target.decision), "x", reg.Get("SOS-HL-1K"));
  auto result = CorrectnessGate(c, gens, parser, reg);
  ASSERT_EQ(result.queue.pending(), 1u);

  const auto dir = fixtures::TempDir("revise");
  RevisionLog log(dir / "audit.jsonl");
  RevisionContext ctx{&c, &gens, &reg, &log};
  const std::string id = target.id;
  const LabelSet gold = target.decision;
  ApplyRevision(result.queue, ctx, id, gold, "专家改写的解释", "expert-a");
  EXPECT_EQ(result.queue.pending(), 0u);
  EXPECT_EQ(result.queue.Find(id)->status, ReviewStatus::kRevised);

  const auto again = CorrectnessGate(c, gens, parser, reg);
  EXPECT_EQ(again.report.Find("SOS-HL-1K")->agreed_rate(), 1.0);
  const auto& revised = *std::find_if(c.records.begin(), c.records.end(),
                                      [&](const auto& r) { return r.id == id; });
  EXPECT_TRUE(revised.expert_revised);
  EXPECT_EQ(revised.explanation, "专家改写的解释");

  const std::string trail = ReadTextFile(dir / "audit.jsonl");
  EXPECT_NE(trail.find("expert-a"), std::string::npos);
  EXPECT_NE(trail.find("\"before\""), std::string::npos);

  EXPECT_THROW(ApplyRevision(result.queue, ctx, id, gold, "再次", "expert-b"), StateError);
}

TEST_F(GatesTest, RevisionMustBeValid) {
  Corpus c = SosCorpus(2);
  auto gens = Echo(c);
  gens[c.records[0].id] = "无标记";
  auto result = CorrectnessGate(c, gens, parser, reg);
  RevisionLog log(fixtures::TempDir("invalid") / "a.jsonl");
  RevisionContext ctx{&c, &gens, &reg, &log};
  EXPECT_THROW(ApplyRevision(result.queue, ctx, c.records[0].id, {"high_risk", "low_risk"}, "x", "e"),
               PreconditionError);
  EXPECT_EQ(result.queue.pending(), 1u);
}

TEST_F(GatesTest, AcceptAsIsAdoptsParsedLabels) {
  Corpus c = SosCorpus(3);
  auto gens = Echo(c);
  const std::string id = c.records[0].id;
  const LabelSet teacher = Flip(c.records[0].decision);
  gens[id] = RenderCanonical(teacher, "老师的解释", reg.Get("SOS-HL-1K"));
  auto result = CorrectnessGate(c, gens, parser, reg);
  const auto dir = fixtures::TempDir("accept");
  RevisionLog log(dir / "audit.jsonl");
  RevisionContext ctx{&c, &gens, &reg, &log};
  AcceptAsIs(result.queue, ctx, id, "expert-a", "原标注有误");
  EXPECT_EQ(c.records[0].decision, teacher);
  EXPECT_EQ(c.records[0].explanation, "老师的解释");
  EXPECT_EQ(result.queue.Find(id)->status, ReviewStatus::kAcceptedAsIs);
  EXPECT_NE(ReadTextFile(dir / "audit.jsonl").find("原标注有误"), std::string::npos);
  EXPECT_EQ(CorrectnessGate(c, gens, parser, reg).report.Find("SOS-HL-1K")->agreed_rate(), 1.0);
}

TEST_F(GatesTest, AcceptAsIsRefusesParseFailures) {
  Corpus c = SosCorpus(2);
  auto gens = Echo(c);
  gens[c.records[0].id] = "无标记";
  auto result = CorrectnessGate(c, gens, parser, reg);
  RevisionLog log(fixtures::TempDir("acceptpf") / "a.jsonl");
  RevisionContext ctx{&c, &gens, &reg, &log};
  EXPECT_THROW(AcceptAsIs(result.queue, ctx, c.records[0].id, "e", "j"), StateError);
}

TEST_F(GatesTest, QueueRoundTripAndDuplicates) {
  RevisionQueue q;
  q.Add({"b", "SOS-HL-1K", "raw", {"low_risk"}, {"high_risk"}, Disagreement::kLabelMismatch,
         ParseStatus::kOk, ReviewStatus::kPending});
  q.Add({"a", "CP", "", {}, {"P1"}, Disagreement::kParseFailure, ParseStatus::kNoMarker,
         ReviewStatus::kRevised});
  EXPECT_EQ(q.items().front().id, "a");
  EXPECT_THROW(q.Add(q.items().front()), PreconditionError);
  const auto back = RevisionQueue::FromJsonl(q.ToJsonl());
  EXPECT_EQ(back.items(), q.items());
  EXPECT_EQ(back.pending(), 1u);
}

TEST_F(GatesTest, ExportSwapsTextForExplanation) {
  Corpus c = SosCorpus(4);
  for (auto& r : c.records) r.explanation = "解释-" + r.id;
  c.records[0].split = Split::kTest;
  c.records[3].explanation.clear();
  const auto exp = ExportConsistencyCorpus(c);
  EXPECT_EQ(exp.corpus.records.size(), 3u);
  EXPECT_EQ(exp.skipped, std::vector<std::string>{c.records[3].id});
  const auto& d = exp.corpus.records.front();
  EXPECT_EQ(d.text, "解释-" + c.records[0].id);
  EXPECT_EQ(d.split, Split::kTest);
  EXPECT_EQ(d.decision, c.records[0].decision);
}

// Derived corpus with a 20-record test split and a 12-record expert set
// (11 high_risk, 1 low_risk) for the binary task.
Corpus DerivedFixture(const TaskRegistry& reg) {
  Corpus c;
  c.records = fixtures::MakeRecords(reg.Get("SOS-HL-1K"), 20, 3, "t");
  for (auto& r : c.records) r.split = Split::kTest;
  for (int i = 0; i < 12; ++i) {
    InstructionRecord r;
    r.id = "expert-" + std::to_string(100 + i);
    r.task_id = "SOS-HL-1K";
    r.text = "专家解释";
    r.decision = {i < 11 ? "high_risk" : "low_risk"};
    r.source = "expert";
    c.records.push_back(r);
  }
  return c;
}

TEST_F(GatesTest, IngestPerfectAndCalibratedExpertSet) {
  const Corpus derived = DerivedFixture(reg);
  std::map<std::string, LabelSet> preds;
  for (const auto& r : derived.records) {
    preds[r.id] = r.source == "expert" ? LabelSet{"high_risk"} : r.decision;
  }
  const auto report = IngestConsistencyPredictions(derived, preds, reg);
  const auto* g = report.Find("SOS-HL-1K");
  ASSERT_NE(g, nullptr);
  EXPECT_EQ(*g->consistency_test_f1, 1.0);
  EXPECT_EQ(g->consistency_test_n, 20u);
  EXPECT_EQ(g->consistency_expert_n, 12u);
  EXPECT_NEAR(100 * *g->consistency_expert_f1, 95.65, 0.01);
  EXPECT_TRUE(report.ConsistencyPassed(*g));
  EXPECT_TRUE(report.Passed());
}

TEST_F(GatesTest, IngestNamesMissingIds) {
  const Corpus derived = DerivedFixture(reg);
  std::map<std::string, LabelSet> preds;
  for (const auto& r : derived.records) preds[r.id] = r.decision;
  std::vector<std::string> removed;
  for (int i = 0; i < 3; ++i) {
    removed.push_back(derived.records[i].id);
    preds.erase(derived.records[i].id);
  }
  try {
    IngestConsistencyPredictions(derived, preds, reg);
    FAIL();
  } catch (const IdMismatchError& e) {
    EXPECT_EQ(e.ids(), removed);
  }
}

TEST_F(GatesTest, PredictionsFileFormat) {
  const auto p = ParsePredictions("{\"id\":\"a\",\"decision\":[\"high_risk\"]}\n{\"id\":\"b\",\"decision\":[]}\n");
  EXPECT_EQ(p.size(), 2u);
  EXPECT_EQ(p.at("a"), LabelSet({"high_risk"}));
  EXPECT_THROW(ParsePredictions("{\"id\":\"a\"}\n"), FormatError);
}

}  // namespace
}  // namespace mindloom
