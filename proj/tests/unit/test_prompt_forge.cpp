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
#include "mindloom/io.hpp"
#include "mindloom/prompt.hpp"

namespace mindloom {
namespace {

class PromptTest : public ::testing::Test {
 protected:
  TaskRegistry reg = fixtures::FourKindRegistry();
  ExemplarSet exemplars = fixtures::MakeExemplars(reg);
  PromptTemplate distill = PromptTemplate::BuiltinDistill();
  PromptTemplate eval = PromptTemplate::BuiltinEval();

  InstructionRecord Record(const std::string& task, LabelSet decision, Split split = Split::kTest) {
    InstructionRecord r;
    r.id = "target-1";
    r.task_id = task;
    r.text = "最近总是睡不着，觉得一切都没有意义。";
    r.description = reg.Get(task).description;
    r.query = reg.Get(task).query;
    r.decision = std::move(decision);
    r.split = split;
    return r;
  }

  std::vector<InstructionRecord> TrainShots(const std::string& task, std::size_t k) {
    auto shots = SelectExemplars(reg.Get(task), exemplars, k, 7);
    for (auto& s : shots) s.split = Split::kTrain;
    return shots;
  }
};

TEST_F(PromptTest, ShippedTemplatesMatchBuiltins) {
  const auto d = PromptTemplate::Load(MINDLOOM_SOURCE_DIR "/data/templates/distill_zh.txt");
  const auto e = PromptTemplate::Load(MINDLOOM_SOURCE_DIR "/data/templates/eval_zh.txt");
  const auto r = Record("SOS-HL-1K", {"high_risk"});
  EXPECT_EQ(RenderDistillationPrompt(r, exemplars, d, reg.Get("SOS-HL-1K")),
            RenderDistillationPrompt(r, exemplars, distill, reg.Get("SOS-HL-1K")));
  EXPECT_EQ(RenderEvalPrompt(r, {}, e, reg.Get("SOS-HL-1K")),
            RenderEvalPrompt(r, {}, eval, reg.Get("SOS-HL-1K")));
  EXPECT_EQ(d.id(), "builtin-distill-zh");
  EXPECT_EQ(e.kind(), TemplateKind::kEval);
}

TEST_F(PromptTest, ZeroShotHasNoExamplesSection) {
  const auto prompt = RenderEvalPrompt(Record("SOS-HL-1K", {"high_risk"}), {}, eval,
                                       reg.Get("SOS-HL-1K"));
  const auto s = SplitPromptSections(prompt, eval);
  EXPECT_FALSE(s.examples.has_value());
  EXPECT_EQ(s.exemplar_blocks, 0u);
  EXPECT_NE(s.query.find("最近总是睡不着"), std::string::npos);
}

TEST_F(PromptTest, TwoShotHasTwoBlocks) {
  const auto prompt = RenderEvalPrompt(Record("SOS-HL-1K", {"high_risk"}),
                                       TrainShots("SOS-HL-1K", 2), eval, reg.Get("SOS-HL-1K"));
  const auto s = SplitPromptSections(prompt, eval);
  ASSERT_TRUE(s.examples.has_value());
  EXPECT_EQ(s.exemplar_blocks, 2u);
  EXPECT_NE(s.examples->find("【示例1】"), std::string::npos);
  EXPECT_NE(s.examples->find("【示例2】"), std::string::npos);
}

TEST_F(PromptTest, EvalPromptNeverShowsTargetGold) {
  const auto prompt = RenderEvalPrompt(Record("SocialCD-3K", {"CD07"}), {}, eval,
                                       reg.Get("SocialCD-3K"));
  const auto s = SplitPromptSections(prompt, eval);
  EXPECT_EQ(s.query.find("CD07"), std::string::npos);
}

TEST_F(PromptTest, DistillPromptShowsGoldInQuery) {
  const auto prompt = RenderDistillationPrompt(Record("CP", {"P2", "P2.3"}), exemplars, distill,
                                               reg.Get("CP"));
  const auto s = SplitPromptSections(prompt, distill);
  EXPECT_NE(s.query.find(reg.Get("CP").taxonomy.DisplayName("P2.3")), std::string::npos);
  ASSERT_TRUE(s.examples.has_value());
}

TEST_F(PromptTest, PerLabelCoverageDrawsFromEveryGoldLabel) {
  DistillOptions opt;
  opt.per_label = 1;
  const auto record = Record("SocialCD-3K", {"CD01", "CD05"});
  const auto prompt =
      RenderDistillationPrompt(record, exemplars, distill, reg.Get("SocialCD-3K"), opt);
  const auto s = SplitPromptSections(prompt, distill);
  EXPECT_EQ(s.exemplar_blocks, 2u);
  const auto& task = reg.Get("SocialCD-3K");
  EXPECT_NE(s.examples->find(task.taxonomy.DisplayName("CD01")), std::string::npos);
  EXPECT_NE(s.examples->find(task.taxonomy.DisplayName("CD05")), std::string::npos);
}

TEST_F(PromptTest, AllCoverageUsesWholePool) {
  DistillOptions opt;
  opt.coverage = CoverageMode::kAll;
  const auto prompt = RenderDistillationPrompt(Record("SOS-HL-1K", {"low_risk"}), exemplars,
                                               distill, reg.Get("SOS-HL-1K"), opt);
  EXPECT_EQ(SplitPromptSections(prompt, distill).exemplar_blocks,
            exemplars.ForTask("SOS-HL-1K").size());
}

TEST_F(PromptTest, MissingExemplarForGoldLabelIsPrecondition) {
  ExemplarSet sparse(std::vector<InstructionRecord>{exemplars.ForTask("SOS-HL-1K").front()});
  const auto code = sparse.records().front().decision.codes().front();
  const std::string other = code == "high_risk" ? "low_risk" : "high_risk";
  EXPECT_THROW(RenderDistillationPrompt(Record("SOS-HL-1K", {other}), sparse, distill,
                                        reg.Get("SOS-HL-1K")),
               PreconditionError);
}

TEST_F(PromptTest, LeakageIsRefused) {
  const auto& task = reg.Get("SOS-HL-1K");
  const auto target = Record("SOS-HL-1K", {"high_risk"});
  EXPECT_THROW(RenderEvalPrompt(target, {}, distill, task), LeakageError);

  auto self = target;
  self.split = Split::kTrain;
  EXPECT_THROW(RenderEvalPrompt(target, {self}, eval, task), LeakageError);

  auto test_shot = TrainShots("SOS-HL-1K", 1).front();
  test_shot.split = Split::kTest;
  EXPECT_THROW(RenderEvalPrompt(target, {test_shot}, eval, task), LeakageError);
}

TEST_F(PromptTest, RenderingIsDeterministic) {
  const auto r = Record("CP", {"P1", "P1.2"});
  EXPECT_EQ(RenderDistillationPrompt(r, exemplars, distill, reg.Get("CP")),
            RenderDistillationPrompt(r, exemplars, distill, reg.Get("CP")));
  EXPECT_EQ(SelectExemplars(reg.Get("CP"), exemplars, 5, 3),
            SelectExemplars(reg.Get("CP"), exemplars, 5, 3));
}

TEST_F(PromptTest, SelectionCoversLeavesWhenKAllows) {
  const auto& task = reg.Get(fixtures::kMulticlassTask);
  const auto shots = SelectExemplars(task, exemplars, task.taxonomy.Leaves().size(), 11);
  for (const auto& leaf : task.taxonomy.Leaves()) {
    EXPECT_TRUE(std::any_of(shots.begin(), shots.end(),
                            [&](const auto& s) { return s.decision.Contains(leaf); }))
        << leaf;
  }
  EXPECT_THROW(SelectExemplars(task, exemplars, 1000, 1), PreconditionError);
}

TEST(PromptTemplateParse, Errors) {
  EXPECT_THROW(PromptTemplate::Parse("@@instruction\nx\n@@query\n{{text}}\n"), FormatError);
  EXPECT_THROW(PromptTemplate::Parse("@id t\n@kind eval\n@@instruction\n{{nope}}\n@@query\n{{text}}\n"),
               FormatError);
  EXPECT_THROW(PromptTemplate::Parse("@id t\n@kind distill\n@@instruction\nx\n@@query\n{{text}}\n"),
               FormatError);
  EXPECT_THROW(PromptTemplate::Parse("@id t\n@kind eval\n@@instruction\nx\n@@instruction\ny\n@@query\nz\n"),
               FormatError);
  EXPECT_THROW(PromptTemplate::Load("/nonexistent/template.txt"), IoError);
}

}  // namespace
}  // namespace mindloom
