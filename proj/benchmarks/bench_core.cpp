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

#include <random>

#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "mindloom/corpus.hpp"
#include "mindloom/metrics.hpp"
#include "mindloom/parser.hpp"

namespace mindloom {
namespace {

void BM_MicroCounts(benchmark::State& state) {
  const TaskRegistry reg = fixtures::FourKindRegistry();
  const TaskSpec& task = reg.Get("SocialCD-3K");
  std::mt19937_64 rng(1);
  std::vector<LabelSet> gold, pred;
  for (int64_t i = 0; i < state.range(0); ++i) {
    gold.push_back(fixtures::RandomDecision(task, rng));
    pred.push_back(fixtures::RandomDecision(task, rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputePrf(CountConfusion(gold, pred, Averaging::Micro())));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MicroCounts)->Arg(1000)->Arg(10000);

void BM_Hierarchical(benchmark::State& state) {
  const TaskRegistry reg = fixtures::FourKindRegistry();
  const TaskSpec& task = reg.Get("CP");
  std::mt19937_64 rng(2);
  std::vector<LabelSet> gold, pred;
  for (int64_t i = 0; i < state.range(0); ++i) {
    gold.push_back(fixtures::RandomDecision(task, rng));
    pred.push_back(fixtures::RandomDecision(task, rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputeHierarchicalMetrics(gold, pred, task.taxonomy));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Hierarchical)->Arg(1000);

void BM_ParseGeneration(benchmark::State& state) {
  const TaskRegistry reg = fixtures::FourKindRegistry();
  const LabelParser parser(reg, ParserConfig::For(reg, state.range(0) ? ParseMode::kLenient
                                                                       : ParseMode::kStrict));
  const std::string raw = "好的，以下是我的判断。\n标签： CD03、CD07，CD11\n解释：作者反复使用绝对化的表述，"
                          "并将偶然事件推广为普遍规律。";
  for (auto _ : state) benchmark::DoNotOptimize(parser.Parse(raw, "SocialCD-3K"));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ParseGeneration)->Arg(0)->Arg(1);

void BM_SplitCorpus(benchmark::State& state) {
  const Corpus corpus = fixtures::MakeFullScaleCorpus(3);
  for (auto _ : state) benchmark::DoNotOptimize(SplitCorpus(corpus, {0.6, 0.2, 0.2}, 42));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(corpus.records.size()));
}
BENCHMARK(BM_SplitCorpus)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace mindloom

BENCHMARK_MAIN();
