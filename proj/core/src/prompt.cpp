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

#include "mindloom/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mindloom/errors.hpp"
#include "mindloom/hashing.hpp"
#include "mindloom/parser.hpp"

namespace mindloom {
namespace {

constexpr std::string_view kBuiltinDistill = R"(@id builtin-distill-zh
@kind distill
@header instruction 【任务说明】
@header examples 【专家示例】
@header query 【目标帖子】
@header exemplar 【示例{{index}}】
@@instruction
你是一名心理学领域的专家。任务：{{description}}
候选标签：{{label_names}}
下面是专家撰写的示例，请学习专家的分析思路。随后针对目标帖子，在已知正确标签的前提下，先复述标签，再给出支持该标签的解释。
回答格式：
{{label_marker}}: <标签>
{{explanation_marker}}: <解释>
@@exemplar
帖子：{{text}}
{{label_marker}}: {{labels}}
{{explanation_marker}}: {{explanation}}
@@query
帖子：{{text}}
{{label_marker}}: {{gold_labels}}
请先复述上述标签，然后解释作出该判断的依据。
)";

constexpr std::string_view kBuiltinEval = R"(@id builtin-eval-zh
@kind eval
@header instruction 【任务说明】
@header examples 【示例】
@header query 【目标帖子】
@header exemplar 【示例{{index}}】
@@instruction
你是一名心理学领域的专家。任务：{{description}}
候选标签：{{label_names}}
请判断目标帖子的标签，并解释判断依据。
回答格式：
{{label_marker}}: <标签>
{{explanation_marker}}: <解释>
@@exemplar
帖子：{{text}}
{{label_marker}}: {{labels}}
{{explanation_marker}}: {{explanation}}
@@query
帖子：{{text}}
问题：{{query}}
)";

const std::set<std::string> kCommonSlots = {"task_id",     "description",  "query",
                                            "label_names", "label_marker", "explanation_marker"};
const std::set<std::string> kExemplarSlots = {"index", "text", "labels", "explanation"};
const std::set<std::string> kQuerySlots = {"text", "gold_labels"};

std::vector<std::string> Placeholders(std::string_view body) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = body.find("{{", pos)) != std::string_view::npos) {
    const std::size_t close = body.find("}}", pos + 2);
    if (close == std::string_view::npos) break;
    out.emplace_back(body.substr(pos + 2, close - pos - 2));
    pos = close + 2;
  }
  return out;
}

void CheckSlots(std::string_view body, const std::set<std::string>& extra,
                const std::string& origin, const std::string& section) {
  for (const auto& name : Placeholders(body)) {
    if (!kCommonSlots.count(name) && !extra.count(name)) {
      throw FormatError(origin, 0, section, "unknown placeholder {{" + name + "}}");
    }
  }
}

// Single pass: substituted values are never rescanned.
std::string Fill(std::string_view body, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = body.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = body.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(body.substr(pos, open - pos));
    const std::string name(body.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it == values.end()) throw PreconditionError("no value for placeholder {{" + name + "}}");
    out += it->second;
    pos = close + 2;
  }
  out.append(body.substr(pos));
  return out;
}

std::string LabelNames(const TaskSpec& task) {
  std::string out;
  for (const auto& label : task.taxonomy.labels()) {
    if (!out.empty()) out += "、";
    out += label.name;
  }
  return out;
}

std::map<std::string, std::string> CommonValues(const InstructionRecord& record,
                                                const TaskSpec& task) {
  const CanonicalStyle style;
  return {{"task_id", task.task_id},
          {"description", record.description.empty() ? task.description : record.description},
          {"query", record.query.empty() ? task.query : record.query},
          {"label_names", LabelNames(task)},
          {"label_marker", style.label_marker},
          {"explanation_marker", style.explanation_marker}};
}

std::string Assemble(const PromptTemplate& tmpl, const InstructionRecord& record,
                     const TaskSpec& task, const std::vector<InstructionRecord>& shots,
                     bool with_gold) {
  auto values = CommonValues(record, task);
  std::string out = tmpl.instruction_header() + "\n" + Fill(tmpl.instruction_body(), values);
  if (!shots.empty()) {
    out += "\n\n" + tmpl.examples_header();
    for (std::size_t i = 0; i < shots.size(); ++i) {
      auto v = values;
      v["index"] = std::to_string(i + 1);
      v["text"] = shots[i].text;
      v["labels"] = RenderLabelList(shots[i].decision, task);
      v["explanation"] = shots[i].explanation;
      out += "\n" + Fill(tmpl.exemplar_header(), v) + "\n" + Fill(tmpl.exemplar_body(), v);
      if (i + 1 < shots.size()) out += "\n";
    }
  }
  values["text"] = record.text;
  if (with_gold) values["gold_labels"] = RenderLabelList(record.decision, task);
  out += "\n\n" + tmpl.query_header() + "\n" + Fill(tmpl.query_body(), values);
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::Parse(std::string_view source, const std::string& origin) {
  PromptTemplate t;
  std::string* current = nullptr;
  bool seen[3] = {false, false, false};
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    std::size_t nl = source.find('\n', pos);
    if (nl == std::string_view::npos) nl = source.size();
    std::string_view line = source.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    const bool last = nl == source.size();
    pos = nl + 1;

    if (line.substr(0, 2) == "@@") {
      const std::string_view name = line.substr(2);
      int idx = name == "instruction" ? 0 : name == "exemplar" ? 1 : name == "query" ? 2 : -1;
      if (idx < 0) throw FormatError(origin, line_no, std::string(name), "unknown section");
      if (seen[idx]) throw FormatError(origin, line_no, std::string(name), "duplicate section");
      seen[idx] = true;
      current = idx == 0 ? &t.instruction_ : idx == 1 ? &t.exemplar_ : &t.query_;
    } else if (!current && !line.empty() && line.front() == '@') {
      const std::size_t space = line.find(' ');
      const std::string_view key = line.substr(1, space == std::string_view::npos ? line.size() - 1
                                                                                  : space - 1);
      std::string_view value =
          space == std::string_view::npos ? std::string_view{} : line.substr(space + 1);
      if (key == "id") {
        t.id_ = std::string(value);
      } else if (key == "kind") {
        if (value == "distill") {
          t.kind_ = TemplateKind::kDistill;
        } else if (value == "eval") {
          t.kind_ = TemplateKind::kEval;
        } else {
          throw FormatError(origin, line_no, "kind", "must be distill or eval");
        }
      } else if (key == "header") {
        const std::size_t sp = value.find(' ');
        if (sp == std::string_view::npos) {
          throw FormatError(origin, line_no, "header", "expected '@header <section> <text>'");
        }
        const std::string_view which = value.substr(0, sp);
        std::string text(value.substr(sp + 1));
        if (which == "instruction") {
          t.instruction_header_ = text;
        } else if (which == "examples") {
          t.examples_header_ = text;
        } else if (which == "query") {
          t.query_header_ = text;
        } else if (which == "exemplar") {
          t.exemplar_header_ = text;
        } else {
          throw FormatError(origin, line_no, "header", "unknown section '" + std::string(which) + "'");
        }
      } else {
        throw FormatError(origin, line_no, std::string(key), "unknown directive");
      }
    } else if (current) {
      if (!(last && line.empty())) {
        if (!current->empty() || !line.empty()) {
          if (!current->empty()) *current += "\n";
          *current += line;
        }
      }
    } else if (!line.empty()) {
      throw FormatError(origin, line_no, "", "text outside of a section");
    }
    if (last) break;
  }
  // Drop trailing blank lines inside each section.
  for (std::string* body : {&t.instruction_, &t.exemplar_, &t.query_}) {
    while (!body->empty() && body->back() == '\n') body->pop_back();
  }
  if (t.id_.empty()) throw FormatError(origin, 0, "id", "template needs an @id");
  if (!seen[0] || !seen[2]) {
    throw FormatError(origin, 0, "", "template needs @@instruction and @@query sections");
  }
  const std::set<std::string> none;
  CheckSlots(t.instruction_, none, origin, "instruction");
  CheckSlots(t.exemplar_, kExemplarSlots, origin, "exemplar");
  CheckSlots(t.exemplar_header_, kExemplarSlots, origin, "exemplar header");
  CheckSlots(t.query_, kQuerySlots, origin, "query");
  if (t.exemplar_header_.find("{{index}}") == std::string::npos) {
    throw FormatError(origin, 0, "exemplar header", "must contain {{index}}");
  }
  if (t.kind_ == TemplateKind::kDistill && !t.QueryUsesGold()) {
    throw FormatError(origin, 0, "query", "distillation templates must show {{gold_labels}}");
  }
  return t;
}

PromptTemplate PromptTemplate::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read template " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str(), path.string());
}

PromptTemplate PromptTemplate::BuiltinDistill() { return Parse(kBuiltinDistill, "builtin"); }
PromptTemplate PromptTemplate::BuiltinEval() { return Parse(kBuiltinEval, "builtin"); }

bool PromptTemplate::QueryUsesGold() const {
  return query_.find("{{gold_labels}}") != std::string::npos;
}

ExemplarSet::ExemplarSet(std::vector<InstructionRecord> records) : records_(std::move(records)) {
  std::sort(records_.begin(), records_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
}

ExemplarSet ExemplarSet::Load(const std::filesystem::path& path) {
  return ExemplarSet(LoadCorpus(path).records);
}

std::vector<InstructionRecord> ExemplarSet::ForTask(std::string_view task_id) const {
  std::vector<InstructionRecord> out;
  for (const auto& r : records_) {
    if (r.task_id == task_id) out.push_back(r);
  }
  return out;
}

std::string RenderDistillationPrompt(const InstructionRecord& record, const ExemplarSet& exemplars,
                                     const PromptTemplate& tmpl, const TaskSpec& task,
                                     const DistillOptions& options) {
  if (record.decision.empty()) {
    throw PreconditionError("record '" + record.id + "' has no gold decision");
  }
  if (!tmpl.QueryUsesGold()) {
    throw PreconditionError("template '" + tmpl.id() + "' does not show gold labels");
  }
  const auto pool = exemplars.ForTask(task.task_id);
  std::vector<InstructionRecord> chosen;
  if (options.coverage == CoverageMode::kAll) {
    chosen = pool;
  } else {
    std::set<std::string> taken;
    for (const auto& code : record.decision) {
      std::size_t found = 0;
      for (const auto& ex : pool) {
        if (found >= options.per_label) break;
        if (!ex.decision.Contains(code)) continue;
        ++found;
        if (taken.insert(ex.id).second) chosen.push_back(ex);
      }
      if (found == 0) {
        throw PreconditionError("no expert exemplar for label '" + code + "' of task '" +
                                task.task_id + "'");
      }
    }
  }
  return Assemble(tmpl, record, task, chosen, true);
}

std::string RenderEvalPrompt(const InstructionRecord& record,
                             const std::vector<InstructionRecord>& shots,
                             const PromptTemplate& tmpl, const TaskSpec& task) {
  if (tmpl.QueryUsesGold()) {
    throw LeakageError("template '" + tmpl.id() + "' exposes gold labels in the query section");
  }
  for (const auto& shot : shots) {
    if (shot.id == record.id) {
      throw LeakageError("exemplar '" + shot.id + "' is the evaluation target itself");
    }
    if (shot.split != Split::kTrain) {
      throw LeakageError("exemplar '" + shot.id + "' comes from the " +
                         std::string(ToString(shot.split)) + " split");
    }
  }
  return Assemble(tmpl, record, task, shots, false);
}

std::vector<InstructionRecord> SelectExemplars(const TaskSpec& task, const ExemplarSet& pool,
                                               std::size_t k, std::uint64_t seed) {
  auto candidates = pool.ForTask(task.task_id);
  if (candidates.empty()) {
    throw PreconditionError("no exemplars for task '" + task.task_id + "'");
  }
  if (k > candidates.size()) {
    throw PreconditionError("requested " + std::to_string(k) + " exemplars but the pool has " +
                            std::to_string(candidates.size()));
  }
  std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ranked.emplace_back(SeededHash(seed, candidates[i].id), i);
  }
  std::sort(ranked.begin(), ranked.end());

  std::vector<bool> used(candidates.size(), false);
  std::vector<InstructionRecord> out;
  const auto leaves = task.taxonomy.Leaves();
  if (k >= leaves.size()) {
    for (const auto& code : leaves) {
      for (const auto& [hash, idx] : ranked) {
        if (!used[idx] && candidates[idx].decision.Contains(code)) {
          used[idx] = true;
          out.push_back(candidates[idx]);
          break;
        }
      }
    }
  }
  for (const auto& [hash, idx] : ranked) {
    if (out.size() >= k) break;
    if (!used[idx]) {
      used[idx] = true;
      out.push_back(candidates[idx]);
    }
  }
  return out;
}

PromptSections SplitPromptSections(std::string_view prompt, const PromptTemplate& tmpl) {
  PromptSections s;
  const auto& ih = tmpl.instruction_header();
  if (prompt.substr(0, ih.size()) != ih) {
    throw FormatError("", 0, "instruction", "prompt does not start with the instruction header");
  }
  const std::size_t query_at = prompt.rfind("\n\n" + tmpl.query_header() + "\n");
  if (query_at == std::string_view::npos) throw FormatError("", 0, "query", "query header missing");
  const std::string examples_marker = "\n\n" + tmpl.examples_header() + "\n";
  const std::size_t examples_at = prompt.substr(0, query_at).find(examples_marker);

  const std::size_t instr_begin = ih.size() + 1;
  const std::size_t instr_end = examples_at == std::string_view::npos ? query_at : examples_at;
  s.instruction = std::string(prompt.substr(instr_begin, instr_end - instr_begin));
  if (examples_at != std::string_view::npos) {
    const std::size_t begin = examples_at + examples_marker.size();
    s.examples = std::string(prompt.substr(begin, query_at - begin));
    const std::string& eh = tmpl.exemplar_header();
    const std::string prefix = eh.substr(0, eh.find("{{index}}"));
    // Each exemplar block starts on its own line with the header prefix.
    std::string_view ex = *s.examples;
    std::size_t pos = 0;
    while (pos <= ex.size()) {
      std::size_t nl = ex.find('\n', pos);
      if (nl == std::string_view::npos) nl = ex.size();
      if (ex.substr(pos, prefix.size()) == prefix) ++s.exemplar_blocks;
      if (nl == ex.size()) break;
      pos = nl + 1;
    }
  }
  const std::size_t query_begin = query_at + 2 + tmpl.query_header().size() + 1;
  s.query = std::string(prompt.substr(query_begin));
  return s;
}

}  // namespace mindloom
