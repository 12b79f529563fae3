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

#include "mindloom/parser.hpp"

#include <algorithm>

#include "mindloom/errors.hpp"
#include "mindloom/text.hpp"

namespace mindloom {
namespace {

struct MarkerHit {
  std::size_t line_index = 0;
  // Raw byte offsets: the whole line and the content after the colon.
  std::size_t line_begin = 0;
  std::size_t line_end = 0;
  std::size_t content_begin = 0;
};

std::vector<std::string> FoldedSorted(const std::vector<std::string>& markers) {
  std::vector<std::string> out;
  for (const auto& m : markers) out.push_back(text::FoldWidth(m).value);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return out;
}

bool IsDecoration(char c) { return c == '*' || c == '#' || c == '-' || c == '>' || c == '_'; }

// Returns the folded offset just past the marker's colon, if the folded line
// starts with one of `markers`.
std::optional<std::size_t> MatchMarker(std::string_view folded,
                                       const std::vector<std::string>& markers,
                                       ParseMode mode) {
  std::size_t pos = 0;
  std::size_t width = 0;
  auto skip = [&](bool decorations) {
    while (pos < folded.size()) {
      if (text::IsSpace(folded, pos, &width)) {
        pos += width;
      } else if (decorations && IsDecoration(folded[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const bool lenient = mode == ParseMode::kLenient;
  skip(lenient);
  for (const auto& marker : markers) {
    if (folded.substr(pos, marker.size()) != marker) continue;
    std::size_t after = pos + marker.size();
    std::size_t saved = pos;
    pos = after;
    skip(lenient);
    if (pos < folded.size() && folded[pos] == ':') {
      ++pos;
      if (lenient) skip(true);
      return pos;
    }
    pos = saved;
  }
  return std::nullopt;
}

std::vector<MarkerHit> FindMarkers(std::string_view raw,
                                   const std::vector<std::string>& markers, ParseMode mode) {
  std::vector<MarkerHit> hits;
  std::size_t line_begin = 0;
  std::size_t index = 0;
  while (line_begin <= raw.size()) {
    std::size_t nl = raw.find('\n', line_begin);
    if (nl == std::string_view::npos) nl = raw.size();
    std::size_t line_end = nl;
    if (line_end > line_begin && raw[line_end - 1] == '\r') --line_end;
    const std::string_view line = raw.substr(line_begin, line_end - line_begin);
    const text::Folded folded = text::FoldWidth(line);
    if (auto at = MatchMarker(folded.value, markers, mode)) {
      hits.push_back({index, line_begin, line_end, line_begin + folded.source_offset[*at]});
    }
    if (nl == raw.size()) break;
    line_begin = nl + 1;
    ++index;
  }
  return hits;
}

std::string_view StripWrapping(std::string_view token) {
  static const std::vector<std::string_view> kWrappers = {
      "[", "]", "【", "】", "「", "」", "\"", "'", "`", "*", "(", ")", "。", ".", "“", "”"};
  bool changed = true;
  while (changed && !token.empty()) {
    changed = false;
    token = text::Trim(token);
    for (auto w : kWrappers) {
      if (token.size() >= w.size() && token.substr(0, w.size()) == w) {
        token.remove_prefix(w.size());
        changed = true;
      }
      if (token.size() >= w.size() && token.substr(token.size() - w.size()) == w) {
        token.remove_suffix(w.size());
        changed = true;
      }
    }
  }
  return token;
}

std::vector<std::string> SplitLabelLine(std::string_view content,
                                        const std::vector<std::string>& delimiters) {
  const std::string folded = text::FoldWidth(content).value;
  std::vector<std::string> folded_delims;
  for (const auto& d : delimiters) folded_delims.push_back(text::FoldWidth(d).value);

  std::vector<std::string> tokens;
  std::size_t start = 0;
  std::size_t pos = 0;
  while (pos <= folded.size()) {
    std::size_t hit_len = 0;
    if (pos < folded.size()) {
      for (const auto& d : folded_delims) {
        if (!d.empty() && folded.compare(pos, d.size(), d) == 0) {
          hit_len = d.size();
          break;
        }
      }
    }
    if (pos == folded.size() || hit_len > 0) {
      std::string_view token = StripWrapping(std::string_view(folded).substr(start, pos - start));
      if (!token.empty()) tokens.emplace_back(token);
      if (pos == folded.size()) break;
      pos += hit_len;
      start = pos;
    } else {
      ++pos;
    }
  }
  return tokens;
}

std::string JoinLines(std::string_view raw, std::size_t begin, std::size_t end) {
  return std::string(text::Trim(raw.substr(begin, end - begin)));
}

// Keyword scan used by lenient mode when no label marker is present.
LabelSet ScanKeywords(std::string_view raw, const SynonymTable& table) {
  const std::string folded = text::FoldWidth(raw).value;
  LabelSet found;
  std::size_t pos = 0;
  while (pos < folded.size()) {
    std::size_t advance = 1;
    for (const auto& [surface, code] : table.surfaces()) {
      if (!surface.empty() && folded.compare(pos, surface.size(), surface) == 0) {
        found.Insert(code);
        advance = surface.size();
        break;
      }
    }
    pos += advance;
  }
  return found;
}

}  // namespace

std::string_view ToString(ParseMode mode) {
  return mode == ParseMode::kStrict ? "strict" : "lenient";
}

std::string_view ToString(ParseStatus status) {
  switch (status) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kNoMarker: return "no_marker";
    case ParseStatus::kUnknownLabel: return "unknown_label";
    case ParseStatus::kEmptyDecision: return "empty_decision";
  }
  return "?";
}

ParseMode ParseParseMode(std::string_view text) {
  if (text == "strict") return ParseMode::kStrict;
  if (text == "lenient") return ParseMode::kLenient;
  throw PreconditionError("parser mode must be strict or lenient, got '" +
                          std::string(text) + "'");
}

ParserConfig ParserConfig::For(const TaskRegistry& registry, ParseMode mode) {
  ParserConfig config;
  config.markers = registry.markers();
  config.mode = mode;
  return config;
}

SynonymTable::SynonymTable(const TaskSpec& task, const ParserConfig& config) {
  auto add = [&](const std::string& surface, const std::string& code) {
    const std::string key = text::FoldKey(surface);
    if (key.empty()) return;
    auto [it, inserted] = by_key_.emplace(key, code);
    if (!inserted && it->second != code) {
      throw RegistryError("task '" + task.task_id + "': surface form '" + surface +
                          "' maps to both '" + it->second + "' and '" + code + "'");
    }
    if (inserted) surfaces_.emplace_back(text::FoldWidth(surface).value, code);
  };
  for (const auto& label : task.taxonomy.labels()) {
    add(label.code, label.code);
    add(label.name, label.code);
    for (const auto& s : label.synonyms) add(s, label.code);
  }
  if (auto it = config.extra_synonyms.find(task.task_id); it != config.extra_synonyms.end()) {
    for (const auto& [surface, code] : it->second) {
      if (!task.taxonomy.Contains(code)) {
        throw RegistryError("synonym '" + surface + "' targets unknown code '" + code + "'");
      }
      add(surface, code);
    }
  }
  std::stable_sort(surfaces_.begin(), surfaces_.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });
}

std::optional<std::string> SynonymTable::Lookup(std::string_view surface) const {
  auto it = by_key_.find(text::FoldKey(surface));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

NormalizedLabels NormalizeLabels(const std::vector<std::string>& surfaces,
                                 const SynonymTable& table) {
  NormalizedLabels out;
  for (const auto& s : surfaces) {
    if (auto code = table.Lookup(s)) {
      out.codes.Insert(*code);
    } else {
      out.unknown.push_back(s);
    }
  }
  return out;
}

NormalizedLabels NormalizeLabels(const std::vector<std::string>& surfaces,
                                 const TaskSpec& task, const ParserConfig& config) {
  return NormalizeLabels(surfaces, SynonymTable(task, config));
}

LabelSet HierarchyClosure(const LabelSet& decision, const LabelTaxonomy& taxonomy) {
  std::vector<std::size_t> missing;
  for (const auto& code : decision) {
    if (!taxonomy.Contains(code)) {
      throw RegistryError("closure over unknown code '" + code + "'");
    }
    auto parent = taxonomy.ParentOf(code);
    while (parent) {
      if (!decision.Contains(*parent)) missing.push_back(taxonomy.OrderOf(*parent));
      parent = taxonomy.ParentOf(*parent);
    }
  }
  std::sort(missing.begin(), missing.end());
  LabelSet closed = decision;
  for (std::size_t idx : missing) closed.Insert(taxonomy.labels()[idx].code);
  return closed;
}

bool IsClosed(const LabelSet& decision, const LabelTaxonomy& taxonomy) {
  for (const auto& code : decision) {
    auto parent = taxonomy.ParentOf(code);
    if (parent && !decision.Contains(*parent)) return false;
  }
  return true;
}

namespace {

ParsedOutput ParseWithTable(std::string_view raw, const TaskSpec& task,
                            const ParserConfig& config, const SynonymTable& table) {
  ParsedOutput out;
  const auto label_markers = FoldedSorted(config.markers.label);
  const auto expl_markers = FoldedSorted(config.markers.explanation);
  const bool lenient = config.mode == ParseMode::kLenient;

  const auto label_hits = FindMarkers(raw, label_markers, config.mode);
  if (label_hits.empty()) {
    if (!lenient) return out;
    LabelSet found = ScanKeywords(raw, table);
    if (found.empty() || (task.SingleLabel() && found.size() > 1)) return out;
    out.decision = std::move(found);
    out.explanation = std::string(text::Trim(raw));
    out.explanation_span = Span{0, raw.size()};
  } else {
    const MarkerHit& label = label_hits.front();
    out.label_span = Span{label.line_begin, label.line_end};
    const auto tokens = SplitLabelLine(
        raw.substr(label.content_begin, label.line_end - label.content_begin), config.delimiters);

    NormalizedLabels norm = NormalizeLabels(tokens, table);
    if (lenient) {
      // Off-template answers sometimes separate labels with spaces only.
      std::vector<std::string> still_unknown;
      for (const auto& token : norm.unknown) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= token.size(); ++i) {
          if (i == token.size() || token[i] == ' ') {
            if (i > start) parts.push_back(token.substr(start, i - start));
            start = i + 1;
          }
        }
        NormalizedLabels split = NormalizeLabels(parts, table);
        if (parts.size() > 1 && split.unknown.empty()) {
          for (const auto& c : split.codes) norm.codes.Insert(c);
        } else {
          still_unknown.push_back(token);
        }
      }
      norm.unknown = std::move(still_unknown);
    }
    out.decision = std::move(norm.codes);
    out.unknown = std::move(norm.unknown);

    const auto expl_hits = FindMarkers(raw, expl_markers, config.mode);
    const MarkerHit* expl = nullptr;
    for (const auto& hit : expl_hits) {
      if (hit.line_index != label.line_index) {
        expl = &hit;
        break;
      }
    }
    if (expl) {
      const std::size_t end = expl->line_index > label.line_index ? raw.size() : label.line_begin;
      out.explanation = JoinLines(raw, expl->content_begin, end);
      out.explanation_span = Span{expl->line_begin, end};
    } else if (lenient) {
      std::size_t begin = std::min(raw.size(), label.line_end + 1);
      out.explanation = JoinLines(raw, begin, raw.size());
      out.explanation_span = Span{begin, raw.size()};
    }
    if (!out.unknown.empty()) {
      out.status = ParseStatus::kUnknownLabel;
      return out;
    }
    if (out.decision.empty()) {
      out.status = ParseStatus::kEmptyDecision;
      return out;
    }
  }
  if (config.closure && task.kind == TaskKind::kHierarchical) {
    out.decision = HierarchyClosure(out.decision, task.taxonomy);
  }
  out.status = ParseStatus::kOk;
  return out;
}

}  // namespace

ParsedOutput ParseGeneration(std::string_view raw, const TaskSpec& task,
                             const ParserConfig& config) {
  return ParseWithTable(raw, task, config, SynonymTable(task, config));
}

LabelParser::LabelParser(const TaskRegistry& registry, ParserConfig config)
    : registry_(registry), config_(std::move(config)) {
  for (const auto& id : registry_.TaskIds()) {
    tables_.emplace(id, SynonymTable(registry_.Get(id), config_));
  }
}

ParsedOutput LabelParser::Parse(std::string_view raw, std::string_view task_id) const {
  auto it = tables_.find(task_id);
  if (it == tables_.end()) {
    throw RegistryError("unknown task id '" + std::string(task_id) + "'");
  }
  return ParseWithTable(raw, registry_.Get(task_id), config_, it->second);
}

std::string RenderLabelList(const LabelSet& decision, const TaskSpec& task,
                            const CanonicalStyle& style) {
  std::string out;
  bool first = true;
  for (const auto& code : decision) {
    if (!first) out += style.delimiter;
    first = false;
    out += style.display_names ? task.taxonomy.DisplayName(code) : code;
  }
  return out;
}

std::string RenderCanonical(const LabelSet& decision, std::string_view explanation,
                            const TaskSpec& task, const CanonicalStyle& style) {
  std::string out = style.label_marker + style.separator + RenderLabelList(decision, task, style);
  out += "\n";
  out += style.explanation_marker + style.separator;
  out += explanation;
  return out;
}

}  // namespace mindloom
