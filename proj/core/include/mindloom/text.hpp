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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

/// UTF-8 text helpers shared by the parser and prompt renderer.
namespace mindloom::text {

/// A width-folded copy of some input plus, for every byte of the folded
/// string, the byte offset in the source it came from. `source_offset` has
/// one extra trailing entry equal to the source length.
struct Folded {
  std::string value;
  std::vector<std::size_t> source_offset;
};

/// Full-width ASCII forms (U+FF01..U+FF5E) become their ASCII counterparts,
/// the ideographic space becomes ' ' and ASCII letters are lowercased.
/// Everything else passes through unchanged.
Folded FoldWidth(std::string_view input);

/// FoldWidth with all whitespace removed. Used as the lookup key for label
/// surface forms, so "高 风 险" and "高风险" collide.
std::string FoldKey(std::string_view input);

std::string_view Trim(std::string_view s);

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> SplitLines(std::string_view s);

bool IsSpace(std::string_view s, std::size_t pos, std::size_t* width);

}  // namespace mindloom::text
