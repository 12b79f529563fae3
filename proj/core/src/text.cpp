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

#include "mindloom/text.hpp"

namespace mindloom::text {
namespace {

// Length of the UTF-8 sequence introduced by `lead`, 1 for stray bytes.
std::size_t SequenceLength(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

}  // namespace

bool IsSpace(std::string_view s, std::size_t pos, std::size_t* width) {
  const auto c = static_cast<unsigned char>(s[pos]);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
      c == '\v') {
    *width = 1;
    return true;
  }
  // U+00A0 no-break space.
  if (c == 0xC2 && pos + 1 < s.size() &&
      static_cast<unsigned char>(s[pos + 1]) == 0xA0) {
    *width = 2;
    return true;
  }
  // U+3000 ideographic space.
  if (c == 0xE3 && pos + 2 < s.size() &&
      static_cast<unsigned char>(s[pos + 1]) == 0x80 &&
      static_cast<unsigned char>(s[pos + 2]) == 0x80) {
    *width = 3;
    return true;
  }
  return false;
}

Folded FoldWidth(std::string_view input) {
  Folded out;
  out.value.reserve(input.size());
  out.source_offset.reserve(input.size() + 1);
  std::size_t i = 0;
  while (i < input.size()) {
    const auto lead = static_cast<unsigned char>(input[i]);
    std::size_t len = SequenceLength(lead);
    if (i + len > input.size()) len = 1;

    if (len == 3 && lead == 0xEF) {
      const auto b1 = static_cast<unsigned char>(input[i + 1]);
      const auto b2 = static_cast<unsigned char>(input[i + 2]);
      unsigned cp = ((lead & 0x0Fu) << 12) | ((b1 & 0x3Fu) << 6) | (b2 & 0x3Fu);
      if (cp >= 0xFF01 && cp <= 0xFF5E) {
        char ascii = static_cast<char>(cp - 0xFF01 + 0x21);
        if (ascii >= 'A' && ascii <= 'Z') ascii = static_cast<char>(ascii - 'A' + 'a');
        out.value.push_back(ascii);
        out.source_offset.push_back(i);
        i += 3;
        continue;
      }
    }
    if (len == 3 && lead == 0xE3 &&
        static_cast<unsigned char>(input[i + 1]) == 0x80 &&
        static_cast<unsigned char>(input[i + 2]) == 0x80) {
      out.value.push_back(' ');
      out.source_offset.push_back(i);
      i += 3;
      continue;
    }
    if (len == 1 && lead >= 'A' && lead <= 'Z') {
      out.value.push_back(static_cast<char>(lead - 'A' + 'a'));
      out.source_offset.push_back(i);
      ++i;
      continue;
    }
    for (std::size_t k = 0; k < len; ++k) {
      out.value.push_back(input[i + k]);
      out.source_offset.push_back(i + k);
    }
    i += len;
  }
  out.source_offset.push_back(input.size());
  return out;
}

std::string FoldKey(std::string_view input) {
  const std::string folded = FoldWidth(input).value;
  std::string key;
  key.reserve(folded.size());
  std::size_t i = 0;
  while (i < folded.size()) {
    std::size_t width = 0;
    if (IsSpace(folded, i, &width)) {
      i += width;
      continue;
    }
    key.push_back(folded[i]);
    ++i;
  }
  return key;
}

std::string_view Trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t width = 0;
  while (begin < s.size() && IsSpace(s, begin, &width)) begin += width;
  std::size_t end = s.size();
  while (end > begin) {
    // Walk back to the start of the last code point.
    std::size_t start = end - 1;
    while (start > begin &&
           (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) {
      --start;
    }
    if (IsSpace(s, start, &width) && start + width == end) {
      end = start;
    } else {
      break;
    }
  }
  return s.substr(begin, end - begin);
}

std::vector<std::string_view> SplitLines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    std::string_view line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == s.size()) break;
    start = nl + 1;
  }
  return lines;
}

}  // namespace mindloom::text
