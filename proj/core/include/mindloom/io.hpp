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

#include <filesystem>
#include <string>
#include <string_view>

namespace mindloom {

std::string ReadTextFile(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void WriteTextFile(const std::filesystem::path& path, std::string_view bytes);

/// Appends and flushes. `line` must not contain '\n'; one is added.
void AppendLine(const std::filesystem::path& path, std::string_view line);

}  // namespace mindloom
