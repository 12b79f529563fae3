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

#include "mindloom/errors.hpp"

#include <utility>

namespace mindloom {
namespace {

std::string Describe(const std::string& path, std::size_t line,
                     const std::string& field, const std::string& message) {
  std::string out = path.empty() ? std::string("<input>") : path;
  if (line > 0) out += ":" + std::to_string(line);
  if (!field.empty()) out += ": field '" + field + "'";
  out += ": " + message;
  return out;
}

std::string JoinIds(const std::string& message,
                    const std::vector<std::string>& ids) {
  std::string out = message;
  if (!ids.empty()) {
    out += " [";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) out += ", ";
      out += ids[i];
    }
    out += "]";
  }
  return out;
}

}  // namespace

FormatError::FormatError(std::string path, std::size_t line, std::string field,
                         const std::string& message)
    : Error(Describe(path, line, field, message)),
      path_(std::move(path)),
      line_(line),
      field_(std::move(field)) {}

IdMismatchError::IdMismatchError(const std::string& message,
                                 std::vector<std::string> ids)
    : Error(JoinIds(message, ids)), ids_(std::move(ids)) {}

}  // namespace mindloom
