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
#include <stdexcept>
#include <string>
#include <vector>

namespace mindloom {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown task id or an inconsistent task/taxonomy definition.
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line and the offending field
/// when they are known (line 0 means "not line-oriented").
class FormatError : public Error {
 public:
  FormatError(std::string path, std::size_t line, std::string field,
              const std::string& message);

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::string path_;
  std::size_t line_;
  std::string field_;
};

/// Filesystem failure (unreadable or unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An evaluation prompt would expose held-out data.
class LeakageError : public Error {
 public:
  using Error::Error;
};

/// Illegal state transition (double revision, expired lease, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Ids that should line up between two inputs do not.
class IdMismatchError : public Error {
 public:
  IdMismatchError(const std::string& message, std::vector<std::string> ids);
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

}  // namespace mindloom
