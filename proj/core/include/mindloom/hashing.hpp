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

#include <cstdint>
#include <string>
#include <string_view>

namespace mindloom {

/// Lowercase hex SHA-256 of `data`.
std::string Sha256Hex(std::string_view data);

/// Stable 64-bit hash of (seed, key), taken from the first eight bytes of
/// SHA-256. Identical on every platform, unlike std::hash.
std::uint64_t SeededHash(std::uint64_t seed, std::string_view key);

}  // namespace mindloom
