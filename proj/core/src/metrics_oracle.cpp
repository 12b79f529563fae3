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

#include <set>
#include <string>

#include "mindloom/errors.hpp"
#include "mindloom/metrics.hpp"

namespace mindloom {

Prf BruteForceOracle(std::span<const LabelSet> gold, std::span<const LabelSet> pred,
                     const Averaging& averaging) {
  if (gold.size() != pred.size()) throw PreconditionError("gold/pred length mismatch");

  std::set<std::string> universe;
  if (averaging.mode == AverageMode::kBinaryPositive) {
    universe.insert(averaging.positive);
  } else {
    for (const auto& s : gold) universe.insert(s.codes().begin(), s.codes().end());
    for (const auto& s : pred) universe.insert(s.codes().begin(), s.codes().end());
  }

  auto member = [](const LabelSet& set, const std::string& code) {
    for (const auto& c : set.codes()) {
      if (c == code) return true;
    }
    return false;
  };

  long double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (const auto& label : universe) {
      const bool in_gold = member(gold[i], label);
      const bool in_pred = member(pred[i], label);
      if (in_gold && in_pred) {
        tp += 1;
      } else if (in_pred) {
        fp += 1;
      } else if (in_gold) {
        fn += 1;
      }
    }
  }
  Prf out;
  out.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp / (tp + fp));
  out.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp / (tp + fn));
  const long double denom = 2 * tp + fp + fn;
  out.f1 = (denom == 0 || tp == 0) ? 0.0 : static_cast<double>(2 * tp / denom);
  return out;
}

}  // namespace mindloom
