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
#include <memory>
#include <string>

#include "mindloom/human_eval.hpp"

namespace mindloom {

struct ReviewServerOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 0;
  /// Static files (the review UI build) mounted at "/" when set.
  std::filesystem::path ui_dir;
};

/// HTTP+JSON front end over a ReviewStore. The socket is bound in the
/// constructor, so a busy port fails there with IoError.
///
///   POST /api/claim-next         {"reviewer"}
///   POST /api/submit-score       {"reviewer","item_id","consistency","reliability",
///                                 "professionality","verdict","correction"?}
///   POST /api/submit-correction  {"reviewer","item_id","decision","explanation"}
///   GET  /api/progress
///   GET  /api/aggregate
///   GET  /api/taxonomy
///   GET  /healthz
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, const TaskRegistry& registry, ReviewServerOptions options = {});
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  int port() const { return port_; }
  std::string base_url() const;
  /// Serves on a background thread.
  void Start();
  /// Serves on the calling thread until Stop().
  void Run();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::string host_;
};

}  // namespace mindloom
