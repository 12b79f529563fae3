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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "mindloom/errors.hpp"
#include "mindloom/review_server.hpp"

namespace mindloom {
namespace {

using json = nlohmann::json;

class ReviewApiTest : public ::testing::Test {
 protected:
  TaskRegistry reg = TaskRegistry::Defaults();
  std::unique_ptr<ReviewStore> store;
  std::unique_ptr<ReviewServer> server;
  std::unique_ptr<httplib::Client> http;

  void SetUp() override {
    Corpus c;
    c.records = fixtures::MakeRecords(reg.Get("SOS-HL-1K"), 10, 4);
    SampleOptions opt;
    opt.n = 10;
    store = std::make_unique<ReviewStore>(SampleForReview(c, {}, reg, ParseMode::kStrict, opt), reg);
    server = std::make_unique<ReviewServer>(*store, reg);
    server->Start();
    http = std::make_unique<httplib::Client>("127.0.0.1", server->port());
  }
  void TearDown() override { server->Stop(); }

  std::pair<int, json> Post(const std::string& path, const json& body) {
    auto res = http->Post(path, body.dump(), "application/json");
    if (!res) return {0, json()};
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> Get(const std::string& path) {
    auto res = http->Get(path);
    if (!res) return {0, json()};
    return {res->status, json::parse(res->body)};
  }
  json Score(const std::string& id, const std::string& reviewer, int c, int r, int p) {
    return {{"reviewer", reviewer}, {"item_id", id}, {"consistency", c}, {"reliability", r},
            {"professionality", p}, {"verdict", "agree"}};
  }
};

TEST_F(ReviewApiTest, HealthAndTaxonomy) {
  EXPECT_EQ(Get("/healthz").first, 200);
  const auto [status, body] = Get("/api/taxonomy");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body["tasks"].size(), 3u);
}

TEST_F(ReviewApiTest, ClaimsAreExclusive) {
  const auto [s1, a] = Post("/api/claim-next", {{"reviewer", "alice"}});
  const auto [s2, b] = Post("/api/claim-next", {{"reviewer", "bob"}});
  ASSERT_EQ(s1, 200);
  ASSERT_EQ(s2, 200);
  EXPECT_NE(a["item"]["id"], b["item"]["id"]);
  EXPECT_TRUE(a["lease_expires_at"].is_string());
  EXPECT_EQ(a["item"]["gold"][0]["name"].get<std::string>().empty(), false);
  EXPECT_EQ(a["item"]["taxonomy"]["task_id"], "SOS-HL-1K");
}

TEST_F(ReviewApiTest, ScoreEchoesDerivedOverallAndProgress) {
  for (int i = 0; i < 3; ++i) {
    const auto [_, claim] = Post("/api/claim-next", {{"reviewer", "alice"}});
    const auto [status, body] = Post("/api/submit-score", Score(claim["item"]["id"], "alice", 3, 2, 2));
    ASSERT_EQ(status, 200) << body.dump();
    EXPECT_NEAR(body["score"]["overall"].get<double>(), 7.0 / 3.0, 1e-12);
  }
  const auto [status, progress] = Get("/api/progress");
  EXPECT_EQ(status, 200);
  EXPECT_DOUBLE_EQ(progress["percent"].get<double>(), 30.0);
  EXPECT_EQ(progress["complete"], 3);
}

TEST_F(ReviewApiTest, ValidationErrors) {
  const auto [_, claim] = Post("/api/claim-next", {{"reviewer", "alice"}});
  const std::string id = claim["item"]["id"];

  auto bad = Score(id, "alice", 4, 2, 2);
  auto [s1, b1] = Post("/api/submit-score", bad);
  EXPECT_EQ(s1, 422);
  EXPECT_TRUE(b1["fields"].contains("consistency"));

  auto with_overall = Score(id, "alice", 3, 2, 2);
  with_overall["overall"] = 3;
  EXPECT_EQ(Post("/api/submit-score", with_overall).first, 422);

  auto disagree = Score(id, "alice", 1, 1, 1);
  disagree["verdict"] = "disagree";
  auto [s3, b3] = Post("/api/submit-score", disagree);
  EXPECT_EQ(s3, 422);
  EXPECT_TRUE(b3["fields"].contains("correction"));

  auto res = http->Post("/api/submit-score", "[1,2]", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  EXPECT_EQ(Post("/api/submit-score", Score("missing", "alice", 3, 3, 3)).first, 404);
  EXPECT_EQ(Post("/api/submit-score", Score(id, "mallory", 3, 3, 3)).first, 409);
}

TEST_F(ReviewApiTest, DisagreeWithCorrection) {
  const auto [_, claim] = Post("/api/claim-next", {{"reviewer", "alice"}});
  auto body = Score(claim["item"]["id"], "alice", 1, 2, 1);
  body["verdict"] = "disagree";
  body["correction"] = {{"decision", {"low_risk"}}, {"explanation", "语气平和，未见风险"}};
  const auto [status, reply] = Post("/api/submit-score", body);
  EXPECT_EQ(status, 200) << reply.dump();
  EXPECT_EQ(reply["progress"]["corrected"], 1);
  EXPECT_EQ(Post("/api/submit-score", Score(claim["item"]["id"], "alice", 3, 3, 3)).first, 409);
}

TEST_F(ReviewApiTest, AggregateEmptyThenFilled) {
  const auto [s0, empty] = Get("/api/aggregate");
  EXPECT_EQ(s0, 200);
  EXPECT_EQ(empty["n"], 0);
  EXPECT_TRUE(empty["overall"].is_null());
  for (int i = 0; i < 2; ++i) {
    const auto [_, claim] = Post("/api/claim-next", {{"reviewer", "alice"}});
    Post("/api/submit-score", Score(claim["item"]["id"], "alice", 2, 2, 2));
  }
  const auto [s1, agg] = Get("/api/aggregate");
  EXPECT_EQ(agg["n"], 2);
  EXPECT_EQ(agg["overall"]["mean"], 2.0);
  EXPECT_EQ(agg["reviewers"]["alice"]["n"], 2);
}

TEST_F(ReviewApiTest, AggregateCsvExport) {
  auto res = http->Get("/api/aggregate.csv");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "dimension,n,mean,median,q1,q3,min,max\n");
  const auto [_, claim] = Post("/api/claim-next", {{"reviewer", "alice"}});
  Post("/api/submit-score", Score(claim["item"]["id"], "alice", 3, 2, 1));
  res = http->Get("/api/aggregate.csv");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->get_header_value("Content-Type"), "text/csv");
  EXPECT_NE(res->body.find("\noverall,1,2.0000,2.0000,"), std::string::npos) << res->body;
  EXPECT_NE(res->body.find("\nconsistency,1,3.0000,"), std::string::npos);
}

TEST_F(ReviewApiTest, DrainedQueueReturnsNullItem) {
  for (int i = 0; i < 10; ++i) {
    const auto [_, claim] = Post("/api/claim-next", {{"reviewer", "alice"}});
    Post("/api/submit-score", Score(claim["item"]["id"], "alice", 2, 2, 2));
  }
  const auto [status, body] = Post("/api/claim-next", {{"reviewer", "alice"}});
  EXPECT_EQ(status, 200);
  EXPECT_TRUE(body["item"].is_null());
  EXPECT_DOUBLE_EQ(body["progress"]["percent"].get<double>(), 100.0);
}

TEST_F(ReviewApiTest, BusyPortFailsAtConstruction) {
  ReviewServerOptions opt;
  opt.port = server->port();
  EXPECT_THROW(ReviewServer(*store, reg, opt), IoError);
}

}  // namespace
}  // namespace mindloom
