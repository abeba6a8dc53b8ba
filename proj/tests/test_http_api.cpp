#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "cvsops/http_api.hpp"

using namespace cvsops;

namespace {

class ApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("cvsops-api-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    ServiceConfig cfg;
    cfg.data_dir = dir_.string();
    cfg.api_token = "secret";
    cfg.engine.scheduler.bucket_size = 4;
    service_ = std::make_unique<Service>(cfg);
    api_ = std::make_unique<api::Api>(*service_);
    api_->mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_bearer_token_auth("secret");
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
    client_.reset();
    api_.reset();
    service_.reset();
    std::filesystem::remove_all(dir_);
  }

  httplib::Result post(const std::string& path, const json& body, const std::string& key) {
    httplib::Headers h;
    if (!key.empty()) h.emplace("Idempotency-Key", key);
    return client_->Post(path, h, body.dump(), "application/json");
  }

  json ok_post(const std::string& path, const json& body) {
    auto r = post(path, body, "k" + std::to_string(++keys_));
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 201) << path << " " << r->body;
    return json::parse(r->body);
  }

  json get(const std::string& path) {
    auto r = client_->Get(path);
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 200) << path << " " << r->body;
    return json::parse(r->body);
  }

  void video(const std::string& id) {
    video_flow::IntakeRecord r;
    r.case_id = CaseId(id);
    r.duration_s = 3000;
    r.split = "test";
    r.media_uri = "s3://bucket/" + id;
    r.provenance.country = "north";
    r.provenance.source_institution = "General Hospital";
    ok_post("/videos", r);
    ok_post("/videos/" + id + "/events", {{"type", "SCREENING_STARTED"}});
    for (const auto* rater : {"r1", "r2"}) {
      PreAnnotation p;
      p.rater_id = RaterId(rater);
      p.clipping_timestamp = 1500;
      ok_post("/videos/" + id + "/events",
              {{"type", "PREANNOTATION_SUBMITTED"},
               {"preannotation", video_flow::with_eligibility(p, 3000)}});
    }
  }

  void annotator(const std::string& id) {
    ok_post("/annotators", {{"annotator_id", id}, {"profile", {{"contact", id + "@example.org"}}}});
    for (json e : {json{{"type", "ELIGIBILITY_PASSED"}}, json{{"type", "TRAINING_STARTED"}},
                   json{{"type", "EXAM_TAKEN"}, {"score", 0.9}},
                   json{{"type", "QUALIFICATION_CONFIRMED"}}, json{{"type", "ACTIVATED"}}}) {
      ok_post("/annotators/" + id + "/events", e);
    }
  }

  static json assessment(const std::string& clip, const std::string& who) {
    Assessment a;
    a.clip_id = ClipId(clip);
    a.annotator_id = AnnotatorId(who);
    a.confidence = 0.7;
    return a;
  }

  std::filesystem::path dir_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<api::Api> api_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
  int keys_ = 0;
};

}  // namespace

TEST_F(ApiTest, BearerTokenRequiredExceptHealth) {
  httplib::Client anon("127.0.0.1", port_);
  EXPECT_EQ(anon.Get("/health")->status, 200);
  EXPECT_EQ(anon.Get("/videos")->status, 401);
  anon.set_bearer_token_auth("wrong");
  EXPECT_EQ(anon.Get("/videos")->status, 401);
  EXPECT_EQ(client_->Get("/videos")->status, 200);
}

TEST_F(ApiTest, MutationsNeedIdempotencyKey) {
  auto r = post("/annotators", {{"annotator_id", "a1"}, {"profile", json::object()}}, "");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json::parse(r->body)["error"], "InvalidInput");
  EXPECT_TRUE(get("/annotators").empty());
}

TEST_F(ApiTest, RepeatedKeyReplaysFirstResponse) {
  const json body{{"annotator_id", "a1"}, {"profile", json::object()}};
  auto first = post("/annotators", body, "same");
  auto second = post("/annotators", body, "same");
  ASSERT_TRUE(first && second);
  EXPECT_EQ(first->status, 201);
  EXPECT_EQ(second->status, 201);
  EXPECT_EQ(first->body, second->body);
  EXPECT_FALSE(first->has_header("Idempotent-Replay"));
  EXPECT_EQ(second->get_header_value("Idempotent-Replay"), "true");
  // A new key is a fresh request and the duplicate registration is refused.
  auto third = post("/annotators", body, "other");
  EXPECT_EQ(third->status, 400);
  EXPECT_EQ(get("/annotators").size(), 1u);
}

TEST_F(ApiTest, AssignmentsAreBlindedAndAssessmentsStoredOnce) {
  video("v1");
  annotator("a1");
  const auto batch = ok_post("/assignments/tick", json::object());
  ASSERT_EQ(batch["assignments"].size(), 1u);

  const auto mine = get("/assignments?annotator=a1");
  ASSERT_EQ(mine.size(), 1u);
  const auto& view = mine[0];
  EXPECT_EQ(view["clip_id"], "v1-clip");
  EXPECT_EQ(view["frame_indices"].size(), 18u);
  const auto text = view.dump();
  for (const char* leak : {"country", "north", "institution", "General Hospital", "provenance",
                           "device"}) {
    EXPECT_EQ(text.find(leak), std::string::npos) << leak;
  }
  EXPECT_EQ(client_->Get("/assignments")->status, 400);

  const auto a = assessment("v1-clip", "a1");
  auto first = post("/assessments", a, "submit-1");
  auto retry = post("/assessments", a, "submit-1");
  EXPECT_EQ(first->status, 201);
  EXPECT_EQ(retry->status, 201);
  EXPECT_EQ(retry->get_header_value("Idempotent-Replay"), "true");
  EXPECT_EQ(get("/assessments?clip=v1-clip").size(), 1u);
  auto dup = post("/assessments", a, "submit-2");
  EXPECT_EQ(dup->status, 409);
  EXPECT_EQ(json::parse(dup->body)["error"], "DuplicateAssessment");
  EXPECT_EQ(get("/assessments").size(), 1u);
}

TEST_F(ApiTest, ErrorStatusMapping) {
  auto missing = post("/videos/nope/events", {{"type", "SCREENING_STARTED"}}, "m1");
  EXPECT_EQ(missing->status, 404);
  ok_post("/annotators", {{"annotator_id", "a1"}, {"profile", json::object()}});
  auto illegal = post("/annotators/a1/events", {{"type", "ACTIVATED"}}, "m2");
  EXPECT_EQ(illegal->status, 409);
  EXPECT_EQ(json::parse(illegal->body)["error"], "IllegalTransition");
  auto garbage = client_->Post("/videos", {{"Idempotency-Key", "m3"}}, "{bad", "application/json");
  EXPECT_EQ(garbage->status, 400);
  auto unknown = post("/annotators/a1/events", {{"type", "TELEPORTED"}}, "m4");
  EXPECT_EQ(unknown->status, 400);
  auto stray = post("/assessments", assessment("v9-clip", "a1"), "m5");
  EXPECT_EQ(stray->status, 404);
}

TEST_F(ApiTest, ReportsAreServed) {
  annotator("a1");
  const auto funnel = get("/funnel");
  EXPECT_FALSE(funnel.empty());
  const auto metrics = get("/metrics");
  EXPECT_TRUE(metrics["reports"].empty());
  EXPECT_TRUE(get("/leaderboard").is_array() || get("/leaderboard").is_object());
  EXPECT_EQ(ok_post("/effects/run", json::object())["outcomes"].size(), 1u);
}

TEST_F(ApiTest, StatePersistsAcrossRestart) {
  video("v1");
  ServiceConfig cfg;
  cfg.data_dir = dir_.string();
  Service again(cfg);
  EXPECT_EQ(again.state().videos.at(CaseId("v1")).state, VideoState::kClipped);
}
