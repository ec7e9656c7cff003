#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "nof1/server.hpp"
#include "test_util.hpp"

using namespace nof1;

namespace {

class Running {
 public:
  explicit Running(ServiceConfig cfg) : engine_(std::move(cfg)), server_(engine_) {
    port_ = server_.bind("127.0.0.1", 0);
    EXPECT_GT(port_, 0);
    thread_ = std::thread([this] { server_.serve(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    if (!engine_.config().api_token.empty()) {
      client_->set_bearer_token_auth(engine_.config().api_token);
    }
  }
  ~Running() {
    server_.stop();
    thread_.join();
  }

  httplib::Client& client() { return *client_; }
  int port() const { return port_; }

  httplib::Result post(const std::string& path, const Json& body,
                       const httplib::Headers& headers = {}) {
    return client_->Post(path, headers, body.dump(), "application/json");
  }

 private:
  Engine engine_;
  HttpServer server_;
  int port_ = -1;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

ServiceConfig device_config(const std::filesystem::path& dir) {
  ServiceConfig c;
  c.data_dir = dir;
  c.model = testutil::reference_model();
  c.rank_samples = 2000;
  c.budget_clip = 5.0;
  return c;
}

Json json_of(const httplib::Result& r) { return parse_json(r->body); }

Json alice_json() { return load_json_file(testutil::fixture("alice_profile.json")); }
Json design_json() { return load_json_file(testutil::fixture("alice_design.json")); }

}  // namespace

TEST(Server, HealthAndUnknownRoute) {
  testutil::TempDir dir;
  Running s(device_config(dir.path()));
  auto r = s.client().Get("/v1/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r).at("mode"), "device");
  EXPECT_EQ(json_of(r).at("schema_version"), kSchemaVersion);
  r = s.client().Get("/v1/nothing-here");
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(json_of(r).at("error").at("code"), "not_found");
}

TEST(Server, DeviceWorkflow) {
  testutil::TempDir dir;
  Running s(device_config(dir.path()));
  auto r = s.post("/v1/patients", alice_json());
  EXPECT_EQ(r->status, 201);
  r = s.client().Get("/v1/patients/alice");
  EXPECT_EQ(json_of(r).at("patient").at("patient_id"), "alice");
  EXPECT_EQ(s.client().Get("/v1/patients/bob")->status, 404);

  r = s.post("/v1/candidates/rank", Json{{"patient_id", "alice"}, {"samples", 4000}, {"seed", 1}});
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r).at("candidates").size(), 4u);
  EXPECT_EQ(json_of(r).at("candidates")[0].at("intervention_id"), "magnesium");

  r = s.post("/v1/trigger/decide", load_json_file(testutil::fixture("alice_candidates.json")));
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r).at("kind"), "validate");

  r = s.post("/v1/trials", Json{{"trial_id", "t1"}, {"patient_id", "alice"}, {"design", design_json()}});
  ASSERT_EQ(r->status, 201) << r->body;
  EXPECT_EQ(s.post("/v1/trials", Json{{"trial_id", "t1"}, {"patient_id", "alice"},
                                      {"design", design_json()}})->status, 409);

  r = s.client().Get("/v1/trials/t1/assignment?day=15");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r).at("phase"), "intervention");
  EXPECT_EQ(s.client().Get("/v1/trials/t1/assignment?day=x")->status, 400);
  EXPECT_EQ(s.client().Get("/v1/trials/t1/assignment")->status, 400);

  for (int d = 1; d <= 20; ++d) {
    r = s.post("/v1/trials/t1/outcomes", Json{{"day", d}, {"primary_event", d % 3 == 0}, {"pain", 2}});
    ASSERT_EQ(r->status, 201) << r->body;
  }
  r = s.post("/v1/trials/t1/outcomes", Json{{"day", 21}, {"primary_event", true}},
             {{"Idempotency-Key", "abc"}});
  EXPECT_EQ(r->status, 201);
  r = s.post("/v1/trials/t1/outcomes", Json{{"day", 21}, {"primary_event", true}},
             {{"Idempotency-Key", "abc"}});
  EXPECT_EQ(r->status, 200);
  EXPECT_TRUE(json_of(r).at("idempotent_replay").get<bool>());
  r = s.post("/v1/trials/t1/outcomes", Json{{"day", 22}, {"primary_event", false}, {"pain", 14}});
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json_of(r).at("error").at("field"), "record.pain") << r->body;

  r = s.client().Get("/v1/trials/t1");
  EXPECT_EQ(json_of(r).at("n_records"), 21);
  EXPECT_EQ(r->body.find("\"records\""), std::string::npos);

  r = s.client().Get("/v1/trials/t1/posterior");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json_of(r).at("reference_arm"), "placebo");
  EXPECT_EQ(s.client().Get("/v1/trials/t1/report")->status, 409);
  EXPECT_EQ(s.post("/v1/trials/t1/complete", Json::object())->status, 200);
  r = s.client().Get("/v1/trials/t1/report");
  ASSERT_EQ(r->status, 200);
  r = s.client().Get("/v1/trials/t1/report?format=tsv");
  ASSERT_EQ(r->status, 200);
  EXPECT_NE(r->body.find('\t'), std::string::npos);

  r = s.post("/v1/privacy/contribute", Json{{"patient_id", "alice"}, {"trial_id", "t1"},
                                            {"arm", "magnesium"}, {"epsilon", 0.5}});
  EXPECT_EQ(r->status, 400);
  r = s.post("/v1/privacy/contribute", Json{{"patient_id", "alice"}, {"trial_id", "t1"},
                                            {"arm", "magnesium"}, {"epsilon", 0.5},
                                            {"consent", true}, {"seed", 3}});
  ASSERT_EQ(r->status, 200) << r->body;
  r = s.post("/v1/privacy/contribute", Json{{"patient_id", "alice"}, {"trial_id", "t1"},
                                            {"arm", "magnesium"}, {"epsilon", 0.6},
                                            {"consent", true}});
  EXPECT_EQ(r->status, 403);
  EXPECT_EQ(json_of(r).at("error").at("code"), "refused");
  r = s.client().Get("/v1/patients/alice/budget");
  EXPECT_NEAR(json_of(r).at("budget").at("remaining_epsilon").get<double>(), 0.5, 1e-12);
  r = s.client().Get("/v1/privacy/outbox");
  EXPECT_EQ(json_of(r).at("outbox").size(), 1u);

  EXPECT_EQ(s.client().Get("/v1/aggregate/prior")->status, 501);
}

TEST(Server, MalformedBodies) {
  testutil::TempDir dir;
  Running s(device_config(dir.path()));
  auto r = s.client().Post("/v1/patients", "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json_of(r).at("error").at("code"), "validation_error");
  r = s.client().Post("/v1/patients", "[1,2]", "application/json");
  EXPECT_EQ(r->status, 400);
  r = s.post("/v1/trials", Json{{"patient_id", "alice"}});
  EXPECT_EQ(r->status, 400);
}

TEST(Server, BearerToken) {
  testutil::TempDir dir;
  auto cfg = device_config(dir.path());
  cfg.api_token = "s3cret";
  Running s(cfg);
  httplib::Client anon("127.0.0.1", s.port());
  EXPECT_EQ(anon.Get("/v1/health")->status, 200);
  auto r = anon.Get("/v1/patients/alice");
  EXPECT_EQ(r->status, 401);
  EXPECT_EQ(parse_json(r->body).at("error").at("code"), "authentication_failed");
  EXPECT_EQ(s.client().Get("/v1/patients/alice")->status, 404);
}

TEST(Server, AggregateMode) {
  testutil::TempDir dir;
  auto cfg = device_config(dir.path());
  cfg.mode = ServiceMode::kAggregate;
  cfg.k_min = 2;
  Running s(cfg);
  EXPECT_EQ(s.post("/v1/patients", alice_json())->status, 501);
  Json c{{"intervention_id", "magnesium"}, {"estimate", -1.5}, {"noise_sd", 2.0},
         {"count", 1}, {"consent", true}};
  EXPECT_EQ(s.post("/v1/aggregate/contributions", c)->status, 201);
  auto r = s.client().Get("/v1/aggregate/prior");
  EXPECT_EQ(json_of(r).at("released").size(), 0u);
  EXPECT_EQ(json_of(r).at("withheld"), Json{"magnesium"});
  c["estimate"] = -2.5;
  EXPECT_EQ(s.post("/v1/aggregate/contributions", Json{{"contributions", Json::array({c})}})->status,
            201);
  r = s.client().Get("/v1/aggregate/prior");
  ASSERT_EQ(json_of(r).at("released").size(), 1u);
  EXPECT_DOUBLE_EQ(json_of(r).at("released")[0].at("mean").get<double>(), -2.0);
}
