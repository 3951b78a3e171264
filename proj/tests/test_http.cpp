#include <thread>

#include "catch_amalgamated.hpp"
#include "shyvote/service/http_api.hpp"
#include "shyvote/service/simulate.hpp"

using namespace shyvote;
using namespace shyvote::service;

namespace {

struct Running {
  StudyService svc;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  Running() : svc([] {
      ServiceOptions o;
      o.clock = stepping_clock();
      o.rng_seed = 11;
      return o;
    }()) {
    StudyConfig defaults;
    defaults.trial_counts = {4, 4, 8, 8, 8};
    mount_routes(server, svc, defaults, 1);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~Running() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

std::vector<TrialRecord> trials_for(const json& plan_json, const SessionPlan& plan, double theta) {
  LatentRespondent who;
  who.id = plan.respondent;
  who.theta = theta;
  (void)plan_json;
  return simulate_iat(who, plan, 3);
}

const RawAnswers kAnswers{{"Q1", "Likely"}, {"Q2", "No"},  {"Q3", "Sympathetic"}, {"Q4", "Yes"},
                          {"Q5", "No"},     {"Q9", "Yes"}, {"Q10", "Happy"}};

}  // namespace

TEST_CASE("http study lifecycle") {
  Running srv;
  auto c = srv.client();

  auto r = c.Post("/studies", R"({"study_id": "web"})", "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  CHECK(body_of(r)["study_id"] == "web");
  CHECK(c.Post("/studies", R"({"study_id": "web"})", "application/json")->status == 409);
  CHECK(c.Post("/studies", "{not json", "application/json")->status == 400);
  CHECK(c.Post("/studies/none/sessions", "", "application/json")->status == 404);

  std::vector<std::string> tokens;
  for (int i = 0; i < 4; ++i) {
    r = c.Post("/studies/web/sessions", "", "application/json");
    REQUIRE(r->status == 201);
    tokens.push_back(body_of(r)["token"]);
  }
  r = c.Post("/studies/web/sessions", R"({"respondent": 1980})", "application/json");
  CHECK(r->status == 201);
  CHECK(c.Post("/studies/web/sessions", R"({"respondent": 1980})", "application/json")->status == 409);

  CHECK(c.Get("/sessions/nope/plan")->status == 404);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    r = c.Get("/sessions/" + tokens[i] + "/plan");
    REQUIRE(r->status == 200);
    const auto plan_json = json::parse(r->body);
    CHECK(plan_json["blocks"].size() == 5);
    const auto plan = srv.svc.plan(tokens[i]);
    const auto trials = trials_for(plan_json, plan, 0.4 * static_cast<double>(i) - 0.6);

    json batch = json::array();
    for (const auto& t : trials) batch.push_back(t);
    const auto url = "/sessions/" + tokens[i] + "/trials";
    r = c.Post(url, json{{"trials", batch}}.dump(), "application/json");
    REQUIRE(r->status == 200);
    CHECK(body_of(r)["status"] == "ok");
    CHECK(body_of(r)["accepted"] == trials.size());
    r = c.Post(url, batch.dump(), "application/json");
    CHECK(body_of(r)["status"] == "duplicate, no-op");

    auto bad = batch[0];
    bad["latency_ms"] = -5;
    r = c.Post(url, json::array({bad}).dump(), "application/json");
    CHECK(r->status == 400);
    CHECK(body_of(r)["message"].get<std::string>().find("latency_ms") != std::string::npos);

    auto answers = kAnswers;
    answers["Q1"] = i % 2 ? "Very likely" : "Not likely";
    answers["Q4"] = i < 2 ? "No" : "Yes";
    r = c.Post("/sessions/" + tokens[i] + "/questionnaire", json{{"answers", answers}}.dump(),
               "application/json");
    CHECK(r->status == 200);
  }
  r = c.Post("/sessions/" + tokens[0] + "/questionnaire", json{{"answers", {{"Q1", "Sometimes"}}}}.dump(),
             "application/json");
  CHECK(r->status == 400);
  CHECK(body_of(r)["error"] == "unknown option");

  CHECK(c.Get("/studies/web/report")->status == 404);
  r = c.Post("/studies/web/analysis", "{}", "application/json");
  REQUIRE(r->status == 200);
  const auto report = body_of(r);
  CHECK(report["request"]["k_outliers"] == 1);
  CHECK(report["report"]["rows"].size() >= 2);
  CHECK(body_of(c.Get("/studies/web/report"))["report"] == report["report"]);
  r = c.Get("/studies/web/report?format=csv");
  CHECK(r->status == 200);
  CHECK(r->body == format_report_csv(srv.svc.report("web")->report));

  const auto bundle = c.Get("/studies/web/export");
  REQUIRE(bundle->status == 200);
  CHECK(bundle->body == srv.svc.export_study("web", ExportFormat::jsonl));
  CHECK(c.Get("/studies/web/export?format=xml")->status == 400);
  // tokens clash with the live study
  CHECK(c.Post("/studies/copy/import", bundle->body, "application/x-ndjson")->status == 409);

  CHECK(c.Post("/studies/web/lock", "", "application/json")->status == 200);
  r = c.Post("/sessions/" + tokens[0] + "/questionnaire", json{{"answers", kAnswers}}.dump(),
             "application/json");
  CHECK(r->status == 409);
  CHECK(body_of(r)["error"] == "locked");
}

TEST_CASE("http import and small studies") {
  Running srv;
  auto c = srv.client();
  CohortConfig cfg;
  cfg.n = 5;
  cfg.trial_counts = {4, 4, 8, 8, 8};
  StudyService source([] {
    ServiceOptions o;
    o.clock = stepping_clock();
    o.rng_seed = 3;
    return o;
  }());
  populate_study(source, generate_cohort(cfg), cfg, "src");
  const auto bundle = source.export_study("src", ExportFormat::jsonl);

  auto r = c.Post("/studies/moved/import?format=jsonl", bundle, "application/x-ndjson");
  REQUIRE(r->status == 201);
  CHECK(body_of(r)["respondents"] == 5);
  CHECK(c.Post("/studies/other/import", "{\"type\":\"study\"}\n", "application/x-ndjson")->status == 400);

  r = c.Post("/studies/moved/analysis", R"({"k_outliers": 0, "schemes": ["uniform"]})", "application/json");
  REQUIRE(r->status == 200);

  c.Post("/studies", R"({"study_id": "tiny"})", "application/json");
  r = c.Post("/studies/tiny/import?format=csv", "respondent,Q1,Q2,Q3,Q4,Q5,Q9,Q10\n1500,-2,2,0,2,0,-2,1\n",
             "text/csv");
  CHECK(r->status == 201);
  r = c.Post("/studies/tiny/analysis", "{}", "application/json");
  CHECK(r->status == 422);
  CHECK(body_of(r)["error"] == "insufficient data");
}
