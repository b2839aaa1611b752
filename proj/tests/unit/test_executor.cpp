#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "restlog/enhancement.hpp"
#include "restlog/error.hpp"
#include "restlog/executor.hpp"
#include "restlog/testbed.hpp"
#include "support/test_support.hpp"

using namespace restlog;
using nlohmann::json;
using test::gitlite_entry;
using test::gitlite_model;
using test::gitlite_spec;

namespace {

class Recorder final : public ExecutionTarget {
 public:
  std::vector<HttpRequest> sent;
  int sequences = 0;
  std::vector<HttpResponse> replies;

  void begin_sequence() override { ++sequences; }
  HttpResponse send(const HttpRequest& r) override {
    sent.push_back(r);
    if (replies.empty()) return {200, "{}"};
    HttpResponse out = replies.front();
    replies.erase(replies.begin());
    return out;
  }
  std::string describe() const override { return "recorder"; }
};

Seed s2_seed() {
  ParameterCorpus corpus;
  CompletionContext ctx{gitlite_spec(), gitlite_model().tree, gitlite_model().deps, corpus};
  LogSlice s;
  s.entries = {gitlite_entry(6, 0, test::kApprove, {{"id", "15"}, {"iid", "3"}}),
               gitlite_entry(7, 1, test::kMerge, {{"id", "15"}, {"iid", "3"}})};
  Rng rng(3);
  return rcsc(s, ctx, rng);
}

// Commit, MR, approve, merge on logged project 15; rcsc prepends the project.
Seed chain_seed() {
  ParameterCorpus corpus;
  CompletionContext ctx{gitlite_spec(), gitlite_model().tree, gitlite_model().deps, corpus};
  LogSlice s;
  s.entries = {gitlite_entry(3, 0, test::kCreateCommit,
                             {{"id", "15"}, {"branch", "f"}, {"commit_message", "m"}, {"action", "create"}}),
               gitlite_entry(5, 1, test::kCreateMr,
                             {{"id", "15"}, {"source_branch", "f"}, {"target_branch", "main"}, {"title", "t"}}),
               gitlite_entry(6, 2, test::kApprove, {{"id", "15"}, {"iid", "3"}}),
               gitlite_entry(7, 3, test::kMerge, {{"id", "15"}, {"iid", "3"}})};
  Rng rng(3);
  return rcsc(s, ctx, rng);
}

}  // namespace

TEST(Executor, BindsRuntimeIds) {
  auto factory = gitlite::handler_factory();
  InProcessTarget target(factory, "gitlite");
  SimulatedClock clock;
  Executor exec(gitlite_spec(), gitlite_model().tree, target, clock);
  Seed seed = chain_seed();
  auto rs = exec.execute(seed);
  ASSERT_EQ(rs.size(), 5u);
  EXPECT_EQ(rs[0].status, 201);
  EXPECT_EQ(rs[0].extracted_ids.at(test::kProjects), "1");
  EXPECT_EQ(rs[1].request.target, "/projects/1/commits");
  EXPECT_EQ(rs[1].status, 201);
  EXPECT_EQ(rs[2].request.target, "/projects/1/merge_requests");
  EXPECT_EQ(rs[2].status, 201);
  // Logged "15"/"3" were replaced by the ids the service handed out.
  EXPECT_EQ(rs[3].request.target, "/projects/1/merge_requests/1/approve");
  EXPECT_EQ(rs[3].status, 200);
  EXPECT_EQ(rs[4].status, 200);
  EXPECT_FALSE(rs[4].binding_fallback);
  EXPECT_EQ(clock.now_ms(), 50);
  EXPECT_EQ(rs[4].finished_ms, 50);
  EXPECT_EQ(rs[4].latency_ms, 10);
}

TEST(Executor, UnboundSendsLoggedValue) {
  InProcessTarget target(gitlite::handler_factory(), "gitlite");
  SimulatedClock clock;
  Executor exec(gitlite_spec(), gitlite_model().tree, target, clock);
  Seed seed = chain_seed();
  seed.unbound.insert({3, "id"});
  seed.phi_prime.erase({3, "id"});
  auto rs = exec.execute(seed);
  EXPECT_EQ(rs[3].request.target, "/projects/15/merge_requests/1/approve");
  EXPECT_EQ(rs[3].status, 404);
}

TEST(Executor, FallbackWhenCreatorFailed) {
  Recorder target;
  target.replies = {{500, "{}"}, {201, R"({"iid":9})"}};
  SimulatedClock clock;
  Executor exec(gitlite_spec(), gitlite_model().tree, target, clock);
  auto rs = exec.execute(s2_seed());
  EXPECT_TRUE(rs[1].binding_fallback);
  EXPECT_EQ(rs[1].request.target, "/projects/15/merge_requests");
  EXPECT_EQ(rs[2].request.target, "/projects/15/merge_requests/9/approve");
  EXPECT_EQ(target.sequences, 1);
}

TEST(Executor, EncodesQueryBodyAndAuth) {
  Recorder target;
  SimulatedClock clock;
  AuthConfig auth;
  auth.header = "PRIVATE-TOKEN";
  auth.token = "secret";
  Executor exec(gitlite_spec(), gitlite_model().tree, target, clock, auth);
  Seed seed;
  seed.entries = {gitlite_entry(1, 0, test::kListMrs, {{"id", "4"}, {"state", "opened"},
                                                       {"search", "login form"}}),
                  gitlite_entry(2, 0, test::kCreateProject, {{"name", "web"}, {"visibility", "private"}})};
  auto rs = exec.execute(seed);
  EXPECT_EQ(target.sent[0].target, "/projects/4/merge_requests?search=login%20form&state=opened");
  EXPECT_TRUE(target.sent[0].body.empty());
  EXPECT_EQ(json::parse(target.sent[1].body), (json{{"name", "web"}, {"visibility", "private"}}));
  EXPECT_EQ(target.sent[1].headers.at("PRIVATE-TOKEN"), "secret");
  EXPECT_EQ(rs[1].request.method, Method::Post);
}

TEST(Executor, EmptySequence) {
  Recorder target;
  SimulatedClock clock;
  Executor exec(gitlite_spec(), gitlite_model().tree, target, clock);
  EXPECT_TRUE(exec.execute(Seed{}).empty());
  EXPECT_EQ(clock.now_ms(), 0);
}

TEST(Auth, Resolution) {
  AuthConfig none;
  EXPECT_FALSE(none.resolve());
  AuthConfig bearer;
  bearer.token = "t";
  EXPECT_EQ(bearer.resolve(), std::make_pair(std::string("Authorization"), std::string("Bearer t")));
  AuthConfig env;
  env.header = "X-Token";
  env.token_env = "RESTLOG_TEST_TOKEN_VAR";
  env.required = true;
  ::unsetenv("RESTLOG_TEST_TOKEN_VAR");
  try {
    env.resolve();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AuthMissing);
  }
  ::setenv("RESTLOG_TEST_TOKEN_VAR", "abc", 1);
  EXPECT_EQ(env.resolve()->second, "abc");
  ::unsetenv("RESTLOG_TEST_TOKEN_VAR");
}

TEST(ExtractInstanceId, Examples) {
  ExtractionConfig cfg;
  EXPECT_EQ(extract_instance_id(R"({"id":42,"name":"x"})", test::kProjects, cfg), "42");
  EXPECT_EQ(extract_instance_id(R"({"iid":3})", test::kMergeRequests, cfg), "3");
  EXPECT_EQ(extract_instance_id("<html>", test::kProjects, cfg), std::nullopt);
  EXPECT_EQ(extract_instance_id(R"({"project_id":"p-1"})", test::kProjects, cfg), "p-1");
  cfg.per_resource[test::kProjects] = {"data.ref"};
  EXPECT_EQ(extract_instance_id(R"({"id":1,"data":{"ref":"abc"}})", test::kProjects, cfg), "abc");
}

TEST(RawSeed, KeepsLoggedValues) {
  LogSlice s;
  s.entries = {gitlite_entry(6, 0, test::kApprove, {{"id", "15"}, {"iid", "3"}})};
  Seed seed = raw_seed(s);
  EXPECT_EQ(seed.prepended, 0u);
  EXPECT_TRUE(seed.phi_prime.empty());
  Recorder target;
  SimulatedClock clock;
  Executor exec(gitlite_spec(), gitlite_model().tree, target, clock);
  exec.execute(seed);
  EXPECT_EQ(target.sent[0].target, "/projects/15/merge_requests/3/approve");
}

TEST(HttpTarget, AgainstLiveServer) {
  gitlite::LiveServer server;
  int port = server.bind("127.0.0.1", 0);
  std::thread runner([&] { server.run(); });
  HttpTargetOptions o;
  o.base_url = "http://127.0.0.1:" + std::to_string(port);
  o.timeout_ms = 2000;
  auto target = make_http_target(o);
  WallClock clock;
  Executor exec(gitlite_spec(), gitlite_model().tree, *target, clock);
  auto rs = exec.execute(chain_seed());
  target.reset();  // drops the keep-alive connection so stop() returns at once
  server.stop();
  runner.join();
  ASSERT_EQ(rs.size(), 5u);
  EXPECT_EQ(rs[0].status, 201);
  EXPECT_EQ(rs[4].status, 200);
}

TEST(HttpTarget, ClosedPortIsTransportFailure) {
  HttpTargetOptions o;
  o.base_url = "http://127.0.0.1:1";
  o.timeout_ms = 300;
  auto target = make_http_target(o);
  auto r = target->send({Method::Get, "/projects", {}, ""});
  EXPECT_EQ(r.status, 0);
  EXPECT_FALSE(r.body.empty());
  o.base_url = "not-a-url";
  EXPECT_THROW(make_http_target(o), Error);
}
