#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "restlog/error.hpp"
#include "restlog/log_ingestion.hpp"
#include "restlog/scenario.hpp"
#include "restlog/testbed.hpp"
#include "support/test_support.hpp"

using namespace restlog;
using namespace restlog::gitlite;
using nlohmann::json;

namespace {

HttpResponse call(Service& s, Method m, const std::string& target, const json& body = nullptr) {
  HttpRequest r;
  r.method = m;
  r.target = target;
  if (!body.is_null()) r.body = body.dump();
  return s.handle(r);
}

std::string message_of(const HttpResponse& r) {
  return json::parse(r.body).value("message", "");
}

// Project 1 with branch "f" and MR iid 1 from f into main.
void open_mr(Service& s) {
  ASSERT_EQ(call(s, Method::Post, "/projects", {{"name", "x"}}).status, 201);
  ASSERT_EQ(call(s, Method::Post, "/projects/1/commits",
                 {{"branch", "f"}, {"commit_message", "m"}, {"action", "create"}})
                .status,
            201);
  ASSERT_EQ(call(s, Method::Post, "/projects/1/merge_requests",
                 {{"source_branch", "f"}, {"target_branch", "main"}, {"title", "t"}})
                .status,
            201);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST(Gitlite, CreateProjectOnFreshState) {
  Service s;
  auto r = call(s, Method::Post, "/projects", {{"name", "x"}});
  EXPECT_EQ(r.status, 201);
  EXPECT_EQ(json::parse(r.body)["id"], 1);
  EXPECT_EQ(call(s, Method::Post, "/projects", {{"name", "y"}, {"visibility", "secret"}}).status, 400);
  EXPECT_EQ(call(s, Method::Post, "/projects", json::object()).status, 400);
  EXPECT_EQ(call(s, Method::Get, "/projects/1").status, 200);
  EXPECT_EQ(call(s, Method::Get, "/projects/2").status, 404);
}

TEST(Gitlite, MergeBeforeApproveIsBlocked) {
  Service s;
  open_mr(s);
  auto r = call(s, Method::Put, "/projects/1/merge_requests/1/merge");
  EXPECT_EQ(r.status, 405);
  EXPECT_EQ(message_of(r), "merge blocked: not approved");
}

TEST(Gitlite, DoubleMergeHitsPlantedDefect) {
  Service s;
  open_mr(s);
  EXPECT_EQ(call(s, Method::Post, "/projects/1/merge_requests/1/approve").status, 200);
  EXPECT_EQ(call(s, Method::Put, "/projects/1/merge_requests/1/merge").status, 200);
  auto r = call(s, Method::Put, "/projects/1/merge_requests/1/merge");
  EXPECT_EQ(r.status, 500);
  EXPECT_EQ(message_of(r), kPlantedDefectMessage);

  Service fixed(Options{false, {}});
  open_mr(fixed);
  call(fixed, Method::Post, "/projects/1/merge_requests/1/approve");
  call(fixed, Method::Put, "/projects/1/merge_requests/1/merge");
  EXPECT_EQ(call(fixed, Method::Put, "/projects/1/merge_requests/1/merge").status, 405);
}

TEST(Gitlite, BranchAndMergeRequestRules) {
  Service s;
  call(s, Method::Post, "/projects", {{"name", "x"}});
  auto mr = [&](const std::string& src, const std::string& dst) {
    return call(s, Method::Post, "/projects/1/merge_requests",
                {{"source_branch", src}, {"target_branch", dst}, {"title", "t"}})
        .status;
  };
  EXPECT_EQ(mr("main", "main"), 400);
  EXPECT_EQ(mr("f", "main"), 400);
  EXPECT_EQ(call(s, Method::Post, "/projects/1/commits",
                 {{"branch", "f"}, {"commit_message", "m"}, {"action", "update"}})
                .status,
            400);
  EXPECT_EQ(call(s, Method::Post, "/projects/9/commits",
                 {{"branch", "f"}, {"commit_message", "m"}, {"action", "create"}})
                .status,
            404);
  EXPECT_EQ(call(s, Method::Post, "/projects/1/commits",
                 {{"branch", "f"}, {"commit_message", "m"}, {"action", "create"}})
                .status,
            201);
  EXPECT_EQ(mr("f", "main"), 201);
  EXPECT_EQ(mr("f", "main"), 201);
  EXPECT_EQ(json::parse(call(s, Method::Get, "/projects/1/merge_requests").body).size(), 2u);
  EXPECT_EQ(call(s, Method::Get, "/projects/1/merge_requests?state=merged").status, 200);
}

TEST(Gitlite, UnknownRoutesAndMethods) {
  Service s;
  EXPECT_EQ(message_of(call(s, Method::Get, "/metrics")), "404 Not Found");
  EXPECT_EQ(call(s, Method::Delete, "/projects").status, 405);
  EXPECT_EQ(call(s, Method::Get, "/projects/1/merge_requests/1/approve").status, 405);
  HttpRequest bad{Method::Post, "/projects", {}, "not json"};
  EXPECT_EQ(s.handle(bad).status, 400);
}

TEST(Gitlite, FaultRules) {
  Service s(Options{true, {{Method::Get, "/projects/:id", 503, "planted"}}});
  auto r = call(s, Method::Get, "/projects/4");
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(message_of(r), "planted");
  EXPECT_EQ(call(s, Method::Get, "/projects").status, 200);
}

// Random request streams never reach merged without approved.
TEST(Gitlite, MergedImpliesApprovedProperty) {
  Rng rng(31);
  for (int round = 0; round < 200; ++round) {
    Service s;
    for (int i = 0; i < 40; ++i) {
      std::string p = std::to_string(1 + rng.below(2));
      std::string iid = std::to_string(1 + rng.below(3));
      switch (rng.below(5)) {
        case 0: call(s, Method::Post, "/projects", {{"name", "n"}}); break;
        case 1:
          call(s, Method::Post, "/projects/" + p + "/commits",
               {{"branch", rng.chance(0.5) ? "a" : "b"}, {"commit_message", "m"}, {"action", "create"}});
          break;
        case 2:
          call(s, Method::Post, "/projects/" + p + "/merge_requests",
               {{"source_branch", rng.chance(0.5) ? "a" : "b"}, {"target_branch", "main"}, {"title", "t"}});
          break;
        case 3: call(s, Method::Post, "/projects/" + p + "/merge_requests/" + iid + "/approve"); break;
        default: call(s, Method::Put, "/projects/" + p + "/merge_requests/" + iid + "/merge"); break;
      }
      for (const auto& [key, mr] : s.state().merge_requests) {
        ASSERT_TRUE(!mr.merged || mr.approved);
        ASSERT_TRUE(s.state().projects.count(mr.project));
      }
    }
  }
}

// Every operation in the shipped document routes in handle, and match_uri
// finds it back from the concrete path.
TEST(Gitlite, OpenApiMatchesRouting) {
  const auto& spec = test::gitlite_spec();
  EXPECT_EQ(spec.operations.size(), 9u);
  for (const auto& [id, op] : spec.operations) {
    Service s;
    std::string path;
    for (const auto& seg : op.path) path += "/" + (seg.is_param() ? std::string("1") : seg.text);
    auto r = call(s, op.method, path, op.method == Method::Post || op.method == Method::Put
                                          ? json::object()
                                          : json(nullptr));
    std::string msg = r.status >= 400 ? message_of(r) : "";
    EXPECT_NE(msg, "404 Not Found") << id;
    EXPECT_NE(msg, "405 Method Not Allowed") << id;
    auto m = match_uri(spec, op.method, path);
    ASSERT_TRUE(m) << id;
    EXPECT_EQ(m->operation, id);
  }
  for (Method m : {Method::Delete, Method::Patch}) {
    Service s;
    EXPECT_EQ(call(s, m, "/projects/1").status, 405);
    EXPECT_FALSE(match_uri(spec, m, "/projects/1"));
  }
}

TEST(Gitlite, DataFilesMatchEmbeddedCopies) {
  const std::string dir = RESTLOG_DATA_DIR;
  EXPECT_EQ(slurp(dir + "/openapi.json"), openapi_document());
  EXPECT_EQ(slurp(dir + "/approval.scenario.json"), approval_scenario_document());
  EXPECT_EQ(slurp(dir + "/default.scenario.json"), default_scenario_document());
  EXPECT_EQ(load_scenario_file(dir + "/approval.scenario.json").steps.size(), approval_scenario().steps.size());
}

TEST(Scenario, DeterministicLogs) {
  for (LogFormat f : {LogFormat::Nginx, LogFormat::Json}) {
    Rng a(5), b(5), c(6);
    auto x = generate_hrlogs(approval_scenario(), f, a);
    auto y = generate_hrlogs(approval_scenario(), f, b);
    auto z = generate_hrlogs(approval_scenario(), f, c);
    EXPECT_EQ(x, y);
    // Nginx timestamps have one-second resolution, so jitter only shows in JSON.
    if (f == LogFormat::Json) EXPECT_NE(x, z);
  }
  Rng a(5), b(5);
  auto s1 = run_scenario(default_scenario(), a).state;
  auto s2 = run_scenario(default_scenario(), b).state;
  EXPECT_EQ(s1.projects.size(), s2.projects.size());
  EXPECT_EQ(s1.next_iid, s2.next_iid);
}

TEST(Scenario, LinesParseBackInTimeOrder) {
  Rng rng(1);
  auto lines = generate_hrlogs(approval_scenario(), LogFormat::Json, rng);
  EpochMs last = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto r = parse_json_line(lines[i], {}, i + 1);
    EXPECT_GE(r.timestamp, last);
    last = r.timestamp;
  }
  Rng rng2(1);
  auto run = run_scenario(approval_scenario(), rng2);
  std::size_t logged = 0;
  for (const auto& r : run.records) logged += r.logged;
  EXPECT_EQ(lines.size(), logged);
  EXPECT_LT(logged, run.records.size());
}

TEST(Scenario, EmptyScriptGivesNoLines) {
  Rng rng(1);
  EXPECT_TRUE(generate_hrlogs(ScenarioScript{}, LogFormat::Nginx, rng).empty());
}

TEST(Scenario, NotFoundStepIsLoggedThenDropped) {
  ScenarioScript s = scenario_from_json(json::parse(R"({
    "start": "2024-01-01T00:00:00Z",
    "steps": [
      {"user": "a", "method": "POST", "path": "/projects", "params": {"name": "x"}, "save_as": "p"},
      {"user": "a", "method": "GET", "path": "/projects/$p", "think_ms": 1000},
      {"user": "a", "method": "GET", "path": "/projects/77", "think_ms": 1000}
    ]})"));
  Rng rng(2);
  auto lines = generate_hrlogs(s, LogFormat::Nginx, rng);
  ASSERT_EQ(lines.size(), 3u);
  std::vector<RawRequestRecord> rs;
  for (std::size_t i = 0; i < lines.size(); ++i) rs.push_back(parse_nginx_line(lines[i], i + 1));
  EXPECT_EQ(rs[1].uri, "/projects/1");
  EXPECT_EQ(rs[2].status, 404);
  IngestStats stats;
  auto pre = preprocess(rs, test::gitlite_spec(), test::gitlite_model().deps, &stats);
  EXPECT_EQ(pre.entries.size(), 2u);
  EXPECT_EQ(stats.non_2xx, 1u);
}

TEST(Scenario, InvalidScripts) {
  auto code = [](const char* text) {
    try {
      scenario_from_json(json::parse(text));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code(R"({"steps":[{"user":"a","method":"GET","path":"/x","think_ms":-1}]})"),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code(R"({"steps":[{"user":"a","path":"/x"}]})"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code(R"({"steps":[{"user":"a","method":"GET","path":"x"}]})"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code(R"({"faults":[{"method":"GET","path":"/x","status":404}]})"), ErrorCode::InvalidConfig);
  ScenarioScript unresolved = scenario_from_json(
      json::parse(R"({"steps":[{"user":"a","method":"GET","path":"/projects/$nope"}]})"));
  Rng rng(1);
  EXPECT_THROW(run_scenario(unresolved, rng), Error);
  // Round trip through JSON keeps every field.
  auto approval = approval_scenario();
  EXPECT_EQ(scenario_to_json(scenario_from_json(scenario_to_json(approval))), scenario_to_json(approval));
}
