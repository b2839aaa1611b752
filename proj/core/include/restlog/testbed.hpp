#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "restlog/executor.hpp"
#include "restlog/log_ingestion.hpp"
#include "restlog/rng.hpp"

// gitlite: a small in-memory code-hosting service with an approve-before-merge
// rule and one planted defect (merging an already merged request returns 500).
namespace restlog::gitlite {

struct Project {
  std::int64_t id = 0;
  std::string name;
  std::string visibility = "private";
  std::set<std::string> branches = {"main"};
};

struct Commit {
  std::int64_t id = 0;
  std::int64_t project = 0;
  std::string branch;
  std::string message;
  std::string action;
};

struct MergeRequest {
  std::int64_t project = 0;
  std::int64_t iid = 0;
  std::string source_branch;
  std::string target_branch;
  std::string title;
  bool approved = false;
  bool merged = false;
};

struct State {
  std::map<std::int64_t, Project> projects;
  std::map<std::int64_t, Commit> commits;
  std::map<std::pair<std::int64_t, std::int64_t>, MergeRequest> merge_requests;
  std::int64_t next_project = 1;
  std::int64_t next_commit = 1;
  // Merge request iids come from one service-wide counter.
  std::int64_t next_iid = 1;
};

// Planted 5XX: any request whose method and path match answers `status`.
// Path segments written ":name" or "{name}" match any value.
struct FaultRule {
  Method method = Method::Get;
  std::string path;
  int status = 500;
  std::string message;
};

struct Options {
  bool double_merge_defect = true;
  std::vector<FaultRule> faults;
};

class Service {
 public:
  explicit Service(Options options = {}) : options_(options) {}

  // Never throws; every failure is an HTTP status.
  HttpResponse handle(const HttpRequest& request);
  const State& state() const { return state_; }

 private:
  Options options_;
  State state_;
};

// Fresh service per call; plug into InProcessTarget.
std::function<RequestHandler()> handler_factory(Options options = {});

// Serves one shared Service over HTTP (state accumulates across requests).
class LiveServer {
 public:
  explicit LiveServer(Options options = {});
  ~LiveServer();
  LiveServer(const LiveServer&) = delete;
  LiveServer& operator=(const LiveServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error(IoError).
  int bind(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// The OpenAPI 3 document describing exactly the routes Service::handle serves.
const std::string& openapi_document();

inline constexpr std::string_view kPlantedDefectMessage = "double-merge nil state";

}  // namespace restlog::gitlite
