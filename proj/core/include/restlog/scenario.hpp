#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "restlog/log_ingestion.hpp"
#include "restlog/rng.hpp"
#include "restlog/testbed.hpp"
#include "restlog/timeutil.hpp"

namespace restlog::gitlite {

// One scripted request. `path` and string param values may name saved
// variables as "$name" (whole segment / whole value).
struct ScenarioStep {
  std::string user;
  Method method = Method::Get;
  std::string path;
  std::map<std::string, nlohmann::json> params;
  // Delay after the same user's previous step (or the script start).
  std::int64_t think_ms = 0;
  // Saves the response's "iid" (else "id") under this name.
  std::optional<std::string> save_as;
  // Unlogged steps change state but emit no line (activity before the log window).
  bool logged = true;
};

struct ScenarioScript {
  std::string name;
  EpochMs start = 0;
  std::vector<FaultRule> faults;
  std::vector<ScenarioStep> steps;
};

// Throws Error(InvalidConfig) on negative think times or missing fields.
ScenarioScript scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const ScenarioScript& script);
ScenarioScript load_scenario_file(const std::filesystem::path& path);

struct ScenarioRecord {
  RawRequestRecord record;  // query params in the uri, body params in body_params
  std::string user;
  std::int64_t user_number = 0;  // 1-based, in order of first appearance
  double duration_s = 0;
  bool logged = true;
};

struct ScenarioRun {
  std::vector<ScenarioRecord> records;  // every executed step, in timestamp order
  State state;
};

// Runs the script against a fresh service. Each user keeps its own clock; the
// steps of all users execute in global timestamp order (ties by script order).
// The rng adds sub-second jitter and response durations. Throws
// Error(InvalidConfig) when a step references an unsaved variable.
ScenarioRun run_scenario(const ScenarioScript& script, Rng& rng);

// One line per logged step. Nginx lines carry the user as $remote_user; JSON
// lines follow GitLab's api_json layout (params as a key/value array).
std::vector<std::string> generate_hrlogs(const ScenarioScript& script, LogFormat format, Rng& rng);

// Shipped scripts, identical to data/gitlite/*.scenario.json.
const std::string& approval_scenario_document();
const std::string& default_scenario_document();
ScenarioScript approval_scenario();
ScenarioScript default_scenario();

}  // namespace restlog::gitlite
