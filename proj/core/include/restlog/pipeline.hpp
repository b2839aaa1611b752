#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "restlog/enhancement.hpp"
#include "restlog/executor.hpp"
#include "restlog/fuzz_engine.hpp"
#include "restlog/log_ingestion.hpp"
#include "restlog/reporting.hpp"
#include "restlog/resource_analysis.hpp"
#include "restlog/slicing.hpp"
#include "restlog/spec_model.hpp"

namespace restlog {

// Spec path that selects the embedded gitlite document.
inline constexpr std::string_view kBuiltinGitliteSpec = "builtin:gitlite";

struct LogInput {
  std::filesystem::path path;
  LogFormat format = LogFormat::Nginx;
};

struct ClassifierConfig {
  std::string kind = "heuristic";  // heuristic | llm
  HeuristicOptions heuristic;
  LlmOptions llm;
};

struct TargetConfig {
  std::string kind = "http";  // http | gitlite (in-process, fresh state per sequence)
  HttpTargetOptions http;
  AuthConfig auth;
  ExtractionConfig extraction;
  bool gitlite_double_merge_defect = true;
};

enum class CampaignMode { Init, Enh, Fuzz };

std::string_view to_string(CampaignMode m);
std::optional<CampaignMode> parse_campaign_mode(std::string_view s);

struct PipelineConfig {
  std::string spec_path;
  std::vector<LogInput> logs;
  FieldMap field_map;
  std::vector<std::string> identifier_params;
  ClassifierConfig classifier;
  std::int64_t dt_mlt_ms = kDefaultDtMltMs;
  std::int64_t dt_stw_ms = kDefaultDtStwMs;
  int max_synthesis_depth = 4;
  FuzzConfig fuzz;
  TargetConfig target;
  CampaignMode mode = CampaignMode::Fuzz;
  std::filesystem::path work_dir = "restlog-work";
  std::filesystem::path report_dir = "restlog-report";
  std::uint64_t rng_seed = 0;
};

// YAML (or JSON) config file; relative paths resolve against the file's
// directory. Throws Error(InvalidConfig) or Error(IoError).
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_yaml(const std::string& text,
                                const std::filesystem::path& base_dir = {});

// "nginx:path" / "json:path"; a bare path means nginx.
LogInput parse_log_input(std::string_view text);

ServiceSpec load_service_spec(const PipelineConfig& cfg);
std::unique_ptr<Classifier> make_classifier(const ClassifierConfig& cfg);

ResourceModel stage_analyze(const ServiceSpec& spec, const PipelineConfig& cfg);

struct SliceStageResult {
  Preprocessed data;  // entries carry users assigned by split_user_queues
  SliceSet slices;
  IngestStats stats;
};

SliceStageResult stage_slice(const ServiceSpec& spec, const ResourceModel& model,
                             const PipelineConfig& cfg);
// Same, from records already parsed (used by tests and the testbed).
SliceStageResult stage_slice_records(const std::vector<RawRequestRecord>& records,
                                     const ServiceSpec& spec, const ResourceModel& model,
                                     const PipelineConfig& cfg, IngestStats stats = {});

struct EnhanceStageResult {
  SliceSet augmented;  // log slices followed by augmentation slices
  std::vector<Seed> seeds;
  std::size_t skipped = 0;
};

EnhanceStageResult stage_enhance(const ServiceSpec& spec, const ResourceModel& model,
                                 const ParameterCorpus& corpus, const SliceSet& slices,
                                 const PipelineConfig& cfg);

struct CampaignResult {
  FuzzStats stats;
  std::unique_ptr<Reporter> reporter;
  std::vector<Seed> final_pool;
};

// Builds the target, clock and executor from cfg.target and runs one mode:
// init replays raw log slices, enh runs the completed seeds once, fuzz runs
// the full campaign. Throws Error(TargetUnreachable).
CampaignResult stage_fuzz(const ServiceSpec& spec, const ResourceModel& model,
                          const ParameterCorpus& corpus, const SliceSet& slices,
                          const std::vector<Seed>& seeds, const PipelineConfig& cfg,
                          std::ostream* log = nullptr);

// Adds an "ingest" object with the drop counters when ingest is given.
nlohmann::json campaign_stats_json(const CampaignResult& r, const PipelineConfig& cfg,
                                   const IngestStats* ingest = nullptr);

// The whole chain in memory, from records to an exported report directory
// (skipped when cfg.report_dir is empty).
struct CampaignRun {
  ResourceModel model;
  SliceStageResult sliced;
  EnhanceStageResult enhanced;
  CampaignResult campaign;
};

CampaignRun run_pipeline(const ServiceSpec& spec, const std::vector<RawRequestRecord>& records,
                         const PipelineConfig& cfg, std::ostream* log = nullptr);

// Artifact files under cfg.work_dir.
namespace artifacts {
inline constexpr const char* kResources = "resources.json";
inline constexpr const char* kDeps = "deps.json";
inline constexpr const char* kEntries = "entries.jsonl";
inline constexpr const char* kCorpus = "corpus.json";
inline constexpr const char* kSlices = "slices.jsonl";
inline constexpr const char* kIngestStats = "ingest_stats.json";
inline constexpr const char* kSeeds = "seeds.jsonl";
}  // namespace artifacts

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

}  // namespace restlog
