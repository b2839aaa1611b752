#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "restlog/error.hpp"
#include "restlog/pipeline.hpp"
#include "restlog/scenario.hpp"

using namespace restlog;
namespace fs = std::filesystem;

namespace {

std::vector<RawRequestRecord> approval_records(std::uint64_t seed, IngestStats* stats = nullptr) {
  Rng rng(seed);
  std::stringstream text;
  for (const auto& l : gitlite::generate_hrlogs(gitlite::approval_scenario(), LogFormat::Json, rng)) {
    text << l << '\n';
  }
  IngestStats local;
  return parse_log_stream(text, LogFormat::Json, {}, stats ? *stats : local);
}

PipelineConfig gitlite_config() {
  PipelineConfig cfg;
  cfg.spec_path = std::string(kBuiltinGitliteSpec);
  cfg.target.kind = "gitlite";
  cfg.fuzz.budget_ms = 5000;
  cfg.report_dir.clear();
  return cfg;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::path(::testing::TempDir()) / ("restlog_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of(const std::string& yaml) {
  try {
    config_from_yaml(yaml);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;  // sentinel: no throw
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  PipelineConfig cfg = config_from_yaml("");
  EXPECT_EQ(cfg.dt_mlt_ms, kDefaultDtMltMs);
  EXPECT_EQ(cfg.dt_stw_ms, kDefaultDtStwMs);
  EXPECT_EQ(cfg.mode, CampaignMode::Fuzz);
  EXPECT_EQ(cfg.target.kind, "http");
  EXPECT_EQ(cfg.classifier.kind, "heuristic");
}

TEST(Config, ReadsEveryKey) {
  const char* yaml = R"(
spec: api/openapi.yaml
logs:
  - json:logs/a.log
  - {path: /var/log/b.log, format: nginx}
field_map: {time: ts, user: who}
identifier_params: [private_token]
classifier:
  kind: llm
  endpoint: http://127.0.0.1:9/v1/chat/completions
  model: m1
  max_attempts: 3
  singular_overrides: {people: person}
slicing: {dt_mlt_ms: 15000, dt_stw_ms: 60000}
max_synthesis_depth: 2
fuzz: {budget_ms: 1234, fault_rate: 0.5, mode: enh, stats_every: 7}
target:
  kind: gitlite
  base_url: http://localhost:1
  headers: {X-Trace: "1"}
  double_merge_defect: false
  auth: {header: PRIVATE-TOKEN, token_env: GL_TOKEN, required: true}
  extraction: {keys: [uid], per_resource: {/projects: [pid]}}
work_dir: w
report_dir: /abs/r
rng_seed: 99
)";
  PipelineConfig cfg = config_from_yaml(yaml, "/base");
  EXPECT_EQ(cfg.spec_path, "/base/api/openapi.yaml");
  ASSERT_EQ(cfg.logs.size(), 2u);
  EXPECT_EQ(cfg.logs[0].format, LogFormat::Json);
  EXPECT_EQ(cfg.logs[0].path, fs::path("/base/logs/a.log"));
  EXPECT_EQ(cfg.logs[1].format, LogFormat::Nginx);
  EXPECT_EQ(cfg.logs[1].path, fs::path("/var/log/b.log"));
  EXPECT_EQ(cfg.field_map.time, "ts");
  EXPECT_EQ(cfg.field_map.user, "who");
  EXPECT_EQ(cfg.identifier_params, std::vector<std::string>{"private_token"});
  EXPECT_EQ(cfg.classifier.kind, "llm");
  EXPECT_EQ(cfg.classifier.llm.model, "m1");
  EXPECT_EQ(cfg.classifier.llm.max_attempts, 3);
  EXPECT_EQ(cfg.classifier.heuristic.singular_overrides.at("people"), "person");
  EXPECT_EQ(cfg.dt_mlt_ms, 15000);
  EXPECT_EQ(cfg.dt_stw_ms, 60000);
  EXPECT_EQ(cfg.max_synthesis_depth, 2);
  EXPECT_EQ(cfg.fuzz.budget_ms, 1234);
  EXPECT_DOUBLE_EQ(cfg.fuzz.fault_rate, 0.5);
  EXPECT_EQ(cfg.fuzz.stats_every, 7u);
  EXPECT_EQ(cfg.mode, CampaignMode::Enh);
  EXPECT_EQ(cfg.target.kind, "gitlite");
  EXPECT_EQ(cfg.target.http.headers.at("X-Trace"), "1");
  EXPECT_FALSE(cfg.target.gitlite_double_merge_defect);
  EXPECT_EQ(cfg.target.auth.header, "PRIVATE-TOKEN");
  EXPECT_EQ(cfg.target.auth.token_env, "GL_TOKEN");
  EXPECT_TRUE(cfg.target.auth.required);
  EXPECT_EQ(cfg.target.extraction.keys, std::vector<std::string>{"uid"});
  EXPECT_EQ(cfg.target.extraction.per_resource.at("/projects"), std::vector<std::string>{"pid"});
  EXPECT_EQ(cfg.work_dir, fs::path("/base/w"));
  EXPECT_EQ(cfg.report_dir, fs::path("/abs/r"));
  EXPECT_EQ(cfg.rng_seed, 99u);
}

TEST(Config, BuiltinSpecIsNotResolved) {
  EXPECT_EQ(config_from_yaml("spec: builtin:gitlite", "/base").spec_path, "builtin:gitlite");
}

TEST(Config, JsonIsAccepted) {
  PipelineConfig cfg = config_from_yaml(R"({"rng_seed": 5, "fuzz": {"mode": "init"}})");
  EXPECT_EQ(cfg.rng_seed, 5u);
  EXPECT_EQ(cfg.mode, CampaignMode::Init);
}

TEST(Config, InvalidDocuments) {
  EXPECT_EQ(code_of("- a\n- b\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("slicing: {dt_mlt_ms: 0}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("slicing: {dt_stw_ms: -1}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("fuzz: {fault_rate: 1.5}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("fuzz: {budget_ms: -1}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("fuzz: {mode: chaos}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("fuzz: {budget_ms: lots}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("classifier: {kind: oracle}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("target: {kind: grpc}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("logs: [{path: a.log, format: csv}]"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("target: {headers: [a, b]}"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of("{unclosed"), ErrorCode::InvalidConfig);
}

TEST(Config, LoadResolvesAgainstFileDirectory) {
  fs::path dir = scratch("cfg");
  std::ofstream(dir / "restlog.yaml") << "spec: spec.json\nwork_dir: out\n";
  PipelineConfig cfg = load_config(dir / "restlog.yaml");
  EXPECT_EQ(cfg.spec_path, (dir / "spec.json").string());
  EXPECT_EQ(cfg.work_dir, dir / "out");
  try {
    load_config(dir / "missing.yaml");
    FAIL() << "expected IoError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Config, LogInputSyntax) {
  auto a = parse_log_input("json:/tmp/x.log");
  EXPECT_EQ(a.format, LogFormat::Json);
  EXPECT_EQ(a.path, fs::path("/tmp/x.log"));
  auto b = parse_log_input("nginx:access.log");
  EXPECT_EQ(b.format, LogFormat::Nginx);
  EXPECT_EQ(b.path, fs::path("access.log"));
  auto c = parse_log_input("access.log");
  EXPECT_EQ(c.format, LogFormat::Nginx);
  EXPECT_EQ(c.path, fs::path("access.log"));
  // Unknown prefix is part of the path.
  auto d = parse_log_input("c:/logs/a.log");
  EXPECT_EQ(d.path, fs::path("c:/logs/a.log"));
}

TEST(Config, CampaignModeNames) {
  for (auto m : {CampaignMode::Init, CampaignMode::Enh, CampaignMode::Fuzz}) {
    EXPECT_EQ(parse_campaign_mode(to_string(m)), m);
  }
  EXPECT_FALSE(parse_campaign_mode("FUZZ"));
  EXPECT_FALSE(parse_campaign_mode(""));
}

TEST(Pipeline, SpecLoading) {
  PipelineConfig cfg;
  EXPECT_THROW(load_service_spec(cfg), Error);
  cfg.spec_path = std::string(kBuiltinGitliteSpec);
  EXPECT_EQ(load_service_spec(cfg).operations.size(), 9u);
}

TEST(Pipeline, ApprovalEndToEnd) {
  PipelineConfig cfg = gitlite_config();
  cfg.report_dir = scratch("approval") / "report";
  ServiceSpec spec = load_service_spec(cfg);
  IngestStats ingest;
  auto records = approval_records(0, &ingest);
  ASSERT_FALSE(records.empty());
  EXPECT_EQ(ingest.malformed, 0u);

  CampaignRun run = run_pipeline(spec, records, cfg);
  EXPECT_FALSE(run.sliced.slices.slices.empty());
  EXPECT_GE(run.enhanced.seeds.size(), run.sliced.slices.slices.size());
  EXPECT_GT(run.campaign.stats.executed_requests, 0u);
  EXPECT_LE(run.campaign.stats.elapsed_ms, cfg.fuzz.budget_ms + 1000);
  // The entries carry the users the slicer saw.
  for (const auto& e : run.sliced.data.entries) EXPECT_FALSE(e.user.empty());

  for (const char* f : {"coverage.json", "bugs.json", "stats.json"}) {
    EXPECT_TRUE(fs::exists(cfg.report_dir / f)) << f;
  }
  std::ifstream in(cfg.report_dir / "stats.json");
  auto stats = nlohmann::json::parse(in);
  EXPECT_EQ(stats["mode"], "fuzz");
  EXPECT_EQ(stats["total_operations"], 9);
  EXPECT_EQ(stats["ingest"]["entries"], run.sliced.stats.entries);
  EXPECT_TRUE(stats["ingest"].contains("dropped_non_2xx"));
}

TEST(Pipeline, ModesRunTheRightSequences) {
  PipelineConfig cfg = gitlite_config();
  ServiceSpec spec = load_service_spec(cfg);
  ResourceModel model = stage_analyze(spec, cfg);
  auto sliced = stage_slice_records(approval_records(1), spec, model, cfg);
  auto enhanced = stage_enhance(spec, model, sliced.data.corpus, sliced.slices, cfg);

  cfg.mode = CampaignMode::Init;
  auto init = stage_fuzz(spec, model, sliced.data.corpus, sliced.slices, enhanced.seeds, cfg);
  EXPECT_EQ(init.stats.executed_sequences, sliced.slices.slices.size());

  cfg.mode = CampaignMode::Enh;
  auto enh = stage_fuzz(spec, model, sliced.data.corpus, sliced.slices, enhanced.seeds, cfg);
  EXPECT_EQ(enh.stats.executed_sequences, enhanced.seeds.size());
  EXPECT_GE(enh.reporter->covered().size(), init.reporter->covered().size());

  cfg.mode = CampaignMode::Fuzz;
  auto fuzz = stage_fuzz(spec, model, sliced.data.corpus, sliced.slices, enhanced.seeds, cfg);
  EXPECT_GT(fuzz.stats.executed_sequences, enh.stats.executed_sequences);
  EXPECT_GE(fuzz.reporter->covered().size(), enh.reporter->covered().size());

  auto j = campaign_stats_json(fuzz, cfg);
  EXPECT_EQ(j["mode"], "fuzz");
  EXPECT_FALSE(j.contains("ingest"));
}

TEST(Pipeline, HttpTargetNeedsBaseUrl) {
  PipelineConfig cfg = gitlite_config();
  cfg.target.kind = "http";
  ServiceSpec spec = load_service_spec(cfg);
  ResourceModel model = stage_analyze(spec, cfg);
  try {
    stage_fuzz(spec, model, {}, {}, {}, cfg);
    FAIL() << "expected InvalidConfig";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(Pipeline, StageSliceReadsLogFiles) {
  fs::path dir = scratch("logs");
  Rng rng(4);
  {
    std::ofstream out(dir / "a.log");
    for (const auto& l : gitlite::generate_hrlogs(gitlite::approval_scenario(), LogFormat::Nginx, rng)) {
      out << l << '\n';
    }
    out << "garbage line\n";
  }
  PipelineConfig cfg = gitlite_config();
  cfg.logs = {parse_log_input("nginx:" + (dir / "a.log").string())};
  ServiceSpec spec = load_service_spec(cfg);
  ResourceModel model = stage_analyze(spec, cfg);
  auto r = stage_slice(spec, model, cfg);
  EXPECT_EQ(r.stats.malformed, 1u);
  EXPECT_EQ(r.stats.entries, r.data.entries.size());
  EXPECT_FALSE(r.slices.slices.empty());
}

TEST(Jsonl, RoundTripAndErrors) {
  fs::path dir = scratch("jsonl");
  std::vector<nlohmann::json> rows = {{{"a", 1}}, nlohmann::json::array({1, 2}), "x"};
  write_jsonl(dir / "sub" / "rows.jsonl", rows);
  EXPECT_EQ(read_jsonl(dir / "sub" / "rows.jsonl"), rows);

  std::ofstream(dir / "blank.jsonl") << "\n{\"a\":1}\n   \n";
  EXPECT_EQ(read_jsonl(dir / "blank.jsonl").size(), 1u);

  std::ofstream(dir / "bad.jsonl") << "{\"a\":1}\n{oops\n";
  try {
    read_jsonl(dir / "bad.jsonl");
    FAIL() << "expected MalformedDocument";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedDocument);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  EXPECT_THROW(read_jsonl(dir / "none.jsonl"), Error);
}
