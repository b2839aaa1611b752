#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "restlog/error.hpp"
#include "restlog/pipeline.hpp"
#include "restlog/scenario.hpp"
#include "restlog/serialization.hpp"
#include "restlog/testbed.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace restlog;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitTarget = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::TargetUnreachable:
    case ErrorCode::TransportError:
    case ErrorCode::AuthMissing:
    case ErrorCode::ClassifierUnavailable:
      return kExitTarget;
    default:
      return kExitInput;
  }
}

// Values given on the command line; unset ones leave the config untouched.
struct Overrides {
  std::string config;
  std::string spec;
  std::vector<std::string> logs;
  std::optional<double> dt_mlt_s;
  std::optional<double> dt_stw_s;
  std::string work_dir;
  std::string report_dir;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<double> budget_s;
  std::string target;
  std::string base_url;
  std::vector<std::string> auth_headers;
  std::optional<int> timeout_ms;
  std::optional<std::size_t> stats_every;
  std::string dump_entries;
  std::string dump_slices;
  std::string dump_seeds;
};

PipelineConfig build_config(const Overrides& o) {
  PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (!o.spec.empty()) cfg.spec_path = o.spec;
  if (!o.logs.empty()) {
    cfg.logs.clear();
    for (const auto& l : o.logs) cfg.logs.push_back(parse_log_input(l));
  }
  if (o.dt_mlt_s) cfg.dt_mlt_ms = static_cast<std::int64_t>(*o.dt_mlt_s * 1000);
  if (o.dt_stw_s) cfg.dt_stw_ms = static_cast<std::int64_t>(*o.dt_stw_s * 1000);
  if (!o.work_dir.empty()) cfg.work_dir = o.work_dir;
  if (!o.report_dir.empty()) cfg.report_dir = o.report_dir;
  if (o.seed) cfg.rng_seed = *o.seed;
  if (!o.mode.empty()) cfg.mode = *parse_campaign_mode(o.mode);
  if (o.budget_s) cfg.fuzz.budget_ms = static_cast<std::int64_t>(*o.budget_s * 1000);
  if (!o.target.empty()) cfg.target.kind = o.target;
  if (!o.base_url.empty()) cfg.target.http.base_url = o.base_url;
  for (const auto& h : o.auth_headers) {
    auto colon = h.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "--auth-header expects \"Name: value\"");
    }
    std::string value = h.substr(colon + 1);
    value.erase(0, value.find_first_not_of(' '));
    cfg.target.auth.header = h.substr(0, colon);
    cfg.target.auth.token = value;
  }
  if (o.timeout_ms) cfg.target.http.timeout_ms = *o.timeout_ms;
  if (o.stats_every) cfg.fuzz.stats_every = *o.stats_every;
  if (cfg.dt_mlt_ms <= 0 || cfg.dt_stw_ms <= 0) {
    throw Error(ErrorCode::InvalidConfig, "slicing thresholds must be positive");
  }
  return cfg;
}

fs::path artifact(const PipelineConfig& cfg, const char* name) { return cfg.work_dir / name; }

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedDocument, path.string() + " is not JSON");
  return j;
}

// Stage runners: each writes its artifacts; downstream stages reuse existing
// artifacts from the work dir and rebuild the missing ones.

ResourceModel run_analyze(const ServiceSpec& spec, const PipelineConfig& cfg) {
  ResourceModel model = stage_analyze(spec, cfg);
  fs::create_directories(cfg.work_dir);
  write_json_file(artifact(cfg, artifacts::kResources), resources_to_json(model.tree));
  write_json_file(artifact(cfg, artifacts::kDeps), deps_to_json(model.deps));
  return model;
}

ResourceModel load_or_analyze(const ServiceSpec& spec, const PipelineConfig& cfg) {
  auto res = artifact(cfg, artifacts::kResources);
  auto deps = artifact(cfg, artifacts::kDeps);
  if (fs::exists(res) && fs::exists(deps)) {
    return {resources_from_json(read_json_file(res)), deps_from_json(read_json_file(deps))};
  }
  return run_analyze(spec, cfg);
}

struct SliceArtifacts {
  ParameterCorpus corpus;
  SliceSet slices;
};

SliceArtifacts run_slice(const ServiceSpec& spec, const ResourceModel& model,
                         const PipelineConfig& cfg, const Overrides& o) {
  SliceStageResult r = stage_slice(spec, model, cfg);
  std::vector<json> entries;
  for (const auto& e : r.data.entries) entries.push_back(to_json(e));
  std::vector<json> slices;
  for (const auto& s : r.slices.slices) slices.push_back(to_json(s));
  write_jsonl(artifact(cfg, artifacts::kEntries), entries);
  write_jsonl(artifact(cfg, artifacts::kSlices), slices);
  write_json_file(artifact(cfg, artifacts::kCorpus), to_json(r.data.corpus));
  json stats = to_json(r.stats);
  stats["warnings"] = r.stats.warnings;
  stats["slices"] = r.slices.slices.size();
  write_json_file(artifact(cfg, artifacts::kIngestStats), stats);
  if (!o.dump_entries.empty()) write_jsonl(o.dump_entries, entries);
  if (!o.dump_slices.empty()) write_jsonl(o.dump_slices, slices);
  for (const auto& w : r.stats.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "ingested " << r.stats.lines << " lines: " << r.stats.entries << " entries, "
            << r.stats.malformed << " malformed, " << r.stats.unmatched << " unmatched, "
            << r.stats.non_2xx << " non-2XX; " << r.slices.slices.size() << " slices\n";
  return {std::move(r.data.corpus), std::move(r.slices)};
}

SliceArtifacts load_or_slice(const ServiceSpec& spec, const ResourceModel& model,
                             const PipelineConfig& cfg, const Overrides& o) {
  auto entries_path = artifact(cfg, artifacts::kEntries);
  auto slices_path = artifact(cfg, artifacts::kSlices);
  auto corpus_path = artifact(cfg, artifacts::kCorpus);
  if (!fs::exists(entries_path) || !fs::exists(slices_path) || !fs::exists(corpus_path)) {
    return run_slice(spec, model, cfg, o);
  }
  std::map<std::int64_t, LogEntry> by_id;
  for (const auto& j : read_jsonl(entries_path)) {
    LogEntry e = entry_from_json(j);
    by_id[e.entry_id] = std::move(e);
  }
  SliceArtifacts out;
  out.corpus = corpus_from_json(read_json_file(corpus_path));
  for (const auto& j : read_jsonl(slices_path)) out.slices.slices.push_back(slice_from_json(j, by_id));
  return out;
}

std::vector<Seed> run_enhance(const ServiceSpec& spec, const ResourceModel& model,
                              const SliceArtifacts& sa, const PipelineConfig& cfg,
                              const Overrides& o) {
  EnhanceStageResult r = stage_enhance(spec, model, sa.corpus, sa.slices, cfg);
  std::vector<json> rows;
  for (const auto& s : r.seeds) rows.push_back(to_json(s));
  write_jsonl(artifact(cfg, artifacts::kSeeds), rows);
  if (!o.dump_seeds.empty()) write_jsonl(o.dump_seeds, rows);
  std::size_t prepended = 0;
  for (const auto& s : r.seeds) prepended += s.prepended;
  std::cout << r.seeds.size() << " seeds from " << r.augmented.slices.size() << " slices ("
            << r.augmented.slices.size() - sa.slices.slices.size() << " augmented), " << prepended
            << " prepended entries, " << r.skipped << " skipped\n";
  return std::move(r.seeds);
}

std::vector<Seed> load_or_enhance(const ServiceSpec& spec, const ResourceModel& model,
                                  const SliceArtifacts& sa, const PipelineConfig& cfg,
                                  const Overrides& o) {
  auto path = artifact(cfg, artifacts::kSeeds);
  if (!fs::exists(path)) return run_enhance(spec, model, sa, cfg, o);
  std::vector<Seed> seeds;
  for (const auto& j : read_jsonl(path)) seeds.push_back(seed_from_json(j));
  return seeds;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Pipeline config file (YAML or JSON)");
  cmd->add_option("--spec", o.spec, "OpenAPI/Swagger file, or builtin:gitlite");
  cmd->add_option("--work-dir", o.work_dir, "Directory for stage artifacts");
  cmd->add_option("--seed", o.seed, "RNG seed");
}

void add_slice_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--log", o.logs, "Log input as FORMAT:PATH (nginx or json); repeatable");
  cmd->add_option("--dt-mlt", o.dt_mlt_s, "MLTS locality threshold in seconds");
  cmd->add_option("--dt-stw", o.dt_stw_s, "STWS window length in seconds");
}

void add_fuzz_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--mode", o.mode, "init | enh | fuzz")
      ->check(CLI::IsMember({"init", "enh", "fuzz"}));
  cmd->add_option("--budget", o.budget_s, "Campaign budget in seconds");
  cmd->add_option("--target", o.target, "http | gitlite")->check(CLI::IsMember({"http", "gitlite"}));
  cmd->add_option("--base-url", o.base_url, "Base URL of the service under test");
  cmd->add_option("--auth-header", o.auth_headers, "Static auth header, \"Name: value\"");
  cmd->add_option("--timeout-ms", o.timeout_ms, "Per-request timeout");
  cmd->add_option("--report-dir", o.report_dir, "Where coverage/bugs/stats JSON go");
  cmd->add_option("--stats-every", o.stats_every, "Print a stats line every N sequences");
}

void print_report(const fs::path& dir) {
  json cov = read_json_file(dir / "coverage.json");
  json bugs = read_json_file(dir / "bugs.json");
  std::cout << "service " << cov.value("service", "") << ": covered " << cov.value("covered_count", 0)
            << "/" << cov.value("total", 0) << " operations\n";
  for (const auto& op : cov["covered"]) std::cout << "  [x] " << op.get<std::string>() << "\n";
  for (const auto& op : cov["uncovered"]) std::cout << "  [ ] " << op.get<std::string>() << "\n";
  const json& list = bugs["bugs"];
  std::cout << list.size() << " distinct 5XX bug(s)\n";
  for (const auto& b : list) {
    std::cout << "  " << b.value("status", 0) << " " << b.value("op", "") << " \""
              << b.value("message", "") << "\" x" << b.value("count", 0) << "\n";
  }
}

gitlite::LiveServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"restlog: log-driven, business-aware REST API fuzzing"};
  app.require_subcommand(1);
  Overrides o;

  auto* analyze = app.add_subcommand("analyze", "Infer resources and parameter dependencies");
  add_common(analyze, o);

  auto* slice = app.add_subcommand("slice", "Parse request logs and cut them into slices");
  add_common(slice, o);
  add_slice_flags(slice, o);
  slice->add_option("--dump-entries", o.dump_entries, "Also write entries JSONL here");
  slice->add_option("--dump-slices", o.dump_slices, "Also write slices JSONL here");

  auto* enhance = app.add_subcommand("enhance", "Augment slices and complete them into seeds");
  add_common(enhance, o);
  add_slice_flags(enhance, o);
  enhance->add_option("--dump-seeds", o.dump_seeds, "Also write seeds JSONL here");

  auto* fuzz = app.add_subcommand("fuzz", "Run a campaign and write reports");
  add_common(fuzz, o);
  add_slice_flags(fuzz, o);
  add_fuzz_flags(fuzz, o);

  auto* report = app.add_subcommand("report", "Print a report directory");
  add_common(report, o);
  report->add_option("--report-dir", o.report_dir, "Report directory");

  auto* testbed = app.add_subcommand("testbed", "The bundled gitlite service");
  testbed->require_subcommand(1);
  std::string scenario = "approval";
  std::string format = "json";
  std::string out_path;
  std::uint64_t gen_seed = 0;
  auto* gen = testbed->add_subcommand("gen-logs", "Generate request logs from a scenario script");
  gen->add_option("--scenario", scenario, "approval, default or a scenario JSON file");
  gen->add_option("--format", format, "nginx | json")->check(CLI::IsMember({"nginx", "json"}));
  gen->add_option("--seed", gen_seed, "RNG seed for jitter");
  gen->add_option("--out", out_path, "Output file (stdout when absent)");
  auto* export_cmd = testbed->add_subcommand("export", "Write the gitlite OpenAPI document and scripts");
  std::string export_dir = ".";
  export_cmd->add_option("--dir", export_dir, "Output directory");
  auto* serve = testbed->add_subcommand("serve", "Serve gitlite over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  bool no_defect = false;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_flag("--no-defect", no_defect, "Disable the planted double-merge defect");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      gitlite::ScenarioScript script = scenario == "approval" ? gitlite::approval_scenario()
                                       : scenario == "default"  ? gitlite::default_scenario()
                                                                : gitlite::load_scenario_file(scenario);
      Rng rng(gen_seed);
      auto lines = gitlite::generate_hrlogs(script, *parse_log_format(format), rng);
      std::ofstream file;
      if (!out_path.empty()) {
        file.open(out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw Error(ErrorCode::IoError, "cannot write " + out_path);
      }
      std::ostream& out = out_path.empty() ? std::cout : file;
      for (const auto& l : lines) out << l << '\n';
      return 0;
    }
    if (*export_cmd) {
      fs::create_directories(export_dir);
      std::ofstream(fs::path(export_dir) / "openapi.json") << gitlite::openapi_document();
      std::ofstream(fs::path(export_dir) / "approval.scenario.json")
          << gitlite::approval_scenario_document();
      std::ofstream(fs::path(export_dir) / "default.scenario.json")
          << gitlite::default_scenario_document();
      return 0;
    }
    if (*serve) {
      gitlite::Options options;
      options.double_merge_defect = !no_defect;
      gitlite::LiveServer server(options);
      int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "gitlite listening on http://" << host << ":" << bound << std::endl;
      server.run();
      g_server = nullptr;
      return 0;
    }

    PipelineConfig cfg = build_config(o);
    if (*report) {
      print_report(cfg.report_dir);
      return 0;
    }

    ServiceSpec spec = load_service_spec(cfg);
    if (*analyze) {
      ResourceModel model = run_analyze(spec, cfg);
      std::cout << spec.operations.size() << " operations, " << model.tree.resources.size()
                << " resources\n";
      for (const auto& name : model.tree.names()) {
        const Resource* r = model.tree.find(name);
        std::cout << "  " << std::string(2 * model.tree.depth(name), ' ') << name << "  <- "
                  << r->creation_op << "\n";
      }
      return 0;
    }

    ResourceModel model = load_or_analyze(spec, cfg);
    if (*slice) {
      run_slice(spec, model, cfg, o);
      return 0;
    }
    // Flags that change slicing invalidate stored slices.
    bool reslice = !o.logs.empty() || o.dt_mlt_s || o.dt_stw_s;
    SliceArtifacts sa = reslice ? run_slice(spec, model, cfg, o) : load_or_slice(spec, model, cfg, o);
    if (*enhance) {
      run_enhance(spec, model, sa, cfg, o);
      return 0;
    }

    std::vector<Seed> seeds = (reslice || o.seed) ? run_enhance(spec, model, sa, cfg, o)
                                                   : load_or_enhance(spec, model, sa, cfg, o);
    std::ostream* log = cfg.fuzz.stats_every > 0 ? &std::cerr : nullptr;
    CampaignResult result = stage_fuzz(spec, model, sa.corpus, sa.slices, seeds, cfg, log);
    json stats = campaign_stats_json(result, cfg);
    if (auto p = artifact(cfg, artifacts::kIngestStats); fs::exists(p)) {
      json ingest = read_json_file(p);
      ingest.erase("warnings");
      ingest.erase("slices");
      stats["ingest"] = ingest;
    }
    result.reporter->export_to(cfg.report_dir, stats);
    std::cout << result.reporter->summary();
    std::cout << "reports written to " << cfg.report_dir.string() << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "restlog: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "restlog: IoError: " << e.what() << "\n";
    return kExitInput;
  }
}
