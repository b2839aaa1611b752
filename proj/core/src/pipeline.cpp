#include "restlog/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "restlog/error.hpp"
#include "restlog/serialization.hpp"
#include "restlog/testbed.hpp"

namespace restlog {

using nlohmann::json;

std::string_view to_string(CampaignMode m) {
  switch (m) {
    case CampaignMode::Init: return "init";
    case CampaignMode::Enh: return "enh";
    case CampaignMode::Fuzz: return "fuzz";
  }
  return "fuzz";
}

std::optional<CampaignMode> parse_campaign_mode(std::string_view s) {
  if (s == "init") return CampaignMode::Init;
  if (s == "enh") return CampaignMode::Enh;
  if (s == "fuzz") return CampaignMode::Fuzz;
  return std::nullopt;
}

LogInput parse_log_input(std::string_view text) {
  LogInput in;
  auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    if (auto fmt = parse_log_format(text.substr(0, colon))) {
      in.format = *fmt;
      in.path = std::string(text.substr(colon + 1));
      return in;
    }
  }
  in.path = std::string(text);
  return in;
}

namespace {

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, "config: " + what);
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    bad_config(std::string("bad value for \"") + key + "\"");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

void read_map(const YAML::Node& node, std::map<std::string, std::string>& out) {
  if (!node) return;
  if (!node.IsMap()) bad_config("expected a mapping");
  for (const auto& kv : node) out[kv.first.as<std::string>()] = kv.second.as<std::string>();
}

}  // namespace

PipelineConfig config_from_yaml(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    bad_config(e.what());
  }
  PipelineConfig cfg;
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) bad_config("top level must be a mapping");

  try {
    if (root["spec"]) {
      std::string spec = root["spec"].as<std::string>();
      cfg.spec_path = spec == kBuiltinGitliteSpec ? spec : resolve(base_dir, spec).string();
    }
    if (auto logs = root["logs"]) {
      for (const auto& l : logs) {
        LogInput in;
        if (l.IsScalar()) {
          in = parse_log_input(l.as<std::string>());
        } else {
          in.path = l["path"].as<std::string>();
          auto fmt = parse_log_format(l["format"] ? l["format"].as<std::string>() : "nginx");
          if (!fmt) bad_config("unknown log format");
          in.format = *fmt;
        }
        in.path = resolve(base_dir, in.path.string());
        cfg.logs.push_back(std::move(in));
      }
    }
    if (auto fm = root["field_map"]) {
      read(fm, "time", cfg.field_map.time);
      read(fm, "method", cfg.field_map.method);
      read(fm, "path", cfg.field_map.path);
      read(fm, "status", cfg.field_map.status);
      read(fm, "params", cfg.field_map.params);
      read(fm, "user", cfg.field_map.user);
    }
    read(root, "identifier_params", cfg.identifier_params);

    if (auto c = root["classifier"]) {
      read(c, "kind", cfg.classifier.kind);
      read(c, "action_verbs", cfg.classifier.heuristic.action_verbs);
      read_map(c["singular_overrides"], cfg.classifier.heuristic.singular_overrides);
      read(c, "endpoint", cfg.classifier.llm.endpoint);
      read(c, "model", cfg.classifier.llm.model);
      read(c, "api_key_env", cfg.classifier.llm.api_key_env);
      read(c, "timeout_ms", cfg.classifier.llm.timeout_ms);
      read(c, "max_attempts", cfg.classifier.llm.max_attempts);
    }
    if (cfg.classifier.kind != "heuristic" && cfg.classifier.kind != "llm") {
      bad_config("classifier.kind must be heuristic or llm");
    }

    if (auto s = root["slicing"]) {
      read(s, "dt_mlt_ms", cfg.dt_mlt_ms);
      read(s, "dt_stw_ms", cfg.dt_stw_ms);
    }
    read(root, "max_synthesis_depth", cfg.max_synthesis_depth);

    if (auto f = root["fuzz"]) {
      read(f, "budget_ms", cfg.fuzz.budget_ms);
      read(f, "fault_rate", cfg.fuzz.fault_rate);
      read(f, "max_seq_len", cfg.fuzz.max_seq_len);
      read(f, "unreachable_threshold", cfg.fuzz.unreachable_threshold);
      read(f, "stats_every", cfg.fuzz.stats_every);
      if (f["mode"]) {
        auto m = parse_campaign_mode(f["mode"].as<std::string>());
        if (!m) bad_config("fuzz.mode must be init, enh or fuzz");
        cfg.mode = *m;
      }
    }

    if (auto t = root["target"]) {
      read(t, "kind", cfg.target.kind);
      read(t, "base_url", cfg.target.http.base_url);
      read(t, "timeout_ms", cfg.target.http.timeout_ms);
      read_map(t["headers"], cfg.target.http.headers);
      read(t, "double_merge_defect", cfg.target.gitlite_double_merge_defect);
      if (auto a = t["auth"]) {
        read(a, "header", cfg.target.auth.header);
        read(a, "token", cfg.target.auth.token);
        read(a, "token_env", cfg.target.auth.token_env);
        read(a, "required", cfg.target.auth.required);
      }
      if (auto x = t["extraction"]) {
        read(x, "keys", cfg.target.extraction.keys);
        if (auto per = x["per_resource"]) {
          for (const auto& kv : per) {
            cfg.target.extraction.per_resource[kv.first.as<std::string>()] =
                kv.second.as<std::vector<std::string>>();
          }
        }
      }
    }
    if (cfg.target.kind != "http" && cfg.target.kind != "gitlite") {
      bad_config("target.kind must be http or gitlite");
    }

    if (root["work_dir"]) cfg.work_dir = resolve(base_dir, root["work_dir"].as<std::string>());
    if (root["report_dir"]) cfg.report_dir = resolve(base_dir, root["report_dir"].as<std::string>());
    read(root, "rng_seed", cfg.rng_seed);
  } catch (const YAML::Exception& e) {
    bad_config(e.what());
  }

  if (cfg.dt_mlt_ms <= 0 || cfg.dt_stw_ms <= 0) bad_config("slicing thresholds must be positive");
  if (cfg.fuzz.fault_rate < 0 || cfg.fuzz.fault_rate > 1) bad_config("fault_rate outside [0, 1]");
  if (cfg.fuzz.budget_ms < 0) bad_config("negative budget");
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_yaml(buf.str(), path.parent_path());
}

ServiceSpec load_service_spec(const PipelineConfig& cfg) {
  if (cfg.spec_path.empty()) throw Error(ErrorCode::InvalidConfig, "no spec given");
  if (cfg.spec_path == kBuiltinGitliteSpec) {
    return parse_spec(gitlite::openapi_document(), DocumentFormat::Json);
  }
  return load_spec_file(cfg.spec_path);
}

std::unique_ptr<Classifier> make_classifier(const ClassifierConfig& cfg) {
  if (cfg.kind == "llm") {
    return std::make_unique<LlmClassifier>(http_chat_completion(cfg.llm), cfg.llm.max_attempts);
  }
  return std::make_unique<HeuristicClassifier>(cfg.heuristic);
}

ResourceModel stage_analyze(const ServiceSpec& spec, const PipelineConfig& cfg) {
  auto classifier = make_classifier(cfg.classifier);
  return analyze_resources(spec, *classifier);
}

SliceStageResult stage_slice_records(const std::vector<RawRequestRecord>& records,
                                     const ServiceSpec& spec, const ResourceModel& model,
                                     const PipelineConfig& cfg, IngestStats stats) {
  SliceStageResult out;
  out.data = preprocess(records, spec, model.deps, &stats);
  auto queues = split_user_queues(out.data.entries, cfg.identifier_params);
  std::map<std::int64_t, std::string> users;
  for (const auto& [user, q] : queues) {
    for (const auto& e : q.entries) users[e.entry_id] = user;
  }
  for (auto& e : out.data.entries) e.user = users[e.entry_id];
  out.slices = slice_queues(queues, cfg.dt_mlt_ms, cfg.dt_stw_ms);
  out.stats = std::move(stats);
  return out;
}

SliceStageResult stage_slice(const ServiceSpec& spec, const ResourceModel& model,
                             const PipelineConfig& cfg) {
  IngestStats stats;
  std::vector<RawRequestRecord> records;
  for (const auto& in : cfg.logs) {
    auto part = parse_log_file(in.path, in.format, cfg.field_map, stats);
    records.insert(records.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  return stage_slice_records(records, spec, model, cfg, std::move(stats));
}

EnhanceStageResult stage_enhance(const ServiceSpec& spec, const ResourceModel& model,
                                 const ParameterCorpus& corpus, const SliceSet& slices,
                                 const PipelineConfig& cfg) {
  CompletionContext ctx{spec, model.tree, model.deps, corpus, cfg.max_synthesis_depth};
  Rng rng(cfg.rng_seed);
  EnhanceStageResult out;
  out.augmented = augment(slices, ctx, rng);
  out.seeds = complete_all(out.augmented, ctx, rng, &out.skipped);
  return out;
}

CampaignResult stage_fuzz(const ServiceSpec& spec, const ResourceModel& model,
                          const ParameterCorpus& corpus, const SliceSet& slices,
                          const std::vector<Seed>& seeds, const PipelineConfig& cfg,
                          std::ostream* log) {
  std::unique_ptr<ExecutionTarget> target;
  std::unique_ptr<Clock> clock;
  if (cfg.target.kind == "gitlite") {
    gitlite::Options options;
    options.double_merge_defect = cfg.target.gitlite_double_merge_defect;
    target = std::make_unique<InProcessTarget>(gitlite::handler_factory(options), "gitlite");
    clock = std::make_unique<SimulatedClock>();
  } else {
    if (cfg.target.http.base_url.empty()) {
      throw Error(ErrorCode::InvalidConfig, "target.base_url is required for http targets");
    }
    target = make_http_target(cfg.target.http);
    clock = std::make_unique<WallClock>();
  }

  Executor exec(spec, model.tree, *target, *clock, cfg.target.auth, cfg.target.extraction);
  std::vector<OperationId> ops;
  for (const auto& op : list_operations(spec)) ops.push_back(op.id);
  CampaignResult out;
  out.reporter = std::make_unique<Reporter>(spec.title, ops);

  CompletionContext ctx{spec, model.tree, model.deps, corpus, cfg.max_synthesis_depth};
  FuzzConfig fc = cfg.fuzz;
  fc.rng_seed = cfg.rng_seed;
  FuzzEngine engine(ctx, exec, *out.reporter, fc);

  switch (cfg.mode) {
    case CampaignMode::Init: {
      std::vector<Seed> raw;
      for (const auto& s : slices.slices) raw.push_back(raw_seed(s));
      out.stats = engine.run_once(raw, log);
      out.final_pool = std::move(raw);
      break;
    }
    case CampaignMode::Enh:
      out.stats = engine.run_once(seeds, log);
      out.final_pool = seeds;
      break;
    case CampaignMode::Fuzz: {
      SeedPool pool(seeds);
      out.stats = engine.run(pool, log);
      out.final_pool = pool.seeds();
      break;
    }
  }
  return out;
}

json campaign_stats_json(const CampaignResult& r, const PipelineConfig& cfg,
                         const IngestStats* ingest) {
  json j = r.stats.to_json();
  j["mode"] = std::string(to_string(cfg.mode));
  j["rng_seed"] = cfg.rng_seed;
  j["budget_ms"] = cfg.fuzz.budget_ms;
  j["covered_count"] = r.reporter->covered().size();
  j["total_operations"] = r.reporter->total_operations();
  j["distinct_bugs"] = r.reporter->bugs().size();
  if (ingest) j["ingest"] = to_json(*ingest);
  return j;
}

CampaignRun run_pipeline(const ServiceSpec& spec, const std::vector<RawRequestRecord>& records,
                         const PipelineConfig& cfg, std::ostream* log) {
  CampaignRun run;
  run.model = stage_analyze(spec, cfg);
  run.sliced = stage_slice_records(records, spec, run.model, cfg);
  run.enhanced = stage_enhance(spec, run.model, run.sliced.data.corpus, run.sliced.slices, cfg);
  run.campaign = stage_fuzz(spec, run.model, run.sliced.data.corpus, run.sliced.slices,
                            run.enhanced.seeds, cfg, log);
  if (!cfg.report_dir.empty()) {
    run.campaign.reporter->export_to(cfg.report_dir, campaign_stats_json(run.campaign, cfg, &run.sliced.stats));
  }
  return run;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& row : rows) out << row.dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::MalformedDocument,
                  path.string() + ":" + std::to_string(n) + ": not a JSON document");
    }
    rows.push_back(std::move(j));
  }
  return rows;
}

}  // namespace restlog
