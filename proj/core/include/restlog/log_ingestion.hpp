#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "restlog/resource_analysis.hpp"
#include "restlog/spec_model.hpp"
#include "restlog/timeutil.hpp"

namespace restlog {

struct RawRequestRecord {
  EpochMs timestamp = 0;
  Method method = Method::Get;
  std::string uri;  // path plus optional "?query"
  int status = 0;
  std::map<std::string, std::string> body_params;
  std::optional<std::string> user_hint;
  std::size_t source_line = 0;
};

struct ResourceInstance {
  std::string resource;
  std::string id_value;

  friend auto operator<=>(const ResourceInstance&, const ResourceInstance&) = default;
  friend bool operator==(const ResourceInstance&, const ResourceInstance&) = default;
};

std::string to_string(const ResourceInstance& inst);  // "/projects#15"

struct LogEntry {
  std::int64_t entry_id = 0;
  EpochMs t = 0;
  OperationId op;
  std::map<std::string, std::string> params;
  std::set<ResourceInstance> instances;
  std::map<std::string, std::optional<ResourceInstance>> phi;
  std::string user;  // empty until assigned by split_user_queues (or a user hint)
  std::size_t source_line = 0;
  // Set on synthesized creation entries: the instance this entry brings into existence.
  std::optional<ResourceInstance> creates;

  // Rebuilds `instances` from `phi`.
  void refresh_instances();
};

struct ParameterCorpus {
  std::map<OperationId, std::set<std::set<std::string>>> combos;
  // Values in observation order; duplicates kept (multiset).
  std::map<std::pair<OperationId, std::string>, std::vector<std::string>> values;

  const std::vector<std::string>* values_for(const OperationId& op, const std::string& p) const;
};

struct UserQueue {
  std::string user;
  std::vector<LogEntry> entries;
};

struct FieldMap {
  std::string time = "time";
  std::string method = "method";
  std::string path = "path";
  std::string status = "status";
  std::string params = "params";
  std::string user = "user_id";
};

enum class LogFormat { Nginx, Json };

std::optional<LogFormat> parse_log_format(std::string_view name);

// Throws LineError(MalformedLine) with `line_no` attached.
RawRequestRecord parse_nginx_line(std::string_view line, std::size_t line_no = 0);
// Throws LineError(MalformedLine) or LineError(MissingField). The time, method,
// path and status keys are mandatory; params and user may be absent.
RawRequestRecord parse_json_line(std::string_view line, const FieldMap& field_map = {},
                                 std::size_t line_no = 0);

// Inverse of parse_nginx_line for the fields the parser keeps.
std::string format_nginx_line(const RawRequestRecord& r, std::string_view remote_addr = "127.0.0.1");

struct IngestStats {
  std::size_t lines = 0;
  std::size_t malformed = 0;
  std::size_t unmatched = 0;
  std::size_t non_2xx = 0;
  std::size_t entries = 0;
  std::vector<std::string> warnings;  // first few malformed-line messages
};

// Reads every non-blank line; malformed lines are skipped and counted.
std::vector<RawRequestRecord> parse_log_stream(std::istream& in, LogFormat format,
                                               const FieldMap& field_map, IngestStats& stats);
std::vector<RawRequestRecord> parse_log_file(const std::filesystem::path& path, LogFormat format,
                                             const FieldMap& field_map, IngestStats& stats);

struct Preprocessed {
  std::vector<LogEntry> entries;
  ParameterCorpus corpus;
};

// Entry ids are assigned 1, 2, ... in input order of the surviving records.
Preprocessed preprocess(const std::vector<RawRequestRecord>& records, const ServiceSpec& spec,
                        const DependencyMap& deps, IngestStats* stats = nullptr);

// `identifier_params` are consulted (in order) when an entry carries no user.
std::map<std::string, UserQueue> split_user_queues(
    const std::vector<LogEntry>& entries, const std::vector<std::string>& identifier_params = {});

}  // namespace restlog
