#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "restlog/enhancement.hpp"
#include "restlog/executor.hpp"

namespace restlog {

// Bug signature: operation, 5XX status, normalized message.
struct BugKey {
  OperationId op;
  int status = 0;
  std::string message;

  friend auto operator<=>(const BugKey&, const BugKey&) = default;
  friend bool operator==(const BugKey&, const BugKey&) = default;
};

struct Witness {
  Seed seed;
  std::vector<ResponseRecord> responses;
};

struct BugReport {
  BugKey key;
  std::size_t count = 0;
  std::int64_t first_seen_ms = 0;
  Witness witness;
};

enum class EventKind { NewCoverage, NewBug };

struct ReportEvent {
  EventKind kind;
  OperationId op;
  int status = 0;
  std::int64_t time_ms = 0;
  std::string message;  // normalized, bugs only
};

// Pulls "message"/"error" out of a JSON body (else the first 200 bytes),
// lowercases, replaces UUIDs, hex literals and digit runs with placeholders
// and collapses whitespace.
std::string normalize_message(const std::string& body);

class Reporter {
 public:
  Reporter(std::string service, std::vector<OperationId> operations);

  // `witness` is stored the first time a bug key is seen; may be null.
  std::vector<ReportEvent> record_response(const ResponseRecord& r, std::int64_t clock_ms,
                                           const Witness* witness = nullptr);

  const std::set<OperationId>& covered() const { return covered_; }
  const std::map<OperationId, std::int64_t>& first_cover_time() const { return first_cover_; }
  const std::map<BugKey, BugReport>& bugs() const { return bugs_; }
  const std::map<int, std::size_t>& status_counts() const { return status_counts_; }
  std::size_t total_operations() const { return operations_.size(); }
  const std::string& service() const { return service_; }

  nlohmann::json coverage_json() const;
  nlohmann::json bugs_json() const;

  // Writes coverage.json, bugs.json and stats.json (`stats` verbatim).
  // Throws Error(IoError).
  void export_to(const std::filesystem::path& dir, const nlohmann::json& stats) const;

  std::string summary() const;

 private:
  std::string service_;
  std::vector<OperationId> operations_;
  std::set<OperationId> covered_;
  std::map<OperationId, std::int64_t> first_cover_;
  std::map<BugKey, BugReport> bugs_;
  std::map<int, std::size_t> status_counts_;
};

// Writes `doc` with two-space indentation and a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace restlog
