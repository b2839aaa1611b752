#include "restlog/reporting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "restlog/error.hpp"
#include "restlog/serialization.hpp"

namespace restlog {

using nlohmann::json;

namespace {

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

// 8-4-4-4-12 hex digits starting at `pos`.
bool uuid_at(const std::string& s, std::size_t pos) {
  static constexpr int kGroups[] = {8, 4, 4, 4, 12};
  std::size_t p = pos;
  for (int g = 0; g < 5; ++g) {
    for (int k = 0; k < kGroups[g]; ++k, ++p) {
      if (p >= s.size() || !is_hex(s[p])) return false;
    }
    if (g < 4) {
      if (p >= s.size() || s[p] != '-') return false;
      ++p;
    }
  }
  return p == s.size() || !std::isalnum(static_cast<unsigned char>(s[p]));
}

bool word_start(const std::string& s, std::size_t i) {
  return i == 0 || !std::isalnum(static_cast<unsigned char>(s[i - 1]));
}

}  // namespace

std::string normalize_message(const std::string& body) {
  std::string text;
  json doc = json::parse(body, nullptr, false);
  if (!doc.is_discarded() && doc.is_object()) {
    for (const char* key : {"message", "error"}) {
      auto it = doc.find(key);
      if (it == doc.end()) continue;
      text = it->is_string() ? it->get<std::string>() : it->dump();
      break;
    }
    if (text.empty()) text = body.substr(0, 200);
  } else {
    text = body.substr(0, 200);
  }
  for (auto& ch : text) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));

  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (word_start(text, i) && uuid_at(text, i)) {
      out += "<uuid>";
      i += 36;
      continue;
    }
    if (word_start(text, i) && text[i] == '0' && i + 2 < text.size() && text[i + 1] == 'x' &&
        is_hex(text[i + 2])) {
      i += 2;
      while (i < text.size() && is_hex(text[i])) ++i;
      out += "<hex>";
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(text[i]))) {
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      out += "<num>";
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (!out.empty()) out += ' ';
      continue;
    }
    out += text[i++];
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

Reporter::Reporter(std::string service, std::vector<OperationId> operations)
    : service_(std::move(service)), operations_(std::move(operations)) {}

std::vector<ReportEvent> Reporter::record_response(const ResponseRecord& r, std::int64_t clock_ms,
                                                   const Witness* witness) {
  std::vector<ReportEvent> events;
  ++status_counts_[r.status];
  if (r.ok()) {
    if (covered_.insert(r.op).second) {
      first_cover_[r.op] = clock_ms;
      events.push_back({EventKind::NewCoverage, r.op, r.status, clock_ms, {}});
    }
  } else if (r.status >= 500 && r.status <= 599) {
    BugKey key{r.op, r.status, normalize_message(r.body)};
    auto [it, fresh] = bugs_.try_emplace(key);
    ++it->second.count;
    if (fresh) {
      it->second.key = key;
      it->second.first_seen_ms = clock_ms;
      if (witness) it->second.witness = *witness;
      events.push_back({EventKind::NewBug, r.op, r.status, clock_ms, key.message});
    }
  }
  return events;
}

json Reporter::coverage_json() const {
  json timeline = json::array();
  std::vector<std::pair<std::int64_t, OperationId>> order;
  for (const auto& [op, t] : first_cover_) order.emplace_back(t, op);
  std::sort(order.begin(), order.end());
  for (const auto& [t, op] : order) timeline.push_back({{"op", op}, {"time_ms", t}});
  json uncovered = json::array();
  for (const auto& op : operations_) {
    if (!covered_.count(op)) uncovered.push_back(op);
  }
  json statuses = json::object();
  for (const auto& [status, n] : status_counts_) statuses[std::to_string(status)] = n;
  return {{"service", service_},
          {"covered", covered_},
          {"covered_count", covered_.size()},
          {"total", operations_.size()},
          {"uncovered", uncovered},
          {"timeline", timeline},
          {"status_counts", statuses}};
}

json Reporter::bugs_json() const {
  json bugs = json::array();
  for (const auto& [key, b] : bugs_) {
    json responses = json::array();
    for (const auto& r : b.witness.responses) responses.push_back(to_json(r));
    bugs.push_back({{"op", key.op},
                    {"status", key.status},
                    {"message", key.message},
                    {"count", b.count},
                    {"first_seen_ms", b.first_seen_ms},
                    {"witness", {{"seed", to_json(b.witness.seed)}, {"responses", responses}}}});
  }
  return {{"service", service_}, {"bug_count", bugs_.size()}, {"bugs", bugs}};
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void Reporter::export_to(const std::filesystem::path& dir, const json& stats) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_json_file(dir / "coverage.json", coverage_json());
  write_json_file(dir / "bugs.json", bugs_json());
  write_json_file(dir / "stats.json", stats);
}

std::string Reporter::summary() const {
  std::ostringstream out;
  out << "service " << service_ << ": covered " << covered_.size() << "/" << operations_.size()
      << " operations, " << bugs_.size() << " distinct 5XX bug(s)\n";
  for (const auto& op : operations_) {
    out << "  " << (covered_.count(op) ? "[x] " : "[ ] ") << op << "\n";
  }
  for (const auto& [key, b] : bugs_) {
    out << "  bug " << key.status << " " << key.op << " \"" << key.message << "\" x" << b.count
        << "\n";
  }
  return out.str();
}

}  // namespace restlog
