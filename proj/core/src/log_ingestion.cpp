#include "restlog/log_ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <nlohmann/json.hpp>

#include "restlog/error.hpp"

namespace restlog {

using nlohmann::json;

std::string to_string(const ResourceInstance& inst) { return inst.resource + "#" + inst.id_value; }

void LogEntry::refresh_instances() {
  instances.clear();
  for (const auto& [_, inst] : phi) {
    if (inst) instances.insert(*inst);
  }
}

const std::vector<std::string>* ParameterCorpus::values_for(const OperationId& op,
                                                            const std::string& p) const {
  auto it = values.find({op, p});
  return it == values.end() ? nullptr : &it->second;
}

std::optional<LogFormat> parse_log_format(std::string_view name) {
  if (name == "nginx") return LogFormat::Nginx;
  if (name == "json" || name == "jsonl") return LogFormat::Json;
  return std::nullopt;
}

namespace {

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw LineError(ErrorCode::MalformedLine, line_no, why);
}

// Cursor over one nginx line.
struct Scanner {
  std::string_view s;
  std::size_t pos = 0;

  bool at_end() const { return pos >= s.size(); }
  bool eat(char c) {
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  std::optional<std::string_view> token() {
    std::size_t start = pos;
    while (pos < s.size() && s[pos] != ' ') ++pos;
    if (pos == start) return std::nullopt;
    return s.substr(start, pos - start);
  }
  std::optional<std::string_view> until(char c) {
    std::size_t end = s.find(c, pos);
    if (end == std::string_view::npos) return std::nullopt;
    auto out = s.substr(pos, end - pos);
    pos = end + 1;
    return out;
  }
  // Quoted field with backslash escapes; returns the raw contents.
  std::optional<std::string> quoted() {
    if (!eat('"')) return std::nullopt;
    std::string out;
    while (pos < s.size()) {
      char c = s[pos++];
      if (c == '\\' && pos < s.size()) {
        out.push_back(s[pos++]);
      } else if (c == '"') {
        return out;
      } else {
        out.push_back(c);
      }
    }
    return std::nullopt;
  }
};

std::optional<int> parse_status(std::string_view text) {
  int v = 0;
  auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) return std::nullopt;
  if (v < 100 || v > 599) return std::nullopt;
  return v;
}

}  // namespace

RawRequestRecord parse_nginx_line(std::string_view line, std::size_t line_no) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  Scanner sc{line};
  auto addr = sc.token();
  if (!addr || !sc.eat(' ')) malformed(line_no, "missing remote address");
  auto ident = sc.token();
  if (!ident || !sc.eat(' ')) malformed(line_no, "missing ident field");
  auto user = sc.token();
  if (!user || !sc.eat(' ')) malformed(line_no, "missing remote user");
  if (!sc.eat('[')) malformed(line_no, "missing time field");
  auto time_text = sc.until(']');
  if (!time_text) malformed(line_no, "unterminated time field");
  auto t = parse_nginx_time(*time_text);
  if (!t) malformed(line_no, "bad time " + std::string(*time_text));
  if (!sc.eat(' ')) malformed(line_no, "missing request");
  auto request = sc.quoted();
  if (!request || !sc.eat(' ')) malformed(line_no, "missing request");
  auto status_text = sc.token();
  if (!status_text) malformed(line_no, "missing status");
  auto status = parse_status(*status_text);
  if (!status) malformed(line_no, "bad status " + std::string(*status_text));
  if (!sc.at_end()) {
    if (!sc.eat(' ') || !sc.token()) malformed(line_no, "missing body size");
    if (!sc.at_end()) {
      if (!sc.eat(' ') || !sc.quoted()) malformed(line_no, "bad referer");
      if (!sc.eat(' ') || !sc.quoted()) malformed(line_no, "bad user agent");
    }
  }

  // "METHOD uri PROTOCOL"
  auto sp1 = request->find(' ');
  auto sp2 = request->rfind(' ');
  if (sp1 == std::string::npos || sp2 == sp1) malformed(line_no, "bad request line");
  auto method = parse_method(std::string_view(*request).substr(0, sp1));
  if (!method) malformed(line_no, "unknown method");
  std::string uri = request->substr(sp1 + 1, sp2 - sp1 - 1);
  if (uri.empty() || uri.front() != '/') malformed(line_no, "bad request uri");
  if (request->compare(sp2 + 1, 5, "HTTP/") != 0) malformed(line_no, "bad protocol");

  RawRequestRecord r;
  r.timestamp = *t;
  r.method = *method;
  r.uri = std::move(uri);
  r.status = *status;
  if (*user != "-") r.user_hint = std::string(*user);
  r.source_line = line_no;
  return r;
}

std::string format_nginx_line(const RawRequestRecord& r, std::string_view remote_addr) {
  std::string out;
  out += remote_addr;
  out += " - ";
  out += r.user_hint ? *r.user_hint : "-";
  out += " [" + format_nginx_time(r.timestamp) + "] \"";
  out += to_string(r.method);
  out += " " + r.uri + " HTTP/1.1\" " + std::to_string(r.status) + " 0 \"-\" \"restlog\"";
  return out;
}

namespace {

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

const json& require(const json& obj, const std::string& key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw LineError(ErrorCode::MissingField, line_no, "missing key \"" + key + "\"");
  }
  return *it;
}

}  // namespace

RawRequestRecord parse_json_line(std::string_view line, const FieldMap& fm, std::size_t line_no) {
  json obj = json::parse(line, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) malformed(line_no, "not a JSON object");

  RawRequestRecord r;
  r.source_line = line_no;

  const json& t = require(obj, fm.time, line_no);
  if (t.is_number_integer() || t.is_number_unsigned()) {
    r.timestamp = t.get<EpochMs>();
  } else if (t.is_number_float()) {
    r.timestamp = static_cast<EpochMs>(t.get<double>());
  } else if (t.is_string()) {
    const auto& text = t.get_ref<const std::string&>();
    auto parsed = parse_iso8601(text);
    if (!parsed) parsed = parse_nginx_time(text);
    if (!parsed) malformed(line_no, "bad time " + text);
    r.timestamp = *parsed;
  } else {
    malformed(line_no, "bad time value");
  }
  if (r.timestamp <= 0) malformed(line_no, "non-positive timestamp");

  const json& m = require(obj, fm.method, line_no);
  if (!m.is_string()) malformed(line_no, "method is not a string");
  auto method = parse_method(m.get_ref<const std::string&>());
  if (!method) malformed(line_no, "unknown method " + m.get<std::string>());
  r.method = *method;

  const json& p = require(obj, fm.path, line_no);
  if (!p.is_string() || p.get_ref<const std::string&>().empty() ||
      p.get_ref<const std::string&>().front() != '/') {
    malformed(line_no, "bad path");
  }
  r.uri = p.get<std::string>();

  const json& s = require(obj, fm.status, line_no);
  std::optional<int> status;
  if (s.is_number_integer()) {
    auto v = s.get<long long>();
    if (v >= 100 && v <= 599) status = static_cast<int>(v);
  } else if (s.is_string()) {
    status = parse_status(s.get_ref<const std::string&>());
  }
  if (!status) malformed(line_no, "bad status");
  r.status = *status;

  if (auto it = obj.find(fm.params); it != obj.end() && !it->is_null()) {
    if (it->is_object()) {
      for (const auto& [k, v] : it->items()) r.body_params[k] = scalar_text(v);
    } else if (it->is_array()) {
      // [{"key": "title", "value": "x"}, ...]
      for (const auto& kv : *it) {
        if (!kv.is_object() || !kv.contains("key") || !kv["key"].is_string()) {
          malformed(line_no, "bad params entry");
        }
        r.body_params[kv["key"].get<std::string>()] =
            kv.contains("value") ? scalar_text(kv["value"]) : std::string();
      }
    } else {
      malformed(line_no, "params is neither an object nor a key/value array");
    }
  }

  if (auto it = obj.find(fm.user); it != obj.end() && !it->is_null()) {
    std::string u = scalar_text(*it);
    if (!u.empty() && u != "-") r.user_hint = std::move(u);
  }
  return r;
}

std::vector<RawRequestRecord> parse_log_stream(std::istream& in, LogFormat format,
                                               const FieldMap& field_map, IngestStats& stats) {
  std::vector<RawRequestRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++stats.lines;
    try {
      out.push_back(format == LogFormat::Nginx ? parse_nginx_line(line, line_no)
                                               : parse_json_line(line, field_map, line_no));
    } catch (const LineError& e) {
      ++stats.malformed;
      if (stats.warnings.size() < 20) stats.warnings.emplace_back(e.what());
    }
  }
  return out;
}

std::vector<RawRequestRecord> parse_log_file(const std::filesystem::path& path, LogFormat format,
                                             const FieldMap& field_map, IngestStats& stats) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open log file " + path.string());
  return parse_log_stream(in, format, field_map, stats);
}

namespace {

void parse_query(std::string_view query, std::map<std::string, std::string>& out) {
  while (!query.empty()) {
    auto amp = query.find('&');
    std::string_view pair = query.substr(0, amp);
    query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
    if (pair.empty()) continue;
    auto eq = pair.find('=');
    std::string key = url_decode(pair.substr(0, eq), true);
    std::string value = eq == std::string_view::npos ? "" : url_decode(pair.substr(eq + 1), true);
    out.emplace(std::move(key), std::move(value));
  }
}

}  // namespace

Preprocessed preprocess(const std::vector<RawRequestRecord>& records, const ServiceSpec& spec,
                        const DependencyMap& deps, IngestStats* stats) {
  Preprocessed out;
  std::int64_t next_id = 1;
  for (const auto& r : records) {
    std::string_view uri = r.uri;
    auto q = uri.find('?');
    std::string_view path = uri.substr(0, q);
    auto match = match_uri(spec, r.method, path);
    if (!match) {
      if (stats) ++stats->unmatched;
      continue;
    }
    if (r.status < 200 || r.status > 299) {
      if (stats) ++stats->non_2xx;
      continue;
    }

    // Path bindings win over query, query over body.
    std::map<std::string, std::string> params = match->path_bindings;
    std::map<std::string, std::string> query;
    if (q != std::string_view::npos) parse_query(uri.substr(q + 1), query);
    std::set<std::string> non_path;
    for (auto& [k, v] : query) {
      if (params.emplace(k, v).second) non_path.insert(k);
    }
    for (const auto& [k, v] : r.body_params) {
      if (params.emplace(k, v).second) non_path.insert(k);
    }

    LogEntry e;
    e.entry_id = next_id++;
    e.t = r.timestamp;
    e.op = match->operation;
    e.params = std::move(params);
    e.user = r.user_hint.value_or("");
    e.source_line = r.source_line;
    for (const auto& [k, v] : e.params) {
      auto dep = deps.lookup(e.op, k);
      e.phi[k] = dep ? std::optional<ResourceInstance>(ResourceInstance{*dep, v}) : std::nullopt;
    }
    e.refresh_instances();

    out.corpus.combos[e.op].insert(non_path);
    for (const auto& k : non_path) out.corpus.values[{e.op, k}].push_back(e.params.at(k));

    out.entries.push_back(std::move(e));
  }
  if (stats) stats->entries = out.entries.size();
  return out;
}

std::map<std::string, UserQueue> split_user_queues(const std::vector<LogEntry>& entries,
                                                   const std::vector<std::string>& identifier_params) {
  std::map<std::string, UserQueue> queues;
  for (const auto& e : entries) {
    std::string user = e.user;
    if (user.empty()) {
      for (const auto& key : identifier_params) {
        auto it = e.params.find(key);
        if (it != e.params.end() && !it->second.empty()) {
          user = it->second;
          break;
        }
      }
    }
    if (user.empty()) user = "anonymous";
    auto& q = queues[user];
    q.user = user;
    q.entries.push_back(e);
    q.entries.back().user = user;
  }
  for (auto& [_, q] : queues) {
    std::stable_sort(q.entries.begin(), q.entries.end(), [](const LogEntry& a, const LogEntry& b) {
      if (a.t != b.t) return a.t < b.t;
      return a.source_line < b.source_line;
    });
  }
  return queues;
}

}  // namespace restlog
