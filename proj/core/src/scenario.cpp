#include "restlog/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "restlog/error.hpp"

namespace restlog::gitlite {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, "scenario: " + what);
}

std::string method_name(Method m) { return std::string(to_string(m)); }

EpochMs parse_start(const json& v) {
  if (v.is_number_integer()) return v.get<EpochMs>();
  if (v.is_string()) {
    if (auto t = parse_iso8601(v.get<std::string>())) return *t;
  }
  invalid("bad start time");
}

std::string param_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

struct Timed {
  EpochMs t;
  std::size_t index;
};

}  // namespace

ScenarioScript scenario_from_json(const json& doc) {
  if (!doc.is_object()) invalid("document is not an object");
  ScenarioScript s;
  s.name = doc.value("name", "");
  if (doc.contains("start")) s.start = parse_start(doc["start"]);
  for (const auto& f : doc.value("faults", json::array())) {
    FaultRule rule;
    auto m = parse_method(f.value("method", ""));
    if (!m) invalid("fault without a valid method");
    rule.method = *m;
    rule.path = f.value("path", "");
    rule.status = f.value("status", 500);
    rule.message = f.value("message", "planted fault");
    if (rule.path.empty() || rule.status < 500 || rule.status > 599) invalid("bad fault rule");
    s.faults.push_back(std::move(rule));
  }
  for (const auto& j : doc.value("steps", json::array())) {
    ScenarioStep step;
    if (!j.contains("user") || !j.contains("method") || !j.contains("path")) {
      invalid("step needs user, method and path");
    }
    step.user = j["user"].get<std::string>();
    auto m = parse_method(j["method"].get<std::string>());
    if (!m) invalid("unknown method in step");
    step.method = *m;
    step.path = j["path"].get<std::string>();
    if (step.path.empty() || step.path.front() != '/') invalid("step path must start with /");
    if (auto it = j.find("params"); it != j.end()) {
      if (!it->is_object()) invalid("step params must be an object");
      for (const auto& [k, v] : it->items()) step.params[k] = v;
    }
    step.think_ms = j.value("think_ms", std::int64_t{0});
    if (step.think_ms < 0) invalid("negative think_ms");
    if (j.contains("save_as")) step.save_as = j["save_as"].get<std::string>();
    step.logged = j.value("logged", true);
    s.steps.push_back(std::move(step));
  }
  return s;
}

json scenario_to_json(const ScenarioScript& script) {
  json faults = json::array();
  for (const auto& f : script.faults) {
    faults.push_back({{"method", method_name(f.method)},
                      {"path", f.path},
                      {"status", f.status},
                      {"message", f.message}});
  }
  json steps = json::array();
  for (const auto& st : script.steps) {
    json j = {{"user", st.user}, {"method", method_name(st.method)}, {"path", st.path}};
    if (!st.params.empty()) j["params"] = st.params;
    j["think_ms"] = st.think_ms;
    if (st.save_as) j["save_as"] = *st.save_as;
    if (!st.logged) j["logged"] = false;
    steps.push_back(std::move(j));
  }
  return {{"name", script.name},
          {"start", format_iso8601(script.start)},
          {"faults", faults},
          {"steps", steps}};
}

ScenarioScript load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scenario " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) invalid(path.string() + " is not valid JSON");
  return scenario_from_json(doc);
}

ScenarioRun run_scenario(const ScenarioScript& script, Rng& rng) {
  // Timestamps first: per-user clocks, then one global order.
  std::map<std::string, EpochMs> clock;
  std::map<std::string, std::int64_t> user_number;
  std::vector<Timed> order;
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const auto& st = script.steps[i];
    auto [it, fresh] = clock.try_emplace(st.user, script.start);
    if (fresh) user_number[st.user] = static_cast<std::int64_t>(user_number.size()) + 1;
    it->second += st.think_ms + static_cast<EpochMs>(rng.below(200));
    order.push_back({it->second, i});
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const Timed& a, const Timed& b) { return a.t < b.t; });

  Service service(Options{true, script.faults});
  std::map<std::string, std::string> vars;
  auto resolve = [&](const std::string& text) -> std::string {
    if (text.size() < 2 || text.front() != '$') return text;
    auto it = vars.find(text.substr(1));
    if (it == vars.end()) invalid("unresolved variable " + text);
    return it->second;
  };

  ScenarioRun run;
  for (const auto& [t, index] : order) {
    const auto& st = script.steps[index];
    std::string path;
    std::size_t i = 0;
    while (i < st.path.size()) {
      std::size_t j = st.path.find('/', i + 1);
      if (j == std::string::npos) j = st.path.size();
      path += "/" + url_encode(resolve(st.path.substr(i + 1, j - i - 1)));
      i = j;
    }

    std::map<std::string, std::string> params;
    json body = json::object();
    for (const auto& [k, v] : st.params) {
      json value = v.is_string() ? json(resolve(v.get<std::string>())) : v;
      params[k] = param_text(value);
      body[k] = value;
    }

    HttpRequest req;
    req.method = st.method;
    req.target = path;
    const bool in_query = st.method == Method::Get || st.method == Method::Delete;
    if (in_query && !params.empty()) {
      std::string query;
      for (const auto& [k, v] : params) {
        query += (query.empty() ? "?" : "&") + url_encode(k) + "=" + url_encode(v);
      }
      req.target += query;
    } else if (!params.empty()) {
      req.body = body.dump();
    }
    HttpResponse resp = service.handle(req);

    if (st.save_as && resp.status >= 200 && resp.status < 300) {
      json out = json::parse(resp.body, nullptr, false);
      if (out.is_object()) {
        const char* key = out.contains("iid") ? "iid" : "id";
        if (out.contains(key)) vars[*st.save_as] = param_text(out[key]);
      }
    }

    ScenarioRecord rec;
    rec.record.timestamp = t;
    rec.record.method = st.method;
    rec.record.uri = req.target;
    rec.record.status = resp.status;
    if (!in_query) rec.record.body_params = params;
    rec.record.user_hint = st.user;
    rec.user = st.user;
    rec.user_number = user_number[st.user];
    rec.duration_s = static_cast<double>(5 + rng.below(120)) / 1000.0;
    rec.logged = st.logged;
    run.records.push_back(std::move(rec));
  }
  run.state = service.state();
  return run;
}

std::vector<std::string> generate_hrlogs(const ScenarioScript& script, LogFormat format,
                                         Rng& rng) {
  ScenarioRun run = run_scenario(script, rng);
  std::vector<std::string> lines;
  std::size_t line_no = 0;
  for (const auto& rec : run.records) {
    if (!rec.logged) continue;
    ++line_no;
    std::string addr = "10.0.0." + std::to_string(rec.user_number);
    if (format == LogFormat::Nginx) {
      lines.push_back(format_nginx_line(rec.record, addr));
      continue;
    }
    const auto& r = rec.record;
    std::string_view uri = r.uri;
    auto q = uri.find('?');
    json params = json::array();
    std::map<std::string, std::string> all = r.body_params;
    if (q != std::string_view::npos) {
      std::string_view query = uri.substr(q + 1);
      while (!query.empty()) {
        auto amp = query.find('&');
        std::string_view pair = query.substr(0, amp);
        query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
        auto eq = pair.find('=');
        all[url_decode(pair.substr(0, eq), true)] =
            eq == std::string_view::npos ? "" : url_decode(pair.substr(eq + 1), true);
      }
    }
    for (const auto& [k, v] : all) params.push_back({{"key", k}, {"value", v}});
    char duration[32];
    std::snprintf(duration, sizeof duration, "%.3f", rec.duration_s);
    json line = {{"time", format_iso8601(r.timestamp)},
                 {"severity", "INFO"},
                 {"method", std::string(to_string(r.method))},
                 {"path", std::string(uri.substr(0, q))},
                 {"params", params},
                 {"status", r.status},
                 {"user_id", rec.user_number},
                 {"username", rec.user},
                 {"remote_ip", addr},
                 {"duration_s", json::parse(duration)},
                 {"correlation_id", "req-" + std::to_string(line_no)}};
    lines.push_back(line.dump());
  }
  return lines;
}

ScenarioScript approval_scenario() { return scenario_from_json(json::parse(approval_scenario_document())); }

ScenarioScript default_scenario() {
  return scenario_from_json(json::parse(default_scenario_document()));
}

}  // namespace restlog::gitlite
