#include "restlog/testbed.hpp"

#include <charconv>

namespace restlog::gitlite {

using nlohmann::json;

namespace {

HttpResponse reply(int status, const json& body) { return {status, body.dump()}; }
HttpResponse message(int status, const std::string& text) {
  return reply(status, json{{"message", text}});
}

std::optional<std::int64_t> parse_id(const std::string& s) {
  std::int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size() || v <= 0) {
    return std::nullopt;
  }
  return v;
}

struct Params {
  std::map<std::string, json> values;

  std::optional<std::string> str(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end() || it->second.is_null()) return std::nullopt;
    std::string s = it->second.is_string() ? it->second.get<std::string>() : it->second.dump();
    if (s.empty()) return std::nullopt;
    return s;
  }
};

std::vector<std::string> segments(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) out.push_back(url_decode(path.substr(i, j - i)));
    i = j;
  }
  return out;
}

bool rule_matches(const FaultRule& rule, Method m, const std::vector<std::string>& seg) {
  if (rule.method != m) return false;
  std::vector<std::string> pattern = segments(rule.path);
  if (pattern.size() != seg.size()) return false;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const std::string& p = pattern[i];
    bool wildcard = (!p.empty() && p.front() == ':') || (p.size() > 2 && p.front() == '{');
    if (!wildcard && p != seg[i]) return false;
  }
  return true;
}

json project_json(const Project& p) {
  return {{"id", p.id}, {"name", p.name}, {"visibility", p.visibility}, {"default_branch", "main"}};
}

json mr_json(const MergeRequest& mr) {
  return {{"iid", mr.iid},
          {"project_id", mr.project},
          {"source_branch", mr.source_branch},
          {"target_branch", mr.target_branch},
          {"title", mr.title},
          {"approved", mr.approved},
          {"state", mr.merged ? "merged" : "opened"}};
}

}  // namespace

HttpResponse Service::handle(const HttpRequest& request) {
  std::string_view target = request.target;
  auto q = target.find('?');
  std::vector<std::string> seg = segments(target.substr(0, q));

  for (const auto& rule : options_.faults) {
    if (rule_matches(rule, request.method, seg)) return message(rule.status, rule.message);
  }

  Params params;
  if (q != std::string_view::npos) {
    std::string_view query = target.substr(q + 1);
    while (!query.empty()) {
      auto amp = query.find('&');
      std::string_view pair = query.substr(0, amp);
      query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
      auto eq = pair.find('=');
      if (pair.empty()) continue;
      params.values[url_decode(pair.substr(0, eq), true)] =
          eq == std::string_view::npos ? "" : url_decode(pair.substr(eq + 1), true);
    }
  }
  if (!request.body.empty()) {
    json body = json::parse(request.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return message(400, "body is not a JSON object");
    for (auto& [k, v] : body.items()) params.values[k] = v;
  }

  const Method m = request.method;
  auto wrong_method = [] { return message(405, "405 Method Not Allowed"); };
  auto not_found = [] { return message(404, "404 Not Found"); };

  if (seg.empty() || seg[0] != "projects") return not_found();

  // /projects
  if (seg.size() == 1) {
    if (m == Method::Get) {
      json list = json::array();
      for (const auto& [_, p] : state_.projects) list.push_back(project_json(p));
      return reply(200, list);
    }
    if (m != Method::Post) return wrong_method();
    auto name = params.str("name");
    if (!name) return message(400, "name is missing");
    std::string visibility = params.str("visibility").value_or("private");
    if (visibility != "private" && visibility != "internal" && visibility != "public") {
      return message(400, "visibility does not have a valid value");
    }
    Project p;
    p.id = state_.next_project++;
    p.name = *name;
    p.visibility = visibility;
    state_.projects[p.id] = p;
    return reply(201, project_json(p));
  }

  auto pid = parse_id(seg[1]);
  Project* project = nullptr;
  if (pid) {
    auto it = state_.projects.find(*pid);
    if (it != state_.projects.end()) project = &it->second;
  }
  auto project_missing = [] { return message(404, "404 Project Not Found"); };

  // /projects/:id
  if (seg.size() == 2) {
    if (m != Method::Get) return wrong_method();
    if (!project) return project_missing();
    return reply(200, project_json(*project));
  }

  // /projects/:id/commits
  if (seg.size() == 3 && seg[2] == "commits") {
    if (m != Method::Post) return wrong_method();
    if (!project) return project_missing();
    auto branch = params.str("branch");
    auto msg = params.str("commit_message");
    auto action = params.str("action");
    if (!branch) return message(400, "branch is missing");
    if (!msg) return message(400, "commit_message is missing");
    if (!action) return message(400, "action is missing");
    if (*action == "create") {
      project->branches.insert(*branch);
    } else if (*action == "update") {
      if (!project->branches.count(*branch)) return message(400, "branch does not exist");
    } else if (*action == "delete") {
      if (*branch == "main") return message(400, "cannot delete the default branch");
      if (!project->branches.erase(*branch)) return message(400, "branch does not exist");
    } else {
      return message(400, "action does not have a valid value");
    }
    Commit c;
    c.id = state_.next_commit++;
    c.project = project->id;
    c.branch = *branch;
    c.message = *msg;
    c.action = *action;
    state_.commits[c.id] = c;
    return reply(201, json{{"id", c.id}, {"project_id", c.project}, {"branch", c.branch},
                           {"message", c.message}});
  }

  if (seg[2] != "merge_requests") return not_found();

  // /projects/:id/merge_requests
  if (seg.size() == 3) {
    if (m == Method::Get) {
      if (!project) return project_missing();
      json list = json::array();
      for (const auto& [key, mr] : state_.merge_requests) {
        if (key.first == project->id) list.push_back(mr_json(mr));
      }
      return reply(200, list);
    }
    if (m != Method::Post) return wrong_method();
    if (!project) return project_missing();
    auto source = params.str("source_branch");
    auto target_branch = params.str("target_branch");
    auto title = params.str("title");
    if (!source) return message(400, "source_branch is missing");
    if (!target_branch) return message(400, "target_branch is missing");
    if (!title) return message(400, "title is missing");
    if (*source == *target_branch) return message(400, "source and target branch must differ");
    if (!project->branches.count(*source)) return message(400, "source branch does not exist");
    if (!project->branches.count(*target_branch)) {
      return message(400, "target branch does not exist");
    }
    MergeRequest mr;
    mr.project = project->id;
    mr.iid = state_.next_iid++;
    mr.source_branch = *source;
    mr.target_branch = *target_branch;
    mr.title = *title;
    state_.merge_requests[{mr.project, mr.iid}] = mr;
    return reply(201, mr_json(mr));
  }

  auto iid = parse_id(seg[3]);
  MergeRequest* mr = nullptr;
  if (project && iid) {
    auto it = state_.merge_requests.find({project->id, *iid});
    if (it != state_.merge_requests.end()) mr = &it->second;
  }
  auto mr_missing = [&] {
    return project ? message(404, "404 Merge Request Not Found") : project_missing();
  };

  // /projects/:id/merge_requests/:iid
  if (seg.size() == 4) {
    if (m != Method::Get) return wrong_method();
    if (!mr) return mr_missing();
    return reply(200, mr_json(*mr));
  }

  if (seg.size() == 5 && seg[4] == "approve") {
    if (m != Method::Post) return wrong_method();
    if (!mr) return mr_missing();
    mr->approved = true;
    return reply(200, mr_json(*mr));
  }

  if (seg.size() == 5 && seg[4] == "merge") {
    if (m != Method::Put) return wrong_method();
    if (!mr) return mr_missing();
    if (mr->merged) {
      if (options_.double_merge_defect) return message(500, std::string(kPlantedDefectMessage));
      return message(405, "merge request is already merged");
    }
    if (!mr->approved) return message(405, "merge blocked: not approved");
    mr->merged = true;
    return reply(200, mr_json(*mr));
  }

  return not_found();
}

std::function<RequestHandler()> handler_factory(Options options) {
  return [options]() -> RequestHandler {
    auto service = std::make_shared<Service>(options);
    return [service](const HttpRequest& r) { return service->handle(r); };
  };
}

}  // namespace restlog::gitlite
