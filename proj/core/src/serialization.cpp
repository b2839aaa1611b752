#include "restlog/serialization.hpp"

#include "restlog/error.hpp"

namespace restlog {

using nlohmann::json;

namespace {

template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("bad ") + what + ": " + e.what());
  }
}

}  // namespace

json to_json(const ResourceInstance& inst) {
  return {{"resource", inst.resource}, {"id", inst.id_value}};
}

ResourceInstance instance_from_json(const json& j) {
  return guarded("resource instance", [&] {
    return ResourceInstance{j.at("resource").get<std::string>(), j.at("id").get<std::string>()};
  });
}

json to_json(const LogEntry& e) {
  json phi = json::object();
  for (const auto& [k, v] : e.phi) phi[k] = v ? to_json(*v) : json(nullptr);
  json j = {{"entry_id", e.entry_id}, {"t", e.t},     {"op", e.op},
            {"params", e.params},     {"phi", phi},   {"user", e.user}};
  if (e.creates) j["creates"] = to_json(*e.creates);
  return j;
}

LogEntry entry_from_json(const json& j) {
  return guarded("log entry", [&] {
    LogEntry e;
    e.entry_id = j.at("entry_id").get<std::int64_t>();
    e.t = j.at("t").get<EpochMs>();
    e.op = j.at("op").get<std::string>();
    e.params = j.at("params").get<std::map<std::string, std::string>>();
    for (const auto& [k, v] : j.at("phi").items()) {
      e.phi[k] = v.is_null() ? std::nullopt : std::optional(instance_from_json(v));
    }
    e.user = j.value("user", "");
    if (j.contains("creates") && !j["creates"].is_null()) e.creates = instance_from_json(j["creates"]);
    e.refresh_instances();
    return e;
  });
}

json to_json(const LogSlice& s) {
  json ops = json::array();
  for (const auto& e : s.entries) ops.push_back(e.op);
  return {{"slice_id", s.slice_id},
          {"strategy", std::string(to_string(s.strategy))},
          {"user", s.user},
          {"entry_ids", s.entry_ids()},
          {"ops", ops}};
}

LogSlice slice_from_json(const json& j, const std::map<std::int64_t, LogEntry>& entries) {
  return guarded("slice", [&] {
    LogSlice s;
    s.slice_id = j.at("slice_id").get<std::int64_t>();
    auto strategy = parse_slice_strategy(j.at("strategy").get<std::string>());
    if (!strategy) throw Error(ErrorCode::MalformedDocument, "bad slice strategy");
    s.strategy = *strategy;
    s.user = j.value("user", "");
    for (const auto& id : j.at("entry_ids")) {
      auto it = entries.find(id.get<std::int64_t>());
      if (it == entries.end()) {
        throw Error(ErrorCode::MalformedDocument,
                    "slice " + std::to_string(s.slice_id) + " references unknown entry " + id.dump());
      }
      s.entries.push_back(it->second);
    }
    return s;
  });
}

json to_json(const ParameterCorpus& c) {
  json combos = json::object();
  for (const auto& [op, sets] : c.combos) {
    json list = json::array();
    for (const auto& names : sets) list.push_back(names);
    combos[op] = list;
  }
  json values = json::array();
  for (const auto& [key, vals] : c.values) {
    values.push_back({{"op", key.first}, {"param", key.second}, {"values", vals}});
  }
  return {{"combos", combos}, {"values", values}};
}

ParameterCorpus corpus_from_json(const json& j) {
  return guarded("corpus", [&] {
    ParameterCorpus c;
    for (const auto& [op, list] : j.at("combos").items()) {
      for (const auto& names : list) c.combos[op].insert(names.get<std::set<std::string>>());
    }
    for (const auto& v : j.at("values")) {
      c.values[{v.at("op").get<std::string>(), v.at("param").get<std::string>()}] =
          v.at("values").get<std::vector<std::string>>();
    }
    return c;
  });
}

json to_json(const Seed& s) {
  json entries = json::array();
  for (const auto& e : s.entries) entries.push_back(to_json(e));
  json phi = json::array();
  for (const auto& [locus, target] : s.phi_prime) phi.push_back({locus.index, locus.param, target});
  json unbound = json::array();
  for (const auto& locus : s.unbound) unbound.push_back({locus.index, locus.param});
  json instances = json::array();
  for (const auto& inst : s.origin.instances) instances.push_back(to_json(inst));
  return {{"seed_id", s.seed_id},
          {"prepended", s.prepended},
          {"entries", entries},
          {"phi_prime", phi},
          {"unbound", unbound},
          {"origin",
           {{"slice_id", s.origin.slice_id},
            {"strategy", std::string(to_string(s.origin.strategy))},
            {"instances", instances},
            {"t_begin", s.origin.t_begin},
            {"t_end", s.origin.t_end}}}};
}

Seed seed_from_json(const json& j) {
  return guarded("seed", [&] {
    Seed s;
    s.seed_id = j.at("seed_id").get<std::int64_t>();
    s.prepended = j.at("prepended").get<std::size_t>();
    for (const auto& e : j.at("entries")) s.entries.push_back(entry_from_json(e));
    for (const auto& t : j.at("phi_prime")) {
      s.phi_prime[{t.at(0).get<std::size_t>(), t.at(1).get<std::string>()}] =
          t.at(2).get<std::size_t>();
    }
    for (const auto& t : j.at("unbound")) {
      s.unbound.insert({t.at(0).get<std::size_t>(), t.at(1).get<std::string>()});
    }
    const json& o = j.at("origin");
    s.origin.slice_id = o.at("slice_id").get<std::int64_t>();
    auto strategy = parse_slice_strategy(o.at("strategy").get<std::string>());
    if (!strategy) throw Error(ErrorCode::MalformedDocument, "unknown slice strategy");
    s.origin.strategy = *strategy;
    for (const auto& inst : o.at("instances")) s.origin.instances.insert(instance_from_json(inst));
    s.origin.t_begin = o.at("t_begin").get<EpochMs>();
    s.origin.t_end = o.at("t_end").get<EpochMs>();
    if (s.prepended > s.entries.size()) {
      throw Error(ErrorCode::MalformedDocument, "prepended count exceeds entry count");
    }
    s.origin.source.assign(s.entries.begin() + static_cast<std::ptrdiff_t>(s.prepended),
                           s.entries.end());
    return s;
  });
}

json to_json(const ResponseRecord& r) {
  json body = json::parse(r.body, nullptr, false);
  return {{"entry_index", r.entry_index},
          {"op", r.op},
          {"status", r.status},
          {"body", body.is_discarded() ? json(r.body) : body},
          {"extracted_ids", r.extracted_ids},
          {"binding_fallback", r.binding_fallback},
          {"request",
           {{"method", std::string(to_string(r.request.method))},
            {"target", r.request.target},
            {"body", r.request.body}}}};
}

json resources_to_json(const ResourceTree& tree) {
  json resources = json::array();
  for (const auto& [name, r] : tree.resources) {
    json children = json::array();
    if (auto it = tree.children.find(name); it != tree.children.end()) children = it->second;
    resources.push_back({{"name", name},
                         {"creation_op", r.creation_op},
                         {"retrieval_op", r.retrieval_op ? json(*r.retrieval_op) : json(nullptr)},
                         {"parent", r.parent ? json(*r.parent) : json(nullptr)},
                         {"depth", tree.depth(name)},
                         {"children", children}});
  }
  return {{"roots", tree.roots}, {"resources", resources}};
}

ResourceTree resources_from_json(const json& j) {
  return guarded("resources document", [&] {
    ResourceTree tree;
    for (const auto& r : j.at("resources")) {
      Resource res;
      res.name = r.at("name").get<std::string>();
      res.creation_op = r.at("creation_op").get<std::string>();
      if (r.contains("retrieval_op") && !r["retrieval_op"].is_null()) {
        res.retrieval_op = r["retrieval_op"].get<std::string>();
      }
      if (r.contains("parent") && !r["parent"].is_null()) res.parent = r["parent"].get<std::string>();
      tree.resources.emplace(res.name, res);
    }
    for (const auto& [name, r] : tree.resources) {
      if (r.parent) {
        if (!tree.find(*r.parent)) {
          throw Error(ErrorCode::MalformedDocument, "parent " + *r.parent + " is not a resource");
        }
        tree.children[*r.parent].push_back(name);
      } else {
        tree.roots.push_back(name);
      }
    }
    return tree;
  });
}

json deps_to_json(const DependencyMap& deps) {
  json entries = json::array();
  for (const auto& [key, dep] : deps.entries) {
    entries.push_back(
        {{"op", key.first}, {"param", key.second}, {"resource", dep ? json(*dep) : json(nullptr)}});
  }
  return {{"entries", entries}};
}

DependencyMap deps_from_json(const json& j) {
  return guarded("dependency document", [&] {
    DependencyMap deps;
    for (const auto& e : j.at("entries")) {
      std::optional<std::string> dep;
      if (!e.at("resource").is_null()) dep = e["resource"].get<std::string>();
      deps.entries[{e.at("op").get<std::string>(), e.at("param").get<std::string>()}] = dep;
    }
    return deps;
  });
}

json to_json(const IngestStats& s) {
  return {{"lines", s.lines},
          {"malformed", s.malformed},
          {"dropped_unmatched", s.unmatched},
          {"dropped_non_2xx", s.non_2xx},
          {"entries", s.entries}};
}

}  // namespace restlog
