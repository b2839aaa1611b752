#include "restlog/resource_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "restlog/error.hpp"

namespace restlog {

const Resource* ResourceTree::find(const std::string& name) const {
  auto it = resources.find(name);
  return it == resources.end() ? nullptr : &it->second;
}

std::size_t ResourceTree::depth(const std::string& name) const {
  std::size_t d = 0;
  const Resource* r = find(name);
  while (r && r->parent) {
    ++d;
    r = find(*r->parent);
  }
  return d;
}

bool ResourceTree::is_ancestor(const std::string& ancestor, const std::string& name) const {
  const Resource* r = find(name);
  while (r && r->parent) {
    if (*r->parent == ancestor) return true;
    r = find(*r->parent);
  }
  return false;
}

std::vector<std::string> ResourceTree::ancestors(const std::string& name) const {
  std::vector<std::string> out;
  const Resource* r = find(name);
  while (r && r->parent) {
    out.push_back(*r->parent);
    r = find(*r->parent);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::optional<std::string> ResourceTree::created_by(const OperationId& op) const {
  for (const auto& [name, r] : resources) {
    if (r.creation_op == op) return name;
  }
  return std::nullopt;
}

std::vector<std::string> ResourceTree::names() const {
  std::vector<std::string> out;
  out.reserve(resources.size());
  for (const auto& [name, _] : resources) out.push_back(name);
  return out;
}

std::optional<std::string> DependencyMap::lookup(const OperationId& op,
                                                 const std::string& param) const {
  auto it = entries.find({op, param});
  return it == entries.end() ? std::nullopt : it->second;
}

std::string singularize(const std::string& word,
                        const std::map<std::string, std::string>& overrides) {
  if (auto it = overrides.find(word); it != overrides.end()) return it->second;
  if (word.size() > 1 && word.back() == 's' && word[word.size() - 2] != 's') {
    return word.substr(0, word.size() - 1);
  }
  return word;
}

namespace {

std::optional<std::string> last_literal(const PathTemplate& path) {
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    if (!it->is_param()) return it->text;
  }
  return std::nullopt;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::size_t shared_prefix(const PathTemplate& a, const PathTemplate& b) {
  std::size_t n = 0;
  while (n < a.size() && n < b.size()) {
    if (a[n].is_param() != b[n].is_param()) break;
    if (!a[n].is_param() && a[n].text != b[n].text) break;
    ++n;
  }
  return n;
}

}  // namespace

bool HeuristicClassifier::is_creation(const ApiOperation& op) {
  if (op.method != Method::Post || op.path.empty() || op.path.back().is_param()) return false;
  const auto& verbs = options_.action_verbs;
  return std::find(verbs.begin(), verbs.end(), op.path.back().text) == verbs.end();
}

bool HeuristicClassifier::is_retrieval(const ApiOperation& op) {
  return op.method == Method::Get && !op.path.empty() && !op.path.back().is_param();
}

std::optional<std::string> HeuristicClassifier::dependency(
    const ApiOperation& op, const ParamDecl& param, const std::vector<std::string>& resources) {
  struct Candidate {
    std::string name;
    PathTemplate path;
    std::string singular;
  };
  std::vector<Candidate> candidates;
  for (const auto& name : resources) {
    PathTemplate path = parse_path_template(name);
    auto lit = last_literal(path);
    if (!lit) continue;
    candidates.push_back({name, std::move(path), singularize(*lit, options_.singular_overrides)});
  }

  if (param.location == ParamLocation::Path) {
    for (std::size_t k = 0; k < op.path.size(); ++k) {
      if (!op.path[k].is_param() || op.path[k].text != param.name) continue;
      PathTemplate prefix(op.path.begin(), op.path.begin() + static_cast<std::ptrdiff_t>(k));
      for (const auto& c : candidates) {
        if (!same_shape(prefix, c.path)) continue;
        if (param.name == "id" || param.name == "iid" || param.name == c.singular + "_id" ||
            param.name == c.singular) {
          return c.name;
        }
      }
      return std::nullopt;
    }
    return std::nullopt;
  }

  const Candidate* best = nullptr;
  std::size_t best_shared = 0;
  for (const auto& c : candidates) {
    const std::string& s = c.singular;
    bool named = param.name == s || param.name == s + "_id" || ends_with(param.name, "_" + s) ||
                 ends_with(param.name, "_" + s + "_id");
    if (!named) continue;
    std::size_t shared = shared_prefix(c.path, op.path);
    if (!best || shared > best_shared || (shared == best_shared && c.name < best->name)) {
      best = &c;
      best_shared = shared;
    }
  }
  if (!best) return std::nullopt;
  return best->name;
}

std::string build_prompt(PromptKind kind, const PromptContext& ctx) {
  if (ctx.operation.empty()) {
    throw Error(ErrorCode::MissingContextField, "prompt context lacks an operation");
  }
  std::ostringstream out;
  auto describe = [&] {
    out << "Operation: " << ctx.operation << "\n";
    out << "Description: " << (ctx.description.empty() ? "(none)" : ctx.description) << "\n";
  };
  switch (kind) {
    case PromptKind::Creation:
      out << "You are analyzing a REST API.\n";
      describe();
      out << "Does this operation create a new resource instance, as opposed to acting on an "
             "existing one?\nAnswer with exactly one word: yes or no.\n";
      break;
    case PromptKind::Retrieval:
      out << "You are analyzing a REST API.\n";
      describe();
      out << "Does this operation retrieve a collection of resources without requiring a "
             "resource identifier?\nAnswer with exactly one word: yes or no.\n";
      break;
    case PromptKind::Dependency: {
      if (!ctx.parameter) {
        throw Error(ErrorCode::MissingContextField, "dependency prompt needs a parameter");
      }
      if (!ctx.resources) {
        throw Error(ErrorCode::MissingContextField, "dependency prompt needs a resource list");
      }
      out << "You are analyzing a REST API.\n";
      describe();
      out << "Parameter: " << *ctx.parameter << "\n";
      out << "Known resources:\n";
      if (ctx.resources->empty()) {
        out << "(none)\n";
      } else {
        for (const auto& r : *ctx.resources) out << "- " << r << "\n";
      }
      out << "Which known resource must already exist for the value of this parameter? Answer "
             "with exactly one resource name from the list, or None if the parameter does not "
             "depend on any existing resource.\n";
      break;
    }
  }
  return out.str();
}

namespace {

std::string normalize_answer(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  while (!s.empty() && (s.back() == '.' || s.back() == '"' || s.back() == '\'' || s.back() == '`')) {
    s.pop_back();
  }
  while (!s.empty() && (s.front() == '"' || s.front() == '\'' || s.front() == '`')) {
    s.erase(s.begin());
  }
  return s;
}

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

PromptContext context_for(const ApiOperation& op) {
  return PromptContext{op.id, op.summary, std::nullopt, std::nullopt};
}

}  // namespace

bool LlmClassifier::ask_yes_no(PromptKind kind, const ApiOperation& op) {
  const std::string prompt = build_prompt(kind, context_for(op));
  std::string last;
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    try {
      last = lower(normalize_answer(complete_(prompt)));
    } catch (const Error& e) {
      last = e.what();
      continue;
    }
    if (last == "yes") return true;
    if (last == "no") return false;
  }
  throw Error(ErrorCode::ClassifierUnavailable,
              "no well-formed yes/no answer for " + op.id + " (last: " + last + ")");
}

bool LlmClassifier::is_creation(const ApiOperation& op) {
  if (op.method != Method::Post) return false;
  return ask_yes_no(PromptKind::Creation, op);
}

bool LlmClassifier::is_retrieval(const ApiOperation& op) {
  if (op.method != Method::Get) return false;
  return ask_yes_no(PromptKind::Retrieval, op);
}

std::optional<std::string> LlmClassifier::dependency(const ApiOperation& op,
                                                     const ParamDecl& param,
                                                     const std::vector<std::string>& resources) {
  PromptContext ctx = context_for(op);
  ctx.parameter = param.name;
  ctx.resources = resources;
  const std::string prompt = build_prompt(PromptKind::Dependency, ctx);
  std::string last;
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    try {
      last = normalize_answer(complete_(prompt));
    } catch (const Error& e) {
      last = e.what();
      continue;
    }
    if (lower(last) == "none") return std::nullopt;
    if (std::find(resources.begin(), resources.end(), last) != resources.end()) return last;
  }
  throw Error(ErrorCode::ClassifierUnavailable, "no well-formed dependency answer for " + op.id +
                                                    " " + param.name + " (last: " + last + ")");
}

std::set<OperationId> identify_creation_operations(const ServiceSpec& spec, Classifier& c) {
  std::set<OperationId> out;
  for (const auto& [id, op] : spec.operations) {
    if (op.method == Method::Post && c.is_creation(op)) out.insert(id);
  }
  return out;
}

std::set<OperationId> identify_retrieval_operations(const ServiceSpec& spec, Classifier& c) {
  std::set<OperationId> out;
  for (const auto& [id, op] : spec.operations) {
    if (op.method == Method::Get && c.is_retrieval(op)) out.insert(id);
  }
  return out;
}

ResourceTree build_resource_tree(const ServiceSpec& spec, const std::set<OperationId>& creations,
                                 const std::set<OperationId>& retrievals) {
  ResourceTree tree;
  std::map<std::string, PathTemplate> paths;
  for (const auto& id : creations) {
    const ApiOperation* op = spec.find(id);
    if (!op) continue;
    Resource r;
    r.name = op->path_string();
    r.creation_op = id;
    paths[r.name] = op->path;
    tree.resources.emplace(r.name, std::move(r));
  }
  for (const auto& id : retrievals) {
    const ApiOperation* op = spec.find(id);
    if (!op) continue;
    for (auto& [name, r] : tree.resources) {
      if (same_shape(paths[name], op->path) && !r.retrieval_op) r.retrieval_op = id;
    }
  }
  for (auto& [name, r] : tree.resources) {
    const PathTemplate& self = paths[name];
    std::optional<std::string> parent;
    std::size_t parent_len = 0;
    for (const auto& [other, other_path] : paths) {
      if (other == name || other_path.size() >= self.size()) continue;
      if (!is_shape_prefix(other_path, self)) continue;
      if (!parent || other_path.size() > parent_len) {
        parent = other;
        parent_len = other_path.size();
      }
    }
    r.parent = parent;
  }
  for (const auto& [name, r] : tree.resources) {
    if (r.parent) {
      tree.children[*r.parent].push_back(name);
    } else {
      tree.roots.push_back(name);
    }
  }
  return tree;
}

DependencyMap infer_param_dependencies(const ServiceSpec& spec, const ResourceTree& tree,
                                       Classifier& c) {
  DependencyMap deps;
  const std::vector<std::string> names = tree.names();
  for (const auto& [id, op] : spec.operations) {
    for (const auto& p : op.parameters) {
      std::optional<std::string> dep = c.dependency(op, p, names);
      if (dep && !tree.find(*dep)) dep.reset();
      deps.entries[{id, p.name}] = dep;
    }
  }
  return deps;
}

ResourceModel analyze_resources(const ServiceSpec& spec, Classifier& c) {
  auto creations = identify_creation_operations(spec, c);
  auto retrievals = identify_retrieval_operations(spec, c);
  ResourceModel model;
  model.tree = build_resource_tree(spec, creations, retrievals);
  model.deps = infer_param_dependencies(spec, model.tree, c);
  return model;
}

}  // namespace restlog
