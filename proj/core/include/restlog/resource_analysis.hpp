#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "restlog/spec_model.hpp"

namespace restlog {

// A resource is named by the path template of the operation that creates it,
// e.g. "/projects/:id/merge_requests".
struct Resource {
  std::string name;
  OperationId creation_op;
  std::optional<OperationId> retrieval_op;
  std::optional<std::string> parent;

  friend bool operator==(const Resource&, const Resource&) = default;
};

struct ResourceTree {
  std::map<std::string, Resource> resources;
  std::vector<std::string> roots;
  std::map<std::string, std::vector<std::string>> children;

  const Resource* find(const std::string& name) const;
  // Root resources have depth 0.
  std::size_t depth(const std::string& name) const;
  // True when `ancestor` is a strict ancestor of `name`.
  bool is_ancestor(const std::string& ancestor, const std::string& name) const;
  // Ancestors of `name`, root first (excludes `name`).
  std::vector<std::string> ancestors(const std::string& name) const;
  // The resource whose creation operation is `op`, if any.
  std::optional<std::string> created_by(const OperationId& op) const;
  std::vector<std::string> names() const;
};

// Total over every (operation, declared parameter) of the spec.
struct DependencyMap {
  std::map<std::pair<OperationId, std::string>, std::optional<std::string>> entries;

  std::optional<std::string> lookup(const OperationId& op, const std::string& param) const;
};

struct ResourceModel {
  ResourceTree tree;
  DependencyMap deps;
};

// Decides the three questions the analysis asks about operations and
// parameters. Implementations throw Error(ClassifierUnavailable) when they
// cannot produce a well-formed answer.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual bool is_creation(const ApiOperation& op) = 0;
  virtual bool is_retrieval(const ApiOperation& op) = 0;
  virtual std::optional<std::string> dependency(const ApiOperation& op, const ParamDecl& param,
                                                const std::vector<std::string>& resources) = 0;
};

struct HeuristicOptions {
  std::vector<std::string> action_verbs = {"share",   "approve", "merge",   "retry",   "cancel",
                                           "star",    "unstar",  "archive", "transfer"};
  std::map<std::string, std::string> singular_overrides = {
      {"branches", "branch"}, {"statuses", "status"}, {"aliases", "alias"},
      {"indices", "index"},   {"entries", "entry"},   {"policies", "policy"},
      {"repositories", "repository"}, {"addresses", "address"}, {"people", "person"}};
};

std::string singularize(const std::string& word,
                        const std::map<std::string, std::string>& overrides);

// Offline, deterministic classifier driven by path shape and naming.
class HeuristicClassifier final : public Classifier {
 public:
  explicit HeuristicClassifier(HeuristicOptions options = {}) : options_(std::move(options)) {}

  bool is_creation(const ApiOperation& op) override;
  bool is_retrieval(const ApiOperation& op) override;
  std::optional<std::string> dependency(const ApiOperation& op, const ParamDecl& param,
                                        const std::vector<std::string>& resources) override;

  const HeuristicOptions& options() const { return options_; }

 private:
  HeuristicOptions options_;
};

enum class PromptKind { Creation, Retrieval, Dependency };

struct PromptContext {
  std::string operation;    // e.g. "POST /projects/:id/issues"
  std::string description;  // operation summary, may be empty
  std::optional<std::string> parameter;
  std::optional<std::vector<std::string>> resources;
};

// Throws Error(MissingContextField) when the template needs a field that is
// absent. Creation/retrieval prompts ask for "yes"/"no"; the dependency prompt
// asks for a listed resource name or "None".
std::string build_prompt(PromptKind kind, const PromptContext& ctx);

// Sends one prompt and returns the raw model reply. Throws
// Error(ClassifierUnavailable) on transport failure.
using CompletionFn = std::function<std::string(const std::string& prompt)>;

struct LlmOptions {
  std::string endpoint;  // full chat-completion URL
  std::string model;
  std::string api_key_env;
  int timeout_ms = 30000;
  int max_attempts = 3;
};

// Chat-completion transport over HTTP (OpenAI-compatible body shape).
CompletionFn http_chat_completion(const LlmOptions& options);

class LlmClassifier final : public Classifier {
 public:
  LlmClassifier(CompletionFn complete, int max_attempts = 3)
      : complete_(std::move(complete)), max_attempts_(max_attempts) {}

  bool is_creation(const ApiOperation& op) override;
  bool is_retrieval(const ApiOperation& op) override;
  std::optional<std::string> dependency(const ApiOperation& op, const ParamDecl& param,
                                        const std::vector<std::string>& resources) override;

 private:
  bool ask_yes_no(PromptKind kind, const ApiOperation& op);

  CompletionFn complete_;
  int max_attempts_;
};

std::set<OperationId> identify_creation_operations(const ServiceSpec& spec, Classifier& c);
std::set<OperationId> identify_retrieval_operations(const ServiceSpec& spec, Classifier& c);
ResourceTree build_resource_tree(const ServiceSpec& spec, const std::set<OperationId>& creations,
                                 const std::set<OperationId>& retrievals);
DependencyMap infer_param_dependencies(const ServiceSpec& spec, const ResourceTree& tree,
                                       Classifier& c);

// Runs all four steps.
ResourceModel analyze_resources(const ServiceSpec& spec, Classifier& c);

}  // namespace restlog
