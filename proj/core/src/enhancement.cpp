#include "restlog/enhancement.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <limits>

#include "restlog/error.hpp"

namespace restlog {

std::string default_value(SchemaType type, Rng& rng) {
  switch (type) {
    case SchemaType::String: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "t%08llx",
                    static_cast<unsigned long long>(rng.next() & 0xffffffffULL));
      return buf;
    }
    case SchemaType::Integer:
    case SchemaType::Number:
      return std::to_string(rng.below(100));
    case SchemaType::Boolean:
      return "true";
    case SchemaType::Array:
      return "[]";
    case SchemaType::Object:
      return "{}";
  }
  return "";
}

namespace {

SchemaType type_of(const ApiOperation& op, const std::string& name) {
  const ParamDecl* d = op.find_param(name);
  return d ? d->schema_type : SchemaType::String;
}

std::string sample_value(const ApiOperation& op, const std::string& name,
                         const ParameterCorpus& corpus, Rng& rng) {
  if (const auto* pool = corpus.values_for(op.id, name); pool && !pool->empty()) {
    return rng.pick(*pool);
  }
  return default_value(type_of(op, name), rng);
}

std::vector<std::string> path_param_names(const ApiOperation& op) {
  std::vector<std::string> out;
  for (const auto& seg : op.path) {
    if (seg.is_param()) out.push_back(seg.text);
  }
  return out;
}

const ApiOperation& creation_operation(const std::string& resource, const CompletionContext& ctx) {
  const Resource* r = ctx.tree.find(resource);
  if (!r) throw Error(ErrorCode::UnknownResource, "resource " + resource + " is not in the tree");
  const ApiOperation* op = ctx.spec.find(r->creation_op);
  if (!op) {
    throw Error(ErrorCode::UnknownResource,
                "creation operation " + r->creation_op + " of " + resource + " is not in the spec");
  }
  return *op;
}

std::optional<std::int64_t> numeric_id(const std::string& s) {
  std::int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Smallest synthetic id not below kSyntheticIdBase and above every id in use.
std::int64_t first_free_synthetic(const std::set<ResourceInstance>& in_use) {
  std::int64_t next = kSyntheticIdBase;
  for (const auto& inst : in_use) {
    if (auto v = numeric_id(inst.id_value); v && *v >= next) next = *v + 1;
  }
  return next;
}

}  // namespace

std::map<std::string, std::string> sample_params(const ApiOperation& op,
                                                 const ParameterCorpus& corpus, Rng& rng) {
  std::map<std::string, std::string> params;
  auto combos = corpus.combos.find(op.id);
  if (combos != corpus.combos.end() && !combos->second.empty()) {
    for (const auto& name : rng.pick(combos->second)) {
      params[name] = sample_value(op, name, corpus, rng);
    }
  }
  // Access logs without bodies yield empty combos; required params still go out.
  for (const auto& d : op.parameters) {
    if (d.required && d.location != ParamLocation::Path && !params.count(d.name)) {
      params[d.name] = sample_value(op, d.name, corpus, rng);
    }
  }
  return params;
}

LogEntry create_entry(const ResourceInstance& instance, const CompletionContext& ctx, Rng& rng,
                      const std::map<std::string, ResourceInstance>& bound,
                      std::int64_t& next_synthetic) {
  const ApiOperation& op = creation_operation(instance.resource, ctx);
  LogEntry e;
  e.entry_id = -1;
  e.op = op.id;
  e.creates = instance;
  e.params = sample_params(op, ctx.corpus, rng);
  for (const auto& name : path_param_names(op)) e.params[name];

  for (auto& [name, value] : e.params) {
    auto dep = ctx.deps.lookup(op.id, name);
    if (!dep) {
      if (value.empty() && op.find_param(name) &&
          op.find_param(name)->location == ParamLocation::Path) {
        value = default_value(type_of(op, name), rng);
      }
      e.phi[name] = std::nullopt;
      continue;
    }
    ResourceInstance target;
    if (auto it = bound.find(*dep); it != bound.end()) {
      target = it->second;
    } else {
      target = ResourceInstance{*dep, std::to_string(next_synthetic++)};
    }
    value = target.id_value;
    e.phi[name] = target;
  }
  e.refresh_instances();
  return e;
}

SliceSet augment(const SliceSet& slices, const CompletionContext& ctx, Rng& rng) {
  SliceSet out = slices;
  std::set<OperationId> covered;
  std::set<ResourceInstance> in_use;
  std::int64_t next_entry_id = 1;
  std::int64_t next_slice_id = 1;
  for (const auto& s : slices.slices) {
    next_slice_id = std::max(next_slice_id, s.slice_id + 1);
    for (const auto& e : s.entries) {
      covered.insert(e.op);
      in_use.insert(e.instances.begin(), e.instances.end());
      next_entry_id = std::max(next_entry_id, e.entry_id + 1);
    }
  }
  std::int64_t next_synthetic = first_free_synthetic(in_use);

  for (const auto& op : list_operations(ctx.spec)) {
    if (covered.count(op.id)) continue;
    LogEntry e;
    e.entry_id = next_entry_id++;
    e.op = op.id;
    e.user = "augmented";
    e.params = sample_params(op, ctx.corpus, rng);
    for (const auto& name : path_param_names(op)) e.params[name];
    std::map<std::string, ResourceInstance> local;
    for (auto& [name, value] : e.params) {
      auto dep = ctx.deps.lookup(op.id, name);
      if (!dep) {
        if (value.empty()) value = default_value(type_of(op, name), rng);
        e.phi[name] = std::nullopt;
        continue;
      }
      auto it = local.find(*dep);
      if (it == local.end()) {
        it = local.emplace(*dep, ResourceInstance{*dep, std::to_string(next_synthetic++)}).first;
      }
      value = it->second.id_value;
      e.phi[name] = it->second;
    }
    e.refresh_instances();

    LogSlice slice;
    slice.slice_id = next_slice_id++;
    slice.strategy = SliceStrategy::Augmented;
    slice.user = e.user;
    slice.entries.push_back(std::move(e));
    out.slices.push_back(std::move(slice));
  }
  return out;
}

namespace {

class Completion {
 public:
  Completion(const LogSlice& slice, const CompletionContext& ctx, Rng& rng)
      : slice_(slice), ctx_(ctx), rng_(rng), sigma_(slice.entries) {}

  Seed run() {
    collect_instances();
    link_parents();
    attribute_in_slice();
    revoke_conflicts();
    for (const auto& inst : order_) ensure(inst, 0);
    return assemble();
  }

 private:
  void collect_instances() {
    for (std::size_t j = 0; j < sigma_.size(); ++j) {
      for (const auto& [_, inst] : sigma_[j].phi) {
        if (!inst) continue;
        if (first_ref_.emplace(*inst, j).second) order_.push_back(*inst);
      }
      if (sigma_[j].creates) known_.insert(*sigma_[j].creates);
    }
    for (const auto& inst : order_) {
      creation_operation(inst.resource, ctx_);
      known_.insert(inst);
    }
    next_synthetic_ = first_free_synthetic(known_);
  }

  ResourceInstance fresh(const std::string& resource) {
    ResourceInstance inst{resource, std::to_string(next_synthetic_++)};
    known_.insert(inst);
    return inst;
  }

  // Parent instance of every referenced instance, from co-occurrence within an
  // entry; parents never seen in the slice are synthesized.
  void link_parents() {
    std::vector<ResourceInstance> work = order_;
    for (std::size_t k = 0; k < work.size(); ++k) {
      const ResourceInstance inst = work[k];
      const Resource* r = ctx_.tree.find(inst.resource);
      if (!r || !r->parent || parent_of_.count(inst)) continue;
      std::optional<ResourceInstance> parent;
      for (const auto& e : sigma_) {
        if (!e.instances.count(inst)) continue;
        for (const auto& other : e.instances) {
          if (other.resource == *r->parent) {
            parent = other;
            break;
          }
        }
        if (parent) break;
      }
      if (!parent) {
        parent = fresh(*r->parent);
        work.push_back(*parent);
      }
      parent_of_[inst] = *parent;
    }
  }

  std::map<std::string, ResourceInstance> ancestors_of(const ResourceInstance& inst) const {
    std::map<std::string, ResourceInstance> out;
    for (auto it = parent_of_.find(inst); it != parent_of_.end(); it = parent_of_.find(it->second)) {
      out.emplace(it->second.resource, it->second);
    }
    return out;
  }

  // An instance is created in the slice itself when an earlier entry runs its
  // creation operation under the same parent.
  void attribute_in_slice() {
    for (std::size_t j = 0; j < sigma_.size(); ++j) {
      const auto& c = sigma_[j].creates;
      if (!c) continue;
      auto ref = first_ref_.find(*c);
      if (ref != first_ref_.end() && ref->second <= j) continue;
      if (in_slice_.count(*c)) continue;
      in_slice_[*c] = j;
      used_.insert(j);
    }
    for (const auto& inst : order_) {
      if (in_slice_.count(inst)) continue;
      const OperationId& cop = ctx_.tree.find(inst.resource)->creation_op;
      auto parent = parent_of_.find(inst);
      for (std::size_t j = 0; j < first_ref_.at(inst); ++j) {
        if (used_.count(j) || sigma_[j].op != cop) continue;
        if (parent != parent_of_.end() && !sigma_[j].instances.count(parent->second)) continue;
        in_slice_[inst] = j;
        used_.insert(j);
        break;
      }
    }
  }

  // A prepended creation cannot depend on a parent created later in the slice;
  // such parents are prepended too.
  void revoke_conflicts() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& [inst, _] : parent_of_) {
        if (in_slice_.count(inst)) continue;
        for (auto it = parent_of_.find(inst); it != parent_of_.end();
             it = parent_of_.find(it->second)) {
          auto hit = in_slice_.find(it->second);
          if (hit == in_slice_.end()) continue;
          used_.erase(hit->second);
          in_slice_.erase(hit);
          changed = true;
        }
      }
    }
  }

  bool ensure(const ResourceInstance& inst, int depth) {
    if (in_slice_.count(inst) || prepended_index_.count(inst)) return true;
    if (depth > ctx_.max_synthesis_depth || in_progress_.count(inst)) return false;
    in_progress_.insert(inst);
    if (auto p = parent_of_.find(inst); p != parent_of_.end()) ensure(p->second, depth);

    auto bound = ancestors_of(inst);
    LogEntry e = create_entry(inst, ctx_, rng_, bound, next_synthetic_);
    std::vector<std::string> dropped;
    for (const auto& [name, target] : e.phi) {
      if (!target || bound.count(target->resource)) continue;
      known_.insert(*target);
      link_synthetic(*target, bound);
      if (!ensure(*target, depth + 1)) dropped.push_back(name);
    }
    for (const auto& name : dropped) {
      e.params.erase(name);
      e.phi.erase(name);
    }
    e.refresh_instances();
    e.user = slice_.user;
    e.t = sigma_.empty() ? 0 : sigma_.front().t;
    in_progress_.erase(inst);
    prepended_.push_back(std::move(e));
    prepended_index_[inst] = prepended_.size() - 1;
    return true;
  }

  // Parent for an instance synthesized for a creation entry's dependency: the
  // matching ancestor in scope when there is one, else another fresh instance.
  void link_synthetic(const ResourceInstance& inst,
                      const std::map<std::string, ResourceInstance>& bound) {
    ResourceInstance cur = inst;
    while (!parent_of_.count(cur)) {
      const Resource* r = ctx_.tree.find(cur.resource);
      if (!r || !r->parent) return;
      if (auto it = bound.find(*r->parent); it != bound.end()) {
        parent_of_[cur] = it->second;
        return;
      }
      ResourceInstance p = fresh(*r->parent);
      parent_of_[cur] = p;
      cur = p;
    }
  }

  Seed assemble() {
    Seed seed;
    seed.seed_id = slice_.slice_id;
    seed.prepended = prepended_.size();
    seed.entries = prepended_;
    for (const auto& [inst, j] : in_slice_) sigma_[j].creates = inst;
    seed.entries.insert(seed.entries.end(), sigma_.begin(), sigma_.end());

    std::map<ResourceInstance, std::size_t> creator;
    for (const auto& [inst, k] : prepended_index_) creator[inst] = k;
    for (const auto& [inst, j] : in_slice_) creator[inst] = prepended_.size() + j;

    for (std::size_t j = 0; j < seed.entries.size(); ++j) {
      for (const auto& [name, inst] : seed.entries[j].phi) {
        if (!inst) continue;
        auto it = creator.find(*inst);
        if (it != creator.end() && it->second < j) {
          seed.phi_prime[{j, name}] = it->second;
        } else {
          seed.unbound.insert({j, name});
        }
      }
    }

    seed.origin.slice_id = slice_.slice_id;
    seed.origin.strategy = slice_.strategy;
    for (const auto& e : sigma_) {
      seed.origin.instances.insert(e.instances.begin(), e.instances.end());
    }
    if (!sigma_.empty()) {
      seed.origin.t_begin = sigma_.front().t;
      seed.origin.t_end = sigma_.back().t;
    }
    seed.origin.source = sigma_;
    return seed;
  }

  const LogSlice& slice_;
  const CompletionContext& ctx_;
  Rng& rng_;
  std::vector<LogEntry> sigma_;

  std::vector<ResourceInstance> order_;
  std::map<ResourceInstance, std::size_t> first_ref_;
  std::set<ResourceInstance> known_;
  std::int64_t next_synthetic_ = kSyntheticIdBase;
  std::map<ResourceInstance, ResourceInstance> parent_of_;
  std::map<ResourceInstance, std::size_t> in_slice_;
  std::set<std::size_t> used_;
  std::vector<LogEntry> prepended_;
  std::map<ResourceInstance, std::size_t> prepended_index_;
  std::set<ResourceInstance> in_progress_;
};

}  // namespace

Seed rcsc(const LogSlice& slice, const CompletionContext& ctx, Rng& rng) {
  return Completion(slice, ctx, rng).run();
}

std::vector<Seed> complete_all(const SliceSet& slices, const CompletionContext& ctx, Rng& rng,
                               std::size_t* skipped) {
  std::vector<Seed> seeds;
  seeds.reserve(slices.slices.size());
  for (const auto& s : slices.slices) {
    try {
      seeds.push_back(rcsc(s, ctx, rng));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownResource) throw;
      if (skipped) ++*skipped;
    }
  }
  return seeds;
}

std::vector<std::string> validate_seed(const Seed& seed, const CompletionContext& ctx) {
  std::vector<std::string> problems;
  const auto& E = seed.entries;
  for (std::size_t j = 0; j < E.size(); ++j) {
    for (const auto& [name, _] : E[j].params) {
      auto dep = ctx.deps.lookup(E[j].op, name);
      if (!dep) continue;
      Locus locus{j, name};
      if (seed.unbound.count(locus)) continue;
      auto it = seed.phi_prime.find(locus);
      std::string where = "entry " + std::to_string(j) + " (" + E[j].op + ") param " + name;
      if (it == seed.phi_prime.end()) {
        problems.push_back(where + " has no binding");
        continue;
      }
      if (it->second >= j) {
        problems.push_back(where + " bound to a later entry " + std::to_string(it->second));
        continue;
      }
      const Resource* r = ctx.tree.find(*dep);
      if (!r || E[it->second].op != r->creation_op) {
        problems.push_back(where + " bound to entry " + std::to_string(it->second) +
                           " which does not create " + *dep);
      }
    }
  }
  for (const auto& [locus, target] : seed.phi_prime) {
    if (locus.index >= E.size() || target >= E.size()) {
      problems.push_back("binding index out of range at entry " + std::to_string(locus.index));
    }
  }
  // Instance level: a prepended entry must come after the creator of every
  // ancestor instance it references.
  for (std::size_t a = 0; a < seed.prepended && a < E.size(); ++a) {
    if (!E[a].creates) continue;
    for (const auto& [name, inst] : E[a].phi) {
      if (!inst || !ctx.tree.is_ancestor(inst->resource, E[a].creates->resource)) continue;
      for (std::size_t b = a + 1; b < E.size(); ++b) {
        if (E[b].creates == inst) {
          problems.push_back("prepended entry " + std::to_string(a) + " creates a child of " +
                             to_string(*inst) + " before entry " + std::to_string(b) + " creates it");
        }
      }
    }
  }
  return problems;
}

std::vector<std::string> validate_completion(const LogSlice& slice, const Seed& seed) {
  std::vector<std::string> problems;
  if (seed.entries.size() != seed.prepended + slice.entries.size()) {
    problems.push_back("seed length " + std::to_string(seed.entries.size()) +
                       " != prepended + slice length");
    return problems;
  }
  for (std::size_t k = 0; k < seed.prepended; ++k) {
    if (seed.entries[k].entry_id != -1) {
      problems.push_back("prepended entry " + std::to_string(k) + " carries a log entry id");
    }
  }
  for (std::size_t k = 0; k < slice.entries.size(); ++k) {
    if (seed.entries[seed.prepended + k].entry_id != slice.entries[k].entry_id) {
      problems.push_back("slice entry " + std::to_string(k) + " moved");
    }
  }
  return problems;
}

}  // namespace restlog
