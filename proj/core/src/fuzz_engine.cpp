#include "restlog/fuzz_engine.hpp"

#include <algorithm>
#include <stdexcept>

#include "restlog/error.hpp"

namespace restlog {

nlohmann::json FuzzStats::to_json() const {
  return {{"executed_sequences", executed_sequences},
          {"executed_requests", executed_requests},
          {"new_coverage_events", new_coverage_events},
          {"new_bug_events", new_bug_events},
          {"business_candidates", business_candidates},
          {"fault_candidates", fault_candidates},
          {"rejected_candidates", rejected_candidates},
          {"pool_size", pool_size},
          {"elapsed_ms", elapsed_ms}};
}

std::string_view to_string(MutationKind k) {
  switch (k) {
    case MutationKind::Splice: return "splice";
    case MutationKind::ReplaceCombo: return "replace_combo";
    case MutationKind::ReplaceValue: return "replace_value";
    case MutationKind::FaultModifyValue: return "fault_modify_value";
    case MutationKind::FaultAddParam: return "fault_add_param";
    case MutationKind::FaultRemoveParam: return "fault_remove_param";
    case MutationKind::FaultInsertOp: return "fault_insert_op";
    case MutationKind::FaultDeleteOp: return "fault_delete_op";
    case MutationKind::FaultUnbind: return "fault_unbind";
  }
  return "?";
}

bool is_fault(MutationKind k) {
  return k != MutationKind::Splice && k != MutationKind::ReplaceCombo &&
         k != MutationKind::ReplaceValue;
}

SeedPool::SeedPool(std::vector<Seed> seeds) {
  for (auto& s : seeds) add(std::move(s));
}

void SeedPool::add(Seed seed, std::size_t energy) {
  if (seed.seed_id <= 0 || energy_.count(seed.seed_id)) seed.seed_id = next_id_;
  next_id_ = std::max(next_id_, seed.seed_id + 1);
  energy_[seed.seed_id] = std::max<std::size_t>(energy, 1);
  seeds_.push_back(std::move(seed));
}

const Seed& SeedPool::next() {
  if (seeds_.empty()) throw std::logic_error("SeedPool::next on empty pool");
  if (cursor_ >= seeds_.size()) cursor_ = 0;
  const Seed& s = seeds_[cursor_];
  if (++served_ >= energy_[s.seed_id]) {
    served_ = 0;
    cursor_ = (cursor_ + 1) % seeds_.size();
  }
  return s;
}

void SeedPool::reward(std::int64_t seed_id, std::size_t bonus) {
  if (auto it = energy_.find(seed_id); it != energy_.end()) it->second += bonus;
}

std::size_t SeedPool::energy(std::int64_t seed_id) const {
  auto it = energy_.find(seed_id);
  return it == energy_.end() ? 0 : it->second;
}

namespace {

std::size_t shared_count(const Seed& a, const Seed& b) {
  std::size_t n = 0;
  for (const auto& inst : a.origin.instances) n += b.origin.instances.count(inst);
  return n;
}

std::int64_t span_gap(const SeedOrigin& a, const SeedOrigin& b) {
  return std::max<std::int64_t>(0, std::max(a.t_begin, b.t_begin) - std::min(a.t_end, b.t_end));
}

}  // namespace

std::optional<std::size_t> find_splice_partner(const std::vector<Seed>& pool, const Seed& a) {
  std::optional<std::size_t> best;
  std::size_t best_shared = 0;
  std::int64_t best_gap = 0;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const Seed& b = pool[k];
    if (b.seed_id == a.seed_id) continue;
    std::size_t shared = shared_count(a, b);
    if (shared == 0) continue;
    std::int64_t gap = span_gap(a.origin, b.origin);
    bool better = !best || shared > best_shared ||
                  (shared == best_shared && gap < best_gap) ||
                  (shared == best_shared && gap == best_gap && b.seed_id < pool[*best].seed_id);
    if (better) {
      best = k;
      best_shared = shared;
      best_gap = gap;
    }
  }
  return best;
}

LogSlice splice_similar_seeds(const Seed& a, const Seed& b) {
  if (a.seed_id == b.seed_id) throw std::invalid_argument("cannot splice a seed with itself");
  if (shared_count(a, b) == 0) {
    throw Error(ErrorCode::NoSharedResource, "seeds " + std::to_string(a.seed_id) + " and " +
                                                 std::to_string(b.seed_id) +
                                                 " share no resource instance");
  }
  LogSlice out;
  out.slice_id = a.origin.slice_id;
  out.strategy = a.origin.strategy;
  out.entries.reserve(a.origin.source.size() + b.origin.source.size());
  std::merge(a.origin.source.begin(), a.origin.source.end(), b.origin.source.begin(),
             b.origin.source.end(), std::back_inserter(out.entries),
             [](const LogEntry& x, const LogEntry& y) { return x.t < y.t; });
  for (auto& e : out.entries) e.creates.reset();
  if (!out.entries.empty()) out.user = out.entries.front().user;
  return out;
}

LogSlice source_slice(const Seed& seed) {
  LogSlice s;
  s.slice_id = seed.origin.slice_id;
  s.strategy = seed.origin.strategy;
  s.entries.assign(seed.entries.begin() + static_cast<std::ptrdiff_t>(seed.prepended),
                   seed.entries.end());
  if (!s.entries.empty()) s.user = s.entries.front().user;
  return s;
}

namespace {

bool is_path_param(const ApiOperation* op, const std::string& name) {
  if (!op) return false;
  const ParamDecl* d = op->find_param(name);
  return d && d->location == ParamLocation::Path;
}

void set_param(LogEntry& e, const std::string& name, const std::string& value,
               const CompletionContext& ctx) {
  e.params[name] = value;
  auto dep = ctx.deps.lookup(e.op, name);
  e.phi[name] = dep ? std::optional<ResourceInstance>(ResourceInstance{*dep, value}) : std::nullopt;
}

}  // namespace

Seed replace_param_combination(const Seed& seed, std::size_t entry_index,
                               const CompletionContext& ctx, Rng& rng) {
  if (entry_index >= seed.entries.size()) throw std::out_of_range("entry index out of range");
  Seed out = seed;
  LogEntry& e = out.entries[entry_index];
  auto combos = ctx.corpus.combos.find(e.op);
  if (combos == ctx.corpus.combos.end() || combos->second.empty()) {
    throw Error(ErrorCode::EmptyCorpusForOp, "no parameter combination observed for " + e.op);
  }
  const std::set<std::string>& combo = rng.pick(combos->second);
  const ApiOperation* op = ctx.spec.find(e.op);

  std::map<std::string, std::string> old = e.params;
  for (const auto& [name, value] : old) {
    bool keep = combo.count(name) || is_path_param(op, name) ||
                (e.phi.count(name) && e.phi.at(name).has_value());
    if (!keep) {
      e.params.erase(name);
      e.phi.erase(name);
    }
  }
  for (const auto& name : combo) {
    if (e.params.count(name)) continue;
    std::string value;
    if (const auto* pool = ctx.corpus.values_for(e.op, name); pool && !pool->empty()) {
      value = rng.pick(*pool);
    } else {
      const ParamDecl* d = op ? op->find_param(name) : nullptr;
      value = default_value(d ? d->schema_type : SchemaType::String, rng);
    }
    set_param(e, name, value, ctx);
  }
  e.refresh_instances();
  return out;
}

Seed replace_param_value(const Seed& seed, const Locus& locus, const CompletionContext& ctx,
                         Rng& rng) {
  if (locus.index >= seed.entries.size()) throw std::out_of_range("entry index out of range");
  const LogEntry& e = seed.entries[locus.index];
  auto phi = e.phi.find(locus.param);
  if (phi != e.phi.end() && phi->second) {
    throw std::invalid_argument("param " + locus.param + " binds a resource; its value is not mutable");
  }
  const auto* pool = ctx.corpus.values_for(e.op, locus.param);
  if (!pool || pool->empty()) {
    throw Error(ErrorCode::EmptyCorpusForParam,
                "no observed values for " + e.op + " param " + locus.param);
  }
  Seed out = seed;
  out.entries[locus.index].params[locus.param] = rng.pick(*pool);
  out.entries[locus.index].phi.try_emplace(locus.param, std::nullopt);
  return out;
}

namespace {

const std::vector<std::string>& garbage_tokens() {
  static const std::vector<std::string> tokens = {
      "0", "-1", "2147483647", "", "null", "' OR 1=1", "%00", std::string(300, 'A')};
  return tokens;
}

std::string garbage_unlike(const std::string& current, Rng& rng) {
  std::vector<std::string> choices;
  for (const auto& t : garbage_tokens()) {
    if (t != current) choices.push_back(t);
  }
  return rng.pick(choices);
}

// Index remapping after inserting at `at` (delta +1) or deleting `at` (delta -1).
std::optional<std::size_t> remap(std::size_t i, std::size_t at, int delta) {
  if (delta > 0) return i >= at ? i + 1 : i;
  if (i == at) return std::nullopt;
  return i > at ? i - 1 : i;
}

void reindex(Seed& s, std::size_t at, int delta) {
  std::map<Locus, std::size_t> phi;
  std::set<Locus> unbound;
  for (const auto& [locus, target] : s.phi_prime) {
    auto li = remap(locus.index, at, delta);
    if (!li) continue;
    auto ti = remap(target, at, delta);
    if (!ti) {
      unbound.insert({*li, locus.param});
    } else {
      phi[{*li, locus.param}] = *ti;
    }
  }
  for (const auto& locus : s.unbound) {
    if (auto li = remap(locus.index, at, delta)) unbound.insert({*li, locus.param});
  }
  s.phi_prime = std::move(phi);
  s.unbound = std::move(unbound);
  if (delta > 0 && at < s.prepended) ++s.prepended;
  if (delta < 0 && at < s.prepended) --s.prepended;
}

LogEntry random_operation_entry(const CompletionContext& ctx, Rng& rng) {
  const ApiOperation& op = rng.pick(ctx.spec.operations).second;
  LogEntry e;
  e.entry_id = -1;
  e.op = op.id;
  e.params = sample_params(op, ctx.corpus, rng);
  for (const auto& seg : op.path) {
    if (seg.is_param()) e.params[seg.text];
  }
  for (auto& [name, value] : e.params) {
    auto dep = ctx.deps.lookup(op.id, name);
    if (dep) {
      value = std::to_string(kSyntheticIdBase + static_cast<std::int64_t>(rng.below(99999)));
      e.phi[name] = ResourceInstance{*dep, value};
    } else {
      if (value.empty()) {
        const ParamDecl* d = op.find_param(name);
        value = default_value(d ? d->schema_type : SchemaType::String, rng);
      }
      e.phi[name] = std::nullopt;
    }
  }
  e.refresh_instances();
  return e;
}

}  // namespace

FaultResult mutate_fault(const Seed& seed, const CompletionContext& ctx, Rng& rng) {
  if (seed.entries.empty()) throw std::invalid_argument("fault mutation needs a non-empty sequence");

  std::vector<Locus> value_loci;
  std::vector<Locus> removable;
  for (std::size_t j = 0; j < seed.entries.size(); ++j) {
    const LogEntry& e = seed.entries[j];
    const ApiOperation* op = ctx.spec.find(e.op);
    for (const auto& [name, _] : e.params) {
      if (!is_path_param(op, name)) value_loci.push_back({j, name});
      const ParamDecl* d = op ? op->find_param(name) : nullptr;
      if (d && d->required && d->location != ParamLocation::Path) removable.push_back({j, name});
    }
  }
  std::vector<Locus> bound;
  for (const auto& [locus, _] : seed.phi_prime) bound.push_back(locus);

  std::vector<MutationKind> kinds = {MutationKind::FaultAddParam, MutationKind::FaultDeleteOp};
  if (!value_loci.empty()) kinds.push_back(MutationKind::FaultModifyValue);
  if (!removable.empty()) kinds.push_back(MutationKind::FaultRemoveParam);
  if (!ctx.spec.operations.empty()) kinds.push_back(MutationKind::FaultInsertOp);
  if (!bound.empty()) kinds.push_back(MutationKind::FaultUnbind);
  std::sort(kinds.begin(), kinds.end());

  FaultResult result{rng.pick(kinds), {}, seed};
  Seed& s = *result.seed;
  switch (result.kind) {
    case MutationKind::FaultModifyValue: {
      Locus l = rng.pick(value_loci);
      auto& value = s.entries[l.index].params[l.param];
      value = garbage_unlike(value, rng);
      if (s.phi_prime.erase(l)) s.unbound.insert(l);
      result.locus = l;
      break;
    }
    case MutationKind::FaultAddParam: {
      static const std::vector<std::string> names = {"admin", "debug", "callback", "_method",
                                                     "force", "sudo"};
      std::size_t j = rng.below(s.entries.size());
      LogEntry& e = s.entries[j];
      const ApiOperation* op = ctx.spec.find(e.op);
      std::vector<std::string> fresh;
      for (const auto& n : names) {
        if (!e.params.count(n) && !(op && op->find_param(n))) fresh.push_back(n);
      }
      std::string name = fresh.empty() ? "x_fuzz_" + std::to_string(e.params.size()) : rng.pick(fresh);
      e.params[name] = garbage_unlike("", rng);
      e.phi[name] = std::nullopt;
      result.locus = {j, name};
      break;
    }
    case MutationKind::FaultRemoveParam: {
      Locus l = rng.pick(removable);
      LogEntry& e = s.entries[l.index];
      e.params.erase(l.param);
      e.phi.erase(l.param);
      e.refresh_instances();
      s.phi_prime.erase(l);
      s.unbound.erase(l);
      result.locus = l;
      break;
    }
    case MutationKind::FaultInsertOp: {
      std::size_t at = rng.below(s.entries.size() + 1);
      LogEntry e = random_operation_entry(ctx, rng);
      e.t = at < s.entries.size() ? s.entries[at].t : s.entries.back().t;
      e.user = s.entries[std::min(at, s.entries.size() - 1)].user;
      reindex(s, at, +1);
      // Dependencies bind to the nearest earlier creator of their resource.
      for (auto& [name, inst] : e.phi) {
        if (!inst) continue;
        std::optional<std::size_t> creator;
        for (std::size_t j = at; j-- > 0;) {
          if (ctx.tree.created_by(s.entries[j].op) == inst->resource) {
            creator = j;
            break;
          }
        }
        if (!creator) {
          s.unbound.insert({at, name});
          continue;
        }
        const LogEntry& c = s.entries[*creator];
        if (c.creates && c.creates->resource == inst->resource) {
          inst = *c.creates;
          e.params[name] = inst->id_value;
        }
        s.phi_prime[{at, name}] = *creator;
      }
      e.refresh_instances();
      s.entries.insert(s.entries.begin() + static_cast<std::ptrdiff_t>(at), std::move(e));
      result.locus = {at, {}};
      break;
    }
    case MutationKind::FaultDeleteOp: {
      std::size_t at = rng.below(s.entries.size());
      reindex(s, at, -1);
      s.entries.erase(s.entries.begin() + static_cast<std::ptrdiff_t>(at));
      result.locus = {at, {}};
      if (s.entries.empty()) result.seed.reset();
      break;
    }
    case MutationKind::FaultUnbind: {
      Locus l = rng.pick(bound);
      s.phi_prime.erase(l);
      s.unbound.insert(l);
      result.locus = l;
      break;
    }
    default:
      break;
  }
  return result;
}

FuzzEngine::FuzzEngine(const CompletionContext& ctx, Executor& exec, Reporter& reporter,
                       FuzzConfig cfg)
    : ctx_(ctx), exec_(exec), reporter_(reporter), cfg_(cfg), rng_(cfg.rng_seed) {}

bool FuzzEngine::out_of_budget() { return exec_.clock().now_ms() - start_ms_ >= cfg_.budget_ms; }

bool FuzzEngine::execute_and_report(const Seed& seed) {
  Witness witness{seed, exec_.execute(seed)};
  ++stats_.executed_sequences;
  stats_.executed_requests += witness.responses.size();
  bool new_coverage = false;
  for (const auto& r : witness.responses) {
    if (r.status == 0) {
      if (++consecutive_transport_errors_ >= cfg_.unreachable_threshold) {
        throw Error(ErrorCode::TargetUnreachable,
                    exec_.target().describe() + " failed " +
                        std::to_string(consecutive_transport_errors_) +
                        " requests in a row; last error: " + r.body);
      }
    } else {
      consecutive_transport_errors_ = 0;
    }
    for (const auto& ev : reporter_.record_response(r, r.finished_ms - start_ms_, &witness)) {
      if (ev.kind == EventKind::NewCoverage) {
        ++stats_.new_coverage_events;
        new_coverage = true;
      } else {
        ++stats_.new_bug_events;
      }
    }
  }
  return new_coverage;
}

void FuzzEngine::maybe_log(std::ostream* log) {
  if (!log || cfg_.stats_every == 0 || stats_.executed_sequences % cfg_.stats_every != 0) return;
  *log << "[fuzz] t=" << exec_.clock().now_ms() - start_ms_ << "ms seqs=" << stats_.executed_sequences
       << " reqs=" << stats_.executed_requests << " covered=" << reporter_.covered().size() << "/"
       << reporter_.total_operations() << " bugs=" << reporter_.bugs().size()
       << " pool=" << stats_.pool_size << "\n";
}

FuzzStats FuzzEngine::run_once(const std::vector<Seed>& seeds, std::ostream* log) {
  stats_ = {};
  start_ms_ = exec_.clock().now_ms();
  for (const auto& seed : seeds) {
    if (out_of_budget()) break;
    if (seed.entries.empty()) continue;
    execute_and_report(seed);
    maybe_log(log);
  }
  stats_.pool_size = seeds.size();
  stats_.elapsed_ms = exec_.clock().now_ms() - start_ms_;
  return stats_;
}

std::optional<Seed> FuzzEngine::business_mutation(SeedPool& pool, const Seed& parent) {
  std::vector<std::size_t> combo_targets;
  std::vector<Locus> value_targets;
  for (std::size_t j = parent.prepended; j < parent.entries.size(); ++j) {
    const LogEntry& e = parent.entries[j];
    if (auto it = ctx_.corpus.combos.find(e.op); it != ctx_.corpus.combos.end() && !it->second.empty()) {
      combo_targets.push_back(j);
    }
    for (const auto& [name, _] : e.params) {
      auto phi = e.phi.find(name);
      if (phi != e.phi.end() && phi->second) continue;
      if (const auto* values = ctx_.corpus.values_for(e.op, name); values && !values->empty()) {
        value_targets.push_back({j, name});
      }
    }
  }
  auto partner = find_splice_partner(pool.seeds(), parent);

  std::vector<MutationKind> kinds;
  if (partner) kinds.push_back(MutationKind::Splice);
  if (!combo_targets.empty()) kinds.push_back(MutationKind::ReplaceCombo);
  if (!value_targets.empty()) kinds.push_back(MutationKind::ReplaceValue);
  if (kinds.empty()) return std::nullopt;

  LogSlice slice;
  switch (rng_.pick(kinds)) {
    case MutationKind::Splice:
      slice = splice_similar_seeds(parent, pool.seeds()[*partner]);
      break;
    case MutationKind::ReplaceCombo:
      slice = source_slice(replace_param_combination(parent, rng_.pick(combo_targets), ctx_, rng_));
      break;
    case MutationKind::ReplaceValue:
      slice = source_slice(replace_param_value(parent, rng_.pick(value_targets), ctx_, rng_));
      break;
    default:
      return std::nullopt;
  }
  if (slice.entries.empty()) return std::nullopt;
  Seed candidate = rcsc(slice, ctx_, rng_);
  candidate.seed_id = 0;
  return candidate;
}

FuzzStats FuzzEngine::run(SeedPool& pool, std::ostream* log) {
  stats_ = {};
  start_ms_ = exec_.clock().now_ms();
  consecutive_transport_errors_ = 0;
  stats_.pool_size = pool.size();
  if (pool.empty()) return stats_;

  const std::size_t initial = pool.size();
  for (std::size_t k = 0; k < initial && !out_of_budget(); ++k) {
    const Seed seed = pool.seeds()[k];
    if (seed.entries.empty()) continue;
    if (execute_and_report(seed)) pool.reward(seed.seed_id);
    maybe_log(log);
  }

  while (!out_of_budget()) {
    const Seed parent = pool.next();
    std::optional<Seed> candidate;
    try {
      candidate = business_mutation(pool, parent);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownResource) throw;
    }
    bool business_valid = false;
    if (candidate) {
      ++stats_.business_candidates;
      if (candidate->entries.size() > cfg_.max_seq_len || !validate_seed(*candidate, ctx_).empty()) {
        ++stats_.rejected_candidates;
        candidate.reset();
      } else {
        business_valid = true;
      }
    }
    Seed to_run = candidate ? *candidate : parent;

    if (rng_.chance(cfg_.fault_rate)) {
      FaultResult fault = mutate_fault(to_run, ctx_, rng_);
      ++stats_.fault_candidates;
      if (fault.seed) {
        to_run = std::move(*fault.seed);
      } else {
        ++stats_.rejected_candidates;
      }
    }

    bool fresh = execute_and_report(to_run);
    if (fresh) {
      pool.reward(parent.seed_id);
      // The business-valid candidate joins the pool even when a fault edit was
      // layered on top: it differs from the executed mutant in one locus.
      if (business_valid) {
        pool.add(*candidate, 2);
        stats_.pool_size = pool.size();
      }
    }
    maybe_log(log);
  }
  stats_.pool_size = pool.size();
  stats_.elapsed_ms = exec_.clock().now_ms() - start_ms_;
  return stats_;
}

}  // namespace restlog
