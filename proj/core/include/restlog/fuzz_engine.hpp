#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "restlog/enhancement.hpp"
#include "restlog/executor.hpp"
#include "restlog/reporting.hpp"
#include "restlog/rng.hpp"

namespace restlog {

struct FuzzConfig {
  std::int64_t budget_ms = 60'000;
  double fault_rate = 0.3;
  std::size_t max_seq_len = 64;
  std::uint64_t rng_seed = 0;
  // Consecutive transport failures tolerated before giving up on the target.
  int unreachable_threshold = 20;
  // Print a stats line every N executed sequences (0 disables).
  std::size_t stats_every = 0;
};

struct FuzzStats {
  std::size_t executed_sequences = 0;
  std::size_t executed_requests = 0;
  std::size_t new_coverage_events = 0;
  std::size_t new_bug_events = 0;
  std::size_t business_candidates = 0;
  std::size_t fault_candidates = 0;
  std::size_t rejected_candidates = 0;
  std::size_t pool_size = 0;
  std::int64_t elapsed_ms = 0;

  nlohmann::json to_json() const;
};

enum class MutationKind {
  Splice,
  ReplaceCombo,
  ReplaceValue,
  FaultModifyValue,
  FaultAddParam,
  FaultRemoveParam,
  FaultInsertOp,
  FaultDeleteOp,
  FaultUnbind,
};

std::string_view to_string(MutationKind k);
bool is_fault(MutationKind k);

class SeedPool {
 public:
  explicit SeedPool(std::vector<Seed> seeds = {});

  void add(Seed seed, std::size_t energy = 1);
  // Weighted round-robin: the seed under the cursor is handed out `energy`
  // times in a row before the cursor moves on.
  const Seed& next();
  void reward(std::int64_t seed_id, std::size_t bonus = 1);

  const std::vector<Seed>& seeds() const { return seeds_; }
  std::size_t energy(std::int64_t seed_id) const;
  std::size_t size() const { return seeds_.size(); }
  bool empty() const { return seeds_.empty(); }
  std::int64_t next_id() const { return next_id_; }

 private:
  std::vector<Seed> seeds_;
  std::map<std::int64_t, std::size_t> energy_;
  std::size_t cursor_ = 0;
  std::size_t served_ = 0;
  std::int64_t next_id_ = 1;
};

// Partner for splicing `a`: the other seed sharing the most origin instances,
// ties broken by closer time span, then lower seed id.
std::optional<std::size_t> find_splice_partner(const std::vector<Seed>& pool, const Seed& a);

// Merges the source slices of two seeds by original timestamp (stable, so
// each parent's internal order survives). Throws Error(NoSharedResource) when
// the seeds share no origin instance, std::invalid_argument when a and b are
// the same seed.
LogSlice splice_similar_seeds(const Seed& a, const Seed& b);

// Replaces the parameter set of entry `entry_index` with a sampled corpus
// combo. Path and bound params are kept; new names take corpus values and the
// dependency map decides their phi. Throws Error(EmptyCorpusForOp).
Seed replace_param_combination(const Seed& seed, std::size_t entry_index,
                               const CompletionContext& ctx, Rng& rng);

// Throws Error(EmptyCorpusForParam); std::invalid_argument for a binding locus.
Seed replace_param_value(const Seed& seed, const Locus& locus, const CompletionContext& ctx,
                         Rng& rng);

struct FaultResult {
  MutationKind kind;
  Locus locus;
  std::optional<Seed> seed;  // empty when the edit removed the last entry
};

// Applies exactly one fault-triggering edit.
FaultResult mutate_fault(const Seed& seed, const CompletionContext& ctx, Rng& rng);

// The slice rcsc should re-complete for a business-mutated candidate.
LogSlice source_slice(const Seed& seed);

class FuzzEngine {
 public:
  FuzzEngine(const CompletionContext& ctx, Executor& exec, Reporter& reporter, FuzzConfig cfg);

  // Executes every seed once, unmutated.
  FuzzStats run_once(const std::vector<Seed>& seeds, std::ostream* log = nullptr);
  // Executes the pool unmutated once, then mutates until the budget runs out.
  // Throws Error(TargetUnreachable).
  FuzzStats run(SeedPool& pool, std::ostream* log = nullptr);

 private:
  // Returns true when the sequence produced new coverage.
  bool execute_and_report(const Seed& seed);
  bool out_of_budget();
  std::optional<Seed> business_mutation(SeedPool& pool, const Seed& parent);
  void maybe_log(std::ostream* log);

  const CompletionContext& ctx_;
  Executor& exec_;
  Reporter& reporter_;
  FuzzConfig cfg_;
  Rng rng_;
  FuzzStats stats_;
  std::int64_t start_ms_ = 0;
  int consecutive_transport_errors_ = 0;
};

}  // namespace restlog
