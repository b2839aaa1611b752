#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "restlog/log_ingestion.hpp"
#include "restlog/resource_analysis.hpp"
#include "restlog/rng.hpp"
#include "restlog/slicing.hpp"
#include "restlog/spec_model.hpp"

namespace restlog {

// A parameter of one entry in a sequence.
struct Locus {
  std::size_t index = 0;
  std::string param;

  friend auto operator<=>(const Locus&, const Locus&) = default;
  friend bool operator==(const Locus&, const Locus&) = default;
};

struct SeedOrigin {
  std::int64_t slice_id = 0;
  SliceStrategy strategy = SliceStrategy::Mlts;
  std::set<ResourceInstance> instances;
  EpochMs t_begin = 0;
  EpochMs t_end = 0;
  // The slice the seed was completed from, before any creation entries were
  // prepended. Splicing works on these.
  std::vector<LogEntry> source;
};

struct Seed {
  std::int64_t seed_id = 0;
  std::vector<LogEntry> entries;
  // (entry index, param) → index of the entry that creates the bound instance.
  std::map<Locus, std::size_t> phi_prime;
  // Binding params whose runtime assignment is disabled; the raw value is sent.
  std::set<Locus> unbound;
  std::size_t prepended = 0;
  SeedOrigin origin;
};

// Read-only inputs shared by augmentation, completion and mutation.
struct CompletionContext {
  const ServiceSpec& spec;
  const ResourceTree& tree;
  const DependencyMap& deps;
  const ParameterCorpus& corpus;
  int max_synthesis_depth = 4;
};

// First id handed out for instances that never appeared in the logs.
inline constexpr std::int64_t kSyntheticIdBase = 900001;

// Value for a parameter with no corpus sample, driven by its schema type.
std::string default_value(SchemaType type, Rng& rng);

// Parameter names and values for a fresh request to `op`: one sampled corpus
// combo when the corpus has any, else the required non-path parameters.
// Path parameters are not included.
std::map<std::string, std::string> sample_params(const ApiOperation& op,
                                                 const ParameterCorpus& corpus, Rng& rng);

// Builds the creation request for `instance`. Parameters that depend on a
// resource in `bound` (resource name → instance) get phi to that instance;
// other dependent parameters get phi to fresh synthetic instances, named via
// `next_synthetic`, which the caller must create first.
// Throws Error(UnknownResource) when the resource has no creation operation.
LogEntry create_entry(const ResourceInstance& instance, const CompletionContext& ctx, Rng& rng,
                      const std::map<std::string, ResourceInstance>& bound,
                      std::int64_t& next_synthetic);

// Adds one single-entry slice per spec operation not present in `slices`.
SliceSet augment(const SliceSet& slices, const CompletionContext& ctx, Rng& rng);

// Resource-consistency completion: prepends creation entries for every
// instance the slice references but does not itself create, and records which
// entry creates each bound instance.
// Throws Error(UnknownResource) when an instance's resource is not in the tree.
Seed rcsc(const LogSlice& slice, const CompletionContext& ctx, Rng& rng);

// Completes every slice; slices that fail with UnknownResource are skipped
// and counted in `skipped`.
std::vector<Seed> complete_all(const SliceSet& slices, const CompletionContext& ctx, Rng& rng,
                               std::size_t* skipped = nullptr);

// Empty when the seed satisfies the binding invariants: every dependent,
// non-unbound param maps to an earlier entry running the dependency's creation
// operation, and prepended ancestors precede their descendants.
std::vector<std::string> validate_seed(const Seed& seed, const CompletionContext& ctx);

// Empty when `seed` keeps the entries of `slice` in their original order after
// the prepended block.
std::vector<std::string> validate_completion(const LogSlice& slice, const Seed& seed);

}  // namespace restlog
