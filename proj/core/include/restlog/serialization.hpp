#pragma once

#include <nlohmann/json.hpp>

#include "restlog/enhancement.hpp"
#include "restlog/executor.hpp"
#include "restlog/log_ingestion.hpp"
#include "restlog/resource_analysis.hpp"
#include "restlog/slicing.hpp"

// JSON shapes of the on-disk artifacts. Readers throw Error(MalformedDocument)
// on shape mismatches.
namespace restlog {

nlohmann::json to_json(const ResourceInstance& inst);
ResourceInstance instance_from_json(const nlohmann::json& j);

// {entry_id, t, op, params, phi, user} plus "creates" when set.
nlohmann::json to_json(const LogEntry& e);
LogEntry entry_from_json(const nlohmann::json& j);

// {slice_id, strategy, user, entry_ids, ops}
nlohmann::json to_json(const LogSlice& s);

// Rebuilds a slice from its entry ids; throws Error(MalformedDocument) when
// an id is missing from `entries`.
LogSlice slice_from_json(const nlohmann::json& j, const std::map<std::int64_t, LogEntry>& entries);

// {combos: {op: [[names...]]}, values: [{op, param, values: [...]}]}
nlohmann::json to_json(const ParameterCorpus& c);
ParameterCorpus corpus_from_json(const nlohmann::json& j);

// {seed_id, entries, phi_prime: [[i, param, j]...], unbound: [[i, param]...], origin}
nlohmann::json to_json(const Seed& s);
// The origin's source slice is rebuilt from the non-prepended entries.
Seed seed_from_json(const nlohmann::json& j);

// Request and response without timing or auth headers.
nlohmann::json to_json(const ResponseRecord& r);

nlohmann::json resources_to_json(const ResourceTree& tree);
ResourceTree resources_from_json(const nlohmann::json& j);
nlohmann::json deps_to_json(const DependencyMap& deps);
DependencyMap deps_from_json(const nlohmann::json& j);

nlohmann::json to_json(const IngestStats& s);

}  // namespace restlog
