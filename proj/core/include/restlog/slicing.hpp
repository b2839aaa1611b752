#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "restlog/log_ingestion.hpp"

namespace restlog {

enum class SliceStrategy { Mlts, Stws, Augmented };

std::string_view to_string(SliceStrategy s);
std::optional<SliceStrategy> parse_slice_strategy(std::string_view s);

struct LogSlice {
  std::int64_t slice_id = 0;
  std::vector<LogEntry> entries;
  SliceStrategy strategy = SliceStrategy::Mlts;
  std::string user;

  std::vector<std::int64_t> entry_ids() const;
};

struct SliceSet {
  std::vector<LogSlice> slices;
};

inline constexpr std::int64_t kDefaultDtMltMs = 30'000;
inline constexpr std::int64_t kDefaultDtStwMs = 300'000;

// Maximum lead time slicing: consecutive entries of a slice are at most
// `dt_mlt_ms` apart. Each queue entry lands in exactly one slice.
std::vector<LogSlice> mlts(const UserQueue& queue, std::int64_t dt_mlt_ms);
// Sliding time window slicing: a slice spans at most `dt_stw_ms` from its
// first entry. Each queue entry lands in exactly one slice.
std::vector<LogSlice> stws(const UserQueue& queue, std::int64_t dt_stw_ms);

// MLTS slices first, then STWS, each group ordered by first timestamp;
// duplicates (same ordered entry ids) dropped; slice ids reassigned 1, 2, ...
SliceSet merge_slice_sets(const std::vector<std::vector<LogSlice>>& sets);

// Runs both strategies over every queue and merges the result.
SliceSet slice_queues(const std::map<std::string, UserQueue>& queues, std::int64_t dt_mlt_ms,
                      std::int64_t dt_stw_ms);

}  // namespace restlog
