#include "restlog/slicing.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace restlog {

std::string_view to_string(SliceStrategy s) {
  switch (s) {
    case SliceStrategy::Mlts: return "mlts";
    case SliceStrategy::Stws: return "stws";
    case SliceStrategy::Augmented: return "augmented";
  }
  return "?";
}

std::optional<SliceStrategy> parse_slice_strategy(std::string_view s) {
  if (s == "mlts") return SliceStrategy::Mlts;
  if (s == "stws") return SliceStrategy::Stws;
  if (s == "augmented") return SliceStrategy::Augmented;
  return std::nullopt;
}

std::vector<std::int64_t> LogSlice::entry_ids() const {
  std::vector<std::int64_t> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.entry_id);
  return ids;
}

namespace {

bool intersects(const std::set<ResourceInstance>& a, const std::set<ResourceInstance>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      return true;
    }
  }
  return false;
}

// Shared skeleton of both strategies. `sliding` selects whether the time
// reference advances with each accepted entry (MLTS) or stays at the slice
// start (STWS).
std::vector<LogSlice> locality_slices(const UserQueue& queue, std::int64_t dt, bool sliding,
                                      SliceStrategy strategy) {
  std::vector<LogSlice> out;
  const auto& E = queue.entries;
  if (E.empty()) return out;

  std::vector<bool> visited(E.size(), false);
  std::deque<std::size_t> Q{0};
  while (!Q.empty()) {
    std::size_t s = Q.front();
    Q.pop_front();
    if (visited[s]) continue;

    LogSlice slice;
    slice.strategy = strategy;
    slice.user = queue.user;
    std::set<ResourceInstance> I = E[s].instances;
    std::int64_t t_ref = E[s].t;
    std::vector<std::size_t> members{s};
    for (std::size_t i = s + 1; i < E.size(); ++i) {
      if (visited[i]) continue;
      if (E[i].t - t_ref > dt) {
        Q.push_back(i);
        break;
      }
      if (!intersects(E[i].instances, I)) {
        Q.push_back(i);
      } else {
        members.push_back(i);
        I.insert(E[i].instances.begin(), E[i].instances.end());
        if (sliding) t_ref = E[i].t;
      }
    }
    for (auto m : members) {
      visited[m] = true;
      slice.entries.push_back(E[m]);
    }
    out.push_back(std::move(slice));
  }
  return out;
}

}  // namespace

std::vector<LogSlice> mlts(const UserQueue& queue, std::int64_t dt_mlt_ms) {
  return locality_slices(queue, dt_mlt_ms, true, SliceStrategy::Mlts);
}

std::vector<LogSlice> stws(const UserQueue& queue, std::int64_t dt_stw_ms) {
  return locality_slices(queue, dt_stw_ms, false, SliceStrategy::Stws);
}

SliceSet merge_slice_sets(const std::vector<std::vector<LogSlice>>& sets) {
  std::vector<const LogSlice*> all;
  for (const auto& set : sets) {
    for (const auto& s : set) {
      if (!s.entries.empty()) all.push_back(&s);
    }
  }
  auto rank = [](SliceStrategy s) { return static_cast<int>(s); };
  std::stable_sort(all.begin(), all.end(), [&](const LogSlice* a, const LogSlice* b) {
    if (rank(a->strategy) != rank(b->strategy)) return rank(a->strategy) < rank(b->strategy);
    return a->entries.front().t < b->entries.front().t;
  });

  SliceSet out;
  std::set<std::vector<std::int64_t>> seen;
  for (const LogSlice* s : all) {
    if (!seen.insert(s->entry_ids()).second) continue;
    out.slices.push_back(*s);
    out.slices.back().slice_id = static_cast<std::int64_t>(out.slices.size());
  }
  return out;
}

SliceSet slice_queues(const std::map<std::string, UserQueue>& queues, std::int64_t dt_mlt_ms,
                      std::int64_t dt_stw_ms) {
  std::vector<LogSlice> by_mlts;
  std::vector<LogSlice> by_stws;
  for (const auto& [_, q] : queues) {
    auto a = mlts(q, dt_mlt_ms);
    auto b = stws(q, dt_stw_ms);
    by_mlts.insert(by_mlts.end(), std::make_move_iterator(a.begin()),
                   std::make_move_iterator(a.end()));
    by_stws.insert(by_stws.end(), std::make_move_iterator(b.begin()),
                   std::make_move_iterator(b.end()));
  }
  return merge_slice_sets({by_mlts, by_stws});
}

}  // namespace restlog
