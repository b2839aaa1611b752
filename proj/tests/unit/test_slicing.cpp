#include <gtest/gtest.h>

#include "restlog/slicing.hpp"
#include "support/test_support.hpp"

using namespace restlog;
using test::abstract_entry;
using test::ids_of;
using test::queue_of;
using Ids = std::vector<std::vector<std::int64_t>>;

namespace {

constexpr EpochMs kSec = 1000;

// Approval layout for one user: E3, E5 on project 15 close together, then the
// approve/merge pair E6, E7 well past the lead time.
UserQueue approval_queue() {
  using test::gitlite_entry;
  return queue_of({
      gitlite_entry(3, 0, test::kCreateCommit,
                    {{"id", "15"}, {"branch", "f"}, {"commit_message", "m"}, {"action", "create"}}),
      gitlite_entry(5, 20 * kSec, test::kCreateMr,
                    {{"id", "15"}, {"source_branch", "f"}, {"target_branch", "main"}, {"title", "t"}}),
      gitlite_entry(6, 1200 * kSec, test::kApprove, {{"id", "15"}, {"iid", "3"}}),
      gitlite_entry(7, 1210 * kSec, test::kMerge, {{"id", "15"}, {"iid", "3"}}),
  });
}

}  // namespace

TEST(Mlts, ApprovalLayout) {
  auto out = mlts(approval_queue(), 30 * kSec);
  EXPECT_EQ(ids_of(out), (Ids{{3, 5}, {6, 7}}));
  for (const auto& s : out) EXPECT_EQ(s.strategy, SliceStrategy::Mlts);
}

TEST(Mlts, SingleEntry) {
  EXPECT_EQ(ids_of(mlts(queue_of({abstract_entry(1, 0, {1})}), kSec)), (Ids{{1}}));
  EXPECT_TRUE(mlts(queue_of({}), kSec).empty());
}

TEST(Mlts, TwoInterleavedGroups) {
  std::vector<LogEntry> es;
  for (int i = 0; i < 8; ++i) es.push_back(abstract_entry(i + 1, i * kSec, {i % 2}));
  auto q = queue_of(es);
  auto out = mlts(q, 5 * kSec);
  EXPECT_EQ(ids_of(out), (Ids{{1, 3, 5, 7}, {2, 4, 6, 8}}));
  test::RandomQueue r;
  for (int i = 0; i < 8; ++i) {
    r.t.push_back(i * kSec);
    r.inst.push_back({i % 2});
  }
  EXPECT_EQ(ids_of(out), test::oracle_slices(r, 5 * kSec, true));
}

TEST(Mlts, LeadTimeSlidesWithEachEntry) {
  // Each gap is 20 s; MLTS keeps chaining while STWS cuts at 30 s from the start.
  auto q = queue_of({abstract_entry(1, 0, {1}), abstract_entry(2, 20 * kSec, {1}),
                     abstract_entry(3, 40 * kSec, {1})});
  EXPECT_EQ(ids_of(mlts(q, 30 * kSec)), (Ids{{1, 2, 3}}));
  EXPECT_EQ(ids_of(stws(q, 30 * kSec)), (Ids{{1, 2}, {3}}));
}

TEST(Stws, SpecExamples) {
  auto q = queue_of({abstract_entry(1, 0, {1}), abstract_entry(2, 10 * kSec, {1}),
                     abstract_entry(3, 70 * kSec, {1})});
  EXPECT_EQ(ids_of(stws(q, 60 * kSec)), (Ids{{1, 2}, {3}}));
  EXPECT_EQ(ids_of(stws(queue_of({abstract_entry(1, 0, {1})}), kSec)), (Ids{{1}}));
  auto disjoint = queue_of({abstract_entry(1, 0, {1}), abstract_entry(2, 50 * kSec, {2})});
  EXPECT_EQ(ids_of(stws(disjoint, 60 * kSec)), (Ids{{1}, {2}}));
}

TEST(Slicing, EntriesWithoutInstancesStandAlone) {
  auto q = queue_of({abstract_entry(1, 0, {}), abstract_entry(2, 1, {}),
                     abstract_entry(3, 2, {4}), abstract_entry(4, 3, {4})});
  EXPECT_EQ(ids_of(mlts(q, kSec)), (Ids{{1}, {2}, {3, 4}}));
}

TEST(Slicing, VisitedEntriesNotDuplicated) {
  // Entry 3 is queued while building the first slice and absorbed by the
  // second; it must not start a third.
  auto q = queue_of({abstract_entry(1, 0, {1}), abstract_entry(2, 1, {2}),
                     abstract_entry(3, 2, {2}), abstract_entry(4, 3, {1})});
  auto out = mlts(q, 10 * kSec);
  EXPECT_EQ(ids_of(out), (Ids{{1, 4}, {2, 3}}));
  EXPECT_EQ(test::check_slicing_invariants(q, out, 10 * kSec, true), "");
}

TEST(MergeSliceSets, DedupAndOrder) {
  auto q = approval_queue();
  auto a = mlts(q, 30 * kSec);
  auto b = stws(q, 300 * kSec);
  auto merged = merge_slice_sets({a, b});
  // STWS over 300 s gives {3,5} and {6,7}: identical to MLTS, dropped.
  EXPECT_EQ(merged.slices.size(), 2u);
  EXPECT_EQ(merged.slices[0].slice_id, 1);
  EXPECT_EQ(merged.slices[1].slice_id, 2);

  LogSlice ab, c, abc;
  ab.entries = {abstract_entry(1, 0, {1}), abstract_entry(2, 1, {1})};
  c.entries = {abstract_entry(3, 2, {1})};
  abc.entries = {ab.entries[0], ab.entries[1], c.entries[0]};
  abc.strategy = SliceStrategy::Stws;
  auto m = merge_slice_sets({{ab, c}, {abc}});
  ASSERT_EQ(m.slices.size(), 3u);
  EXPECT_EQ(m.slices[2].strategy, SliceStrategy::Stws);
  EXPECT_EQ(m.slices[2].entry_ids(), (std::vector<std::int64_t>{1, 2, 3}));

  LogSlice d;
  d.entries = {abstract_entry(9, 100, {})};
  auto cat = merge_slice_sets({{ab}, {d}});
  EXPECT_EQ(cat.slices.size(), 2u);
}

TEST(MergeSliceSets, StwsAfterMltsThenByTime) {
  LogSlice late, early, st;
  late.entries = {abstract_entry(2, 50, {})};
  early.entries = {abstract_entry(1, 10, {})};
  st.strategy = SliceStrategy::Stws;
  st.entries = {abstract_entry(3, 0, {})};
  auto m = merge_slice_sets({{late, early}, {st}});
  EXPECT_EQ(ids_of(m.slices), (Ids{{1}, {2}, {3}}));
}

// Library output equals the naive re-trace, and the invariants hold.
TEST(SlicingProperty, MatchesOracleOnRandomQueues) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    auto r = test::random_queue(rng);
    auto q = test::to_queue(r);
    for (EpochMs dt : {EpochMs{0}, 15 * kSec, 30 * kSec, 300 * kSec}) {
      auto a = mlts(q, dt);
      ASSERT_EQ(ids_of(a), test::oracle_slices(r, dt, true)) << "case " << i << " dt " << dt;
      ASSERT_EQ(test::check_slicing_invariants(q, a, dt, true), "") << "case " << i;
      auto b = stws(q, dt);
      ASSERT_EQ(ids_of(b), test::oracle_slices(r, dt, false)) << "case " << i << " dt " << dt;
      ASSERT_EQ(test::check_slicing_invariants(q, b, dt, false), "") << "case " << i;
      ASSERT_EQ(ids_of(mlts(q, dt)), ids_of(a));
    }
  }
}

TEST(SliceQueues, MergesAllUsers) {
  std::map<std::string, UserQueue> qs;
  qs["a"] = queue_of({abstract_entry(1, 0, {1}), abstract_entry(2, 1, {1})}, "a");
  qs["b"] = queue_of({abstract_entry(3, 5, {7})}, "b");
  auto set = slice_queues(qs, 10, 10);
  EXPECT_EQ(ids_of(set.slices), (Ids{{1, 2}, {3}}));
  EXPECT_EQ(set.slices[0].user, "a");
  EXPECT_EQ(set.slices[1].user, "b");
}
