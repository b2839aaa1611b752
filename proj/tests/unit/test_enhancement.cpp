#include <gtest/gtest.h>

#include "restlog/enhancement.hpp"
#include "restlog/error.hpp"
#include "support/test_support.hpp"

using namespace restlog;
using test::gitlite_entry;
using test::gitlite_model;
using test::gitlite_spec;

namespace {

struct Fixture {
  ParameterCorpus corpus;
  CompletionContext ctx{gitlite_spec(), gitlite_model().tree, gitlite_model().deps, corpus};
};

LogSlice slice_of(std::vector<LogEntry> es, std::int64_t id = 1) {
  LogSlice s;
  s.slice_id = id;
  s.user = "alice";
  s.entries = std::move(es);
  return s;
}

LogEntry e3() {
  return gitlite_entry(3, 1000, test::kCreateCommit,
                       {{"id", "15"}, {"branch", "f"}, {"commit_message", "m"}, {"action", "create"}},
                       "alice");
}
LogEntry e5() {
  return gitlite_entry(5, 2000, test::kCreateMr,
                       {{"id", "15"}, {"source_branch", "f"}, {"target_branch", "main"}, {"title", "t"}},
                       "alice");
}
LogEntry e6() { return gitlite_entry(6, 9000, test::kApprove, {{"id", "15"}, {"iid", "3"}}, "alice"); }
LogEntry e7() { return gitlite_entry(7, 9500, test::kMerge, {{"id", "15"}, {"iid", "3"}}, "alice"); }

std::vector<OperationId> ops_of(const Seed& s) {
  std::vector<OperationId> out;
  for (const auto& e : s.entries) out.push_back(e.op);
  return out;
}

}  // namespace

TEST(Rcsc, PrependsProjectForS1) {
  Fixture f;
  Rng rng(1);
  Seed seed = rcsc(slice_of({e3(), e5()}), f.ctx, rng);
  EXPECT_EQ(ops_of(seed),
            (std::vector<OperationId>{test::kCreateProject, test::kCreateCommit, test::kCreateMr}));
  EXPECT_EQ(seed.prepended, 1u);
  EXPECT_EQ(seed.phi_prime, (std::map<Locus, std::size_t>{{{1, "id"}, 0}, {{2, "id"}, 0}}));
  EXPECT_EQ(seed.entries[0].creates, test::project("15"));
  EXPECT_EQ(seed.entries[0].entry_id, -1);
  EXPECT_EQ(seed.entries[0].user, "alice");
  EXPECT_EQ(seed.entries[0].t, 1000);
  EXPECT_TRUE(validate_seed(seed, f.ctx).empty());
}

TEST(Rcsc, PrependsProjectAndMrForS2) {
  Fixture f;
  Rng rng(1);
  Seed seed = rcsc(slice_of({e6(), e7()}), f.ctx, rng);
  EXPECT_EQ(ops_of(seed), (std::vector<OperationId>{test::kCreateProject, test::kCreateMr,
                                                    test::kApprove, test::kMerge}));
  EXPECT_EQ(seed.phi_prime, (std::map<Locus, std::size_t>{{{1, "id"}, 0},
                                                          {{2, "id"}, 0},
                                                          {{2, "iid"}, 1},
                                                          {{3, "id"}, 0},
                                                          {{3, "iid"}, 1}}));
  EXPECT_EQ(seed.entries[1].creates, test::mr("3"));
  EXPECT_EQ(seed.entries[1].params.at("id"), "15");
  EXPECT_TRUE(validate_seed(seed, f.ctx).empty());
  EXPECT_TRUE(validate_completion(slice_of({e6(), e7()}), seed).empty());
}

TEST(Rcsc, InSliceCreatorIsReused) {
  Fixture f;
  Rng rng(1);
  // E5 creates the MR later approved in the same slice.
  auto s = slice_of({e5(), e6()});
  s.entries[0].creates = test::mr("3");
  Seed seed = rcsc(s, f.ctx, rng);
  EXPECT_EQ(ops_of(seed),
            (std::vector<OperationId>{test::kCreateProject, test::kCreateMr, test::kApprove}));
  EXPECT_EQ(seed.phi_prime.at({2, "iid"}), 1u);
}

TEST(Rcsc, ZeroInstancesUnchanged) {
  Fixture f;
  Rng rng(1);
  auto s = slice_of({gitlite_entry(1, 0, test::kListProjects, {})});
  Seed seed = rcsc(s, f.ctx, rng);
  EXPECT_EQ(seed.prepended, 0u);
  EXPECT_TRUE(seed.phi_prime.empty());
  ASSERT_EQ(seed.entries.size(), 1u);
  EXPECT_EQ(seed.entries[0].entry_id, 1);
}

TEST(Rcsc, UnknownResource) {
  Fixture f;
  Rng rng(1);
  auto e = gitlite_entry(1, 0, test::kGetProject, {{"id", "1"}});
  e.phi["id"] = ResourceInstance{"/groups", "1"};
  e.refresh_instances();
  try {
    rcsc(slice_of({e}), f.ctx, rng);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::UnknownResource);
  }
  std::size_t skipped = 0;
  SliceSet set;
  set.slices = {slice_of({e}), slice_of({e3()}, 2)};
  auto seeds = complete_all(set, f.ctx, rng, &skipped);
  EXPECT_EQ(skipped, 1u);
  EXPECT_EQ(seeds.size(), 1u);
}

TEST(Rcsc, MissingParentIsSynthesized) {
  Fixture f;
  Rng rng(4);
  // An MR reference whose project never shows up as a separate instance.
  auto e = gitlite_entry(1, 0, test::kGetMr, {{"iid", "3"}, {"id", "15"}});
  e.phi.erase("id");
  e.params.erase("id");
  e.refresh_instances();
  Seed seed = rcsc(slice_of({e}), f.ctx, rng);
  ASSERT_EQ(seed.prepended, 2u);
  EXPECT_EQ(seed.entries[0].op, test::kCreateProject);
  EXPECT_EQ(seed.entries[0].creates->id_value, std::to_string(kSyntheticIdBase));
  EXPECT_EQ(seed.entries[1].phi.at("id"), seed.entries[0].creates);
  EXPECT_EQ(seed.phi_prime.at({1, "id"}), 0u);
}

TEST(CreateEntry, UsesCorpusCombo) {
  Fixture f;
  f.corpus.combos[test::kCreateProject] = {{"name", "visibility"}};
  f.corpus.values[{test::kCreateProject, "name"}] = {"web"};
  f.corpus.values[{test::kCreateProject, "visibility"}] = {"internal"};
  Rng rng(1);
  std::int64_t next = kSyntheticIdBase;
  LogEntry e = create_entry(test::project("15"), f.ctx, rng, {}, next);
  EXPECT_EQ(e.op, test::kCreateProject);
  EXPECT_EQ(e.params,
            (std::map<std::string, std::string>{{"name", "web"}, {"visibility", "internal"}}));
  EXPECT_EQ(e.creates, test::project("15"));
  EXPECT_EQ(next, kSyntheticIdBase);
}

TEST(CreateEntry, EmptyCorpusFillsRequiredOnly) {
  Fixture f;
  Rng rng(1);
  std::int64_t next = kSyntheticIdBase;
  LogEntry e = create_entry(test::project("15"), f.ctx, rng, {}, next);
  ASSERT_EQ(e.params.size(), 1u);
  EXPECT_TRUE(e.params.count("name"));
}

TEST(CreateEntry, MergeRequestBindsProject) {
  Fixture f;
  Rng rng(1);
  std::int64_t next = kSyntheticIdBase;
  LogEntry e = create_entry(test::mr("3"), f.ctx, rng, {{test::kProjects, test::project("15")}}, next);
  EXPECT_EQ(e.op, test::kCreateMr);
  EXPECT_EQ(e.params.at("id"), "15");
  EXPECT_EQ(e.phi.at("id"), test::project("15"));
  for (const char* p : {"source_branch", "target_branch", "title"}) EXPECT_TRUE(e.params.count(p));
  // Unbound parent gets a fresh synthetic instance.
  LogEntry u = create_entry(test::mr("4"), f.ctx, rng, {}, next);
  EXPECT_EQ(u.phi.at("id"), test::project(std::to_string(kSyntheticIdBase)));
  EXPECT_EQ(next, kSyntheticIdBase + 1);
  EXPECT_THROW(create_entry({"/groups", "1"}, f.ctx, rng, {}, next), Error);
}

TEST(Augment, AddsMissingOperations) {
  Fixture f;
  Rng rng(1);
  SliceSet empty;
  auto all = augment(empty, f.ctx, rng);
  ASSERT_EQ(all.slices.size(), gitlite_spec().operations.size());
  for (const auto& s : all.slices) {
    EXPECT_EQ(s.strategy, SliceStrategy::Augmented);
    ASSERT_EQ(s.entries.size(), 1u);
    EXPECT_EQ(s.entries[0].user, "augmented");
  }

  SliceSet partial;
  std::int64_t id = 1;
  for (const auto& [op, _] : gitlite_spec().operations) {
    if (op == test::kCreateProject) continue;
    std::map<std::string, std::string> params;
    for (const auto& seg : gitlite_spec().at(op).path) {
      if (seg.is_param()) params[seg.text] = "1";
    }
    partial.slices.push_back(slice_of({gitlite_entry(id, id, op, params)}, id));
    ++id;
  }
  auto out = augment(partial, f.ctx, rng);
  ASSERT_EQ(out.slices.size(), partial.slices.size() + 1);
  EXPECT_EQ(out.slices.back().entries[0].op, test::kCreateProject);
  EXPECT_EQ(out.slices.back().slice_id, id);

  auto fixed = augment(out, f.ctx, rng);
  EXPECT_EQ(fixed.slices.size(), out.slices.size());
}

TEST(Augment, DependentParamsUseSyntheticIds) {
  Fixture f;
  Rng rng(1);
  auto all = augment(SliceSet{}, f.ctx, rng);
  for (const auto& s : all.slices) {
    const auto& e = s.entries[0];
    if (e.op != test::kMerge) continue;
    EXPECT_EQ(e.phi.at("id")->resource, test::kProjects);
    EXPECT_EQ(e.phi.at("iid")->resource, test::kMergeRequests);
    EXPECT_GE(std::stoll(e.params.at("id")), kSyntheticIdBase);
  }
  Seed seed = rcsc(all.slices.back(), f.ctx, rng);
  EXPECT_TRUE(validate_seed(seed, f.ctx).empty());
}

TEST(RcscProperty, RandomGitliteSlicesPassValidators) {
  Fixture f;
  f.corpus.combos[test::kCreateProject] = {{"name"}, {"name", "visibility"}};
  f.corpus.values[{test::kCreateProject, "name"}] = {"a", "b"};
  Rng gen(99);
  Rng rng(100);
  for (int i = 0; i < 1000; ++i) {
    LogSlice s = test::random_gitlite_slice(gen);
    Seed seed = rcsc(s, f.ctx, rng);
    auto v = test::check_completion(s, seed, gitlite_model().tree);
    ASSERT_TRUE(v.empty()) << "case " << i << ": " << v.front();
    auto lib = validate_seed(seed, f.ctx);
    ASSERT_TRUE(lib.empty()) << "case " << i << ": " << lib.front();
    ASSERT_TRUE(validate_completion(s, seed).empty()) << "case " << i;
  }
}

TEST(Rcsc, DeterministicForSameRng) {
  Fixture f;
  Rng gen(5);
  for (int i = 0; i < 50; ++i) {
    LogSlice s = test::random_gitlite_slice(gen);
    Rng a(7), b(7);
    Seed x = rcsc(s, f.ctx, a);
    Seed y = rcsc(s, f.ctx, b);
    ASSERT_EQ(ops_of(x), ops_of(y));
    ASSERT_EQ(x.phi_prime, y.phi_prime);
  }
}

TEST(ValidateSeed, FlagsBrokenBinding) {
  Fixture f;
  Rng rng(1);
  Seed seed = rcsc(slice_of({e6(), e7()}), f.ctx, rng);
  seed.phi_prime[{3, "iid"}] = 3;
  EXPECT_FALSE(validate_seed(seed, f.ctx).empty());
  Seed reordered = rcsc(slice_of({e6(), e7()}), f.ctx, rng);
  std::swap(reordered.entries[2], reordered.entries[3]);
  EXPECT_FALSE(validate_completion(slice_of({e6(), e7()}), reordered).empty());
}
