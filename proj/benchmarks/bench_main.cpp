#include <sstream>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "restlog/pipeline.hpp"
#include "restlog/scenario.hpp"
#include "restlog/testbed.hpp"

using namespace restlog;

namespace {

const ServiceSpec& gitlite_spec() {
  static const ServiceSpec spec = parse_spec(gitlite::openapi_document(), DocumentFormat::Json);
  return spec;
}

// One user's queue: n entries, a few seconds apart, each touching up to two
// of `instances` ids.
UserQueue synthetic_queue(std::size_t n, std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  UserQueue q;
  q.user = "bench";
  EpochMs t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    LogEntry e;
    e.entry_id = static_cast<std::int64_t>(i + 1);
    t += static_cast<EpochMs>(rng.below(40'000));
    e.t = t;
    e.op = "GET /things/:id";
    for (std::size_t k = rng.below(3); k > 0; --k) {
      e.instances.insert({"/things", std::to_string(rng.below(instances))});
    }
    q.entries.push_back(std::move(e));
  }
  return q;
}

void BM_Mlts(benchmark::State& state) {
  UserQueue q = synthetic_queue(static_cast<std::size_t>(state.range(0)), 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(mlts(q, kDefaultDtMltMs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Mlts)->RangeMultiplier(4)->Range(16, 4096);

void BM_Stws(benchmark::State& state) {
  UserQueue q = synthetic_queue(static_cast<std::size_t>(state.range(0)), 32, 1);
  for (auto _ : state) benchmark::DoNotOptimize(stws(q, kDefaultDtStwMs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Stws)->RangeMultiplier(4)->Range(16, 4096);

void BM_CompleteDefaultScenario(benchmark::State& state) {
  PipelineConfig cfg;
  const ServiceSpec& spec = gitlite_spec();
  ResourceModel model = stage_analyze(spec, cfg);
  Rng gen(3);
  std::stringstream text;
  for (const auto& l : gitlite::generate_hrlogs(gitlite::default_scenario(), LogFormat::Json, gen)) {
    text << l << '\n';
  }
  IngestStats stats;
  auto records = parse_log_stream(text, LogFormat::Json, {}, stats);
  auto sliced = stage_slice_records(records, spec, model, cfg);
  CompletionContext ctx{spec, model.tree, model.deps, sliced.data.corpus};
  for (auto _ : state) {
    Rng rng(5);
    benchmark::DoNotOptimize(complete_all(sliced.slices, ctx, rng));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(sliced.slices.slices.size()));
}
BENCHMARK(BM_CompleteDefaultScenario);

void BM_MatchUri(benchmark::State& state) {
  const ServiceSpec& spec = gitlite_spec();
  const std::vector<std::pair<Method, std::string>> paths = {
      {Method::Get, "/projects"},
      {Method::Get, "/projects/15"},
      {Method::Post, "/projects/15/commits"},
      {Method::Get, "/projects/15/merge_requests/3"},
      {Method::Put, "/projects/15/merge_requests/3/merge"},
      {Method::Get, "/metrics"},
  };
  for (auto _ : state) {
    for (const auto& [m, p] : paths) benchmark::DoNotOptimize(match_uri(spec, m, p));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(paths.size()));
}
BENCHMARK(BM_MatchUri);

}  // namespace

BENCHMARK_MAIN();
