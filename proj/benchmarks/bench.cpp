#include <benchmark/benchmark.h>

#include <random>

#include "vmodal/cases.hpp"
#include "vmodal/ledger.hpp"

using namespace vmodal;

namespace {

SynthTables dense_tables(std::size_t pages) {
    std::vector<Mapping> ms;
    for (std::size_t i = 0; i < pages; ++i) ms.push_back({0x200000 + i * kPageSize * 7, 0x1000000 + i * kPageSize});
    return *synth_tables(ms, 1);
}

void BM_Translate(benchmark::State& state) {
    const SynthTables t = dense_tables(static_cast<std::size_t>(state.range(0)));
    std::mt19937_64 rng(1);
    std::vector<std::uint64_t> vas;
    for (int i = 0; i < 1024; ++i) vas.push_back(0x200000 + (rng() % state.range(0)) * kPageSize * 7 + (rng() % 512) * 8);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(translate(t.root, t.mem, vas[i++ & 1023]));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Translate)->Arg(16)->Arg(1024);

void BM_Walk(benchmark::State& state) {
    const SynthTables t = dense_tables(64);
    for (auto _ : state) benchmark::DoNotOptimize(walk(t.root, t.mem, 0x200000 + 5 * kPageSize * 7));
}
BENCHMARK(BM_Walk);

void BM_CheckCase(benchmark::State& state, const char* name, CheckMode mode) {
    const CaseStudy c = *case_study(name);
    const CheckSetup setup = c.setup(mode);
    for (auto _ : state) {
        Report r = check_double(c.pre, c.root, c.script, c.stubs, setup, c.expected_post);
        if (!r.ok()) state.SkipWithError("case rejected");
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK_CAPTURE(BM_CheckCase, swtch_coexec, "swtch", CheckMode::Coexec);
BENCHMARK_CAPTURE(BM_CheckCase, swtch_resource, "swtch", CheckMode::ResourceOnly);
BENCHMARK_CAPTURE(BM_CheckCase, map_new_page_coexec, "map_new_page", CheckMode::Coexec);
BENCHMARK_CAPTURE(BM_CheckCase, map_new_page_full_coexec, "map_new_page_full", CheckMode::Coexec)
    ->Unit(benchmark::kMillisecond);

void BM_LowerRender(benchmark::State& state) {
    const CaseStudy c = *case_study("swtch");
    for (auto _ : state) {
        auto l = lower(c.pre, c.root, c.fixture.registry);
        benchmark::DoNotOptimize(render(*l));
    }
}
BENCHMARK(BM_LowerRender);

}  // namespace

BENCHMARK_MAIN();
