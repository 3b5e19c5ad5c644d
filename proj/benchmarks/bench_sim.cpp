#include <benchmark/benchmark.h>

#include <random>

#include "nmpsim/engine.hpp"
#include "nmpsim/kernels.hpp"

using namespace nmpsim;

namespace {

ModelConfig bench_model(int hidden, int layers, int heads, int ffn) {
    ModelConfig cfg;
    cfg.name = "bench";
    cfg.hidden_dim = hidden;
    cfg.num_layers = layers;
    cfg.num_heads = heads;
    cfg.head_dim = hidden / heads;
    cfg.ffn_dim = ffn;
    cfg.vocab_size = 32000;
    cfg.encoder_tokens_out = 1;
    cfg.kv_bytes_per_token_per_layer = cfg.derived_kv_bytes_per_token_per_layer();
    return cfg;
}

Matrix random_matrix(std::mt19937& rng, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> d(-1, 1);
    Matrix m(r, c);
    for (double& v : m.data()) v = d(rng);
    return m;
}

}  // namespace

static void BM_BuildGraph(benchmark::State& state) {
    const ModelConfig cfg = bench_model(2048, 24, 16, 5632);
    const int steps = static_cast<int>(state.range(0));
    for (auto _ : state) {
        OperatorGraph g = build_graph(cfg, 128, {}, steps);
        benchmark::DoNotOptimize(g.nodes.data());
    }
    state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_BuildGraph)->Arg(64)->Arg(488);

static void BM_SimulateDecode(benchmark::State& state) {
    RunInputs in;
    in.model = bench_model(2048, 24, 16, 5632);
    in.platform = default_platform();
    in.prompt_tokens = 128;
    in.image = {};
    in.output_tokens = static_cast<int>(state.range(0));
    for (auto _ : state) {
        SimReport rep = simulate(in);
        benchmark::DoNotOptimize(rep.total_latency_ns);
    }
    state.SetItemsProcessed(state.iterations() * in.output_tokens);
}
BENCHMARK(BM_SimulateDecode)->Arg(64)->Arg(488)->Unit(benchmark::kMillisecond);

static void BM_StreamingAttention(benchmark::State& state) {
    std::mt19937 rng(1);
    const std::size_t ctx = static_cast<std::size_t>(state.range(0));
    const auto q = random_matrix(rng, 1, 64);
    const auto k_t = random_matrix(rng, 64, ctx);
    const auto v = random_matrix(rng, ctx, 64);
    for (auto _ : state) {
        Matrix out = fused_attn_stream(q, k_t, v, 0.125, 128);
        benchmark::DoNotOptimize(out.data().data());
    }
    state.SetItemsProcessed(state.iterations() * ctx);
}
BENCHMARK(BM_StreamingAttention)->Arg(512)->Arg(4096);

static void BM_KvRebalance(benchmark::State& state) {
    const ModelConfig cfg = bench_model(2048, 24, 16, 5632);
    const DramChipletSpec dram;
    auto blocks = make_kv_blocks(cfg, state.range(0), 64);
    KvBudget budget;
    budget.dram_tier_bytes.assign(dram.tiers, 200'000'000);
    budget.rram_bytes = 1ll << 32;
    for (auto _ : state) {
        auto copy = blocks;
        assign_kv(copy, dram, budget, HotnessPolicy::Recency);
        benchmark::DoNotOptimize(copy.data());
    }
}
BENCHMARK(BM_KvRebalance)->Arg(1024)->Arg(4096);

BENCHMARK_MAIN();
