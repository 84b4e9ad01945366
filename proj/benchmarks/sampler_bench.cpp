// Per-iteration cost of dense SGMC against SGMC-M as K grows.

#include <benchmark/benchmark.h>

#include "ammsb/graph.hpp"
#include "ammsb/samplers.hpp"
#include "ammsb/sparse_approx.hpp"

namespace {

const ammsb::Graph& bench_graph() {
  static const ammsb::Graph g = [] {
    ammsb::Rng rng = ammsb::make_stream(7, ammsb::Stream::kGenerator);
    return ammsb::generate_ammsb(1500, 50, 0.02, ammsb::BetaPrior{9.0, 1.0}, 1e-4, rng).graph;
  }();
  return g;
}

ammsb::SamplerConfig bench_config(int K) {
  ammsb::SamplerConfig cfg;
  cfg.hp = ammsb::HyperParams::defaults(K);
  cfg.m = ammsb::default_stratification(bench_graph().num_nodes());
  cfg.global_update_fraction = ammsb::default_global_fraction(K);
  cfg.seed = 11;
  return cfg;
}

void BM_DenseStep(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto& g = bench_graph();
  const ammsb::HeldOutSplit none(g.num_nodes());
  const auto cfg = bench_config(K);
  ammsb::DenseSampler sampler(g, none, cfg, ammsb::init_state(cfg.hp, g.num_nodes(), cfg.seed));
  for (auto _ : state) sampler.step();
}

void BM_SparseStep(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto& g = bench_graph();
  const ammsb::HeldOutSplit none(g.num_nodes());
  const auto cfg = bench_config(K);
  ammsb::SparseSampler sampler(g, none, cfg,
                               ammsb::init_sparse_model(cfg.hp, g, cfg.tau, cfg.seed));
  for (auto _ : state) sampler.step();
  state.counters["mem_ratio"] = sampler.model().mean_memory_ratio();
}

}  // namespace

BENCHMARK(BM_DenseStep)->Arg(30)->Arg(100)->Arg(300)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SparseStep)->Arg(30)->Arg(100)->Arg(300)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
