#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "hagg/hagg.hpp"

using namespace hagg;

namespace {

StreamFeatureSequence noise_sequence(std::size_t frames, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  StreamFeatureSequence seq;
  seq.video_id = "v" + std::to_string(seed);
  seq.frames.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < seq.frames.size(); ++i) seq.frames.data()[i] = normal(rng);
  return seq;
}

std::vector<PooledTree> noise_trees(std::size_t n, int depth, std::size_t dim) {
  std::vector<PooledTree> trees;
  for (std::size_t i = 0; i < n; ++i) trees.push_back(pool_sequence(noise_sequence(32, dim, i), Hierarchy(depth)));
  return trees;
}

std::vector<int> cycling_labels(std::size_t n, int classes) {
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(1 + static_cast<int>(i % static_cast<std::size_t>(classes)));
  return labels;
}

CombineVariant variant_arg(std::int64_t v) { return v ? CombineVariant::averaging : CombineVariant::concatenation; }

}  // namespace

static void BM_PoolSequence(benchmark::State& state) {
  const auto seq = noise_sequence(static_cast<std::size_t>(state.range(0)), 2048, 1);
  const Hierarchy hierarchy(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(pool_sequence(seq, hierarchy));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PoolSequence)->Args({64, 4})->Args({256, 6});

static void BM_GramMatrix(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(1));
  const auto trees = noise_trees(static_cast<std::size_t>(state.range(0)), depth, 64);
  const std::vector<double> beta(Hierarchy(depth).node_count(), 1.0 / static_cast<double>(Hierarchy(depth).node_count()));
  const KernelConfig kc{KernelKind::rbf, 0.01};
  for (auto _ : state) benchmark::DoNotOptimize(gram_matrix(trees, beta, variant_arg(state.range(2)), kc));
}
BENCHMARK(BM_GramMatrix)->Args({100, 4, 0})->Args({100, 4, 1})->Args({200, 6, 0})->Unit(benchmark::kMillisecond);

static void BM_SolveDual(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto trees = noise_trees(n, 1, 32);
  const auto gram = gram_matrix(trees, std::vector<double>{1.0}, CombineVariant::concatenation,
                                KernelConfig{KernelKind::rbf, 0.02});
  const auto labels = one_vs_rest_labels(cycling_labels(n, 2), 1);
  TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(solve_dual(gram.values, labels, cfg));
}
BENCHMARK(BM_SolveDual)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

static void BM_LossGrad(benchmark::State& state) {
  const int depth = 4;
  const auto trees = noise_trees(200, depth, 16);
  const auto variant = variant_arg(state.range(0));
  const NodeKernelTable table(trees, variant, KernelConfig{KernelKind::rbf, 0.05});
  PairSampler sampler(cycling_labels(trees.size(), 4), 0);
  const auto batch = sampler.next(2048);
  const std::vector<double> raw(Hierarchy(depth).node_count(), 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(loss_grad(batch, table, raw));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_LossGrad)->Arg(0)->Arg(1);
BENCHMARK_MAIN();
