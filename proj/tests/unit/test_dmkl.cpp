#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "support/testing.hpp"

using namespace hagg;

namespace {

double oracle_loss(const PairBatch& batch, const std::vector<PooledTree>& trees, const std::vector<double>& raw,
                   bool averaging, double gamma, double margin) {
  const auto beta = oracle::softmax(raw);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto [i, j] = batch.pairs[b];
    const double k = oracle::combined(trees[i], trees[j], beta, averaging, KernelKind::rbf, gamma);
    total += batch.y[b] > 0 ? (1.0 - k) * (1.0 - k) : std::pow(std::max(0.0, k - margin), 2);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<int> cycling_labels(std::size_t n, int classes) {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(1 + static_cast<int>(i % static_cast<std::size_t>(classes)));
  return out;
}

}  // namespace

TEST_CASE("all pairs of a small label list") {
  const auto batch = all_pairs(std::vector<int>{1, 1, 2});
  REQUIRE(batch.size() == 3);
  CHECK(batch.pairs[0] == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(batch.pairs[1] == std::pair<std::size_t, std::size_t>{0, 2});
  CHECK(batch.pairs[2] == std::pair<std::size_t, std::size_t>{1, 2});
  CHECK(batch.y == std::vector<int>{1, -1, -1});
  CHECK_THROWS_AS(all_pairs(std::vector<int>{1}), Error);
}

TEST_CASE("pair sampler") {
  const auto labels = cycling_labels(30, 3);
  SUBCASE("same seed, same batches; pairs are ordered and labelled") {
    PairSampler a(labels, 7), b(labels, 7);
    for (int round = 0; round < 5; ++round) {
      const auto x = a.next(100), y = b.next(100);
      CHECK(x.pairs == y.pairs);
      CHECK(x.y == y.y);
      for (std::size_t k = 0; k < x.size(); ++k) {
        const auto [i, j] = x.pairs[k];
        CHECK(i < j);
        CHECK(j < labels.size());
        CHECK(x.y[k] == (labels[i] == labels[j] ? 1 : -1));
      }
    }
    CHECK(a.pairs_consumed() == 500);
    CHECK(a.distinct_pairs() <= 435);
    CHECK(a.distinct_pairs() > 30);
  }
  SUBCASE("available pair counts") {
    PairSampler s(labels, 0);
    CHECK(s.positive_pairs_available() == 3 * 45);
    CHECK(s.negative_pairs_available() == 435 - 135);
  }
  SUBCASE("positive fraction controls the mix") {
    PairSampler all_pos(labels, 1, 1.0), all_neg(labels, 1, 0.0), half(labels, 1, 0.5);
    for (int y : all_pos.next(64).y) CHECK(y == 1);
    for (int y : all_neg.next(64).y) CHECK(y == -1);
    const auto mixed = half.next(64);
    CHECK(std::count(mixed.y.begin(), mixed.y.end(), 1) == 32);
  }
}

TEST_CASE("contrastive loss values") {
  CHECK(contrastive_loss(std::vector<double>{0.5}, std::vector<int>{1}) == 0.25);
  CHECK(contrastive_loss(std::vector<double>{0.5}, std::vector<int>{-1}) == 0.25);
  CHECK(contrastive_loss(std::vector<double>{-0.2}, std::vector<int>{-1}) == 0.0);
  CHECK(contrastive_loss(std::vector<double>{1.0, 0.2}, std::vector<int>{1, -1}, 0.2) == 0.0);
  CHECK(contrastive_loss(std::vector<double>{0.5, 0.5}, std::vector<int>{1, -1}) == 0.25);
  const auto g = contrastive_loss_grad(std::vector<double>{0.5, 0.7}, std::vector<int>{1, -1}, 0.2);
  CHECK(g[0] == doctest::Approx(-0.5));
  CHECK(g[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(contrastive_loss(std::vector<double>{0.5}, std::vector<int>{1, 1}), Error);
  CHECK_THROWS_AS(contrastive_loss(std::vector<double>{}, std::vector<int>{}), Error);
  CHECK_THROWS_AS(contrastive_loss(std::vector<double>{0.5}, std::vector<int>{0}), Error);
}

TEST_CASE("loss gradient agrees with central differences of an independent loss") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const bool averaging = seed % 2 == 1;
    const auto variant = averaging ? CombineVariant::averaging : CombineVariant::concatenation;
    const auto trees = testing::random_trees(8, 3, 3, seed, 0.6);
    const auto labels = cycling_labels(trees.size(), 2);
    const auto batch = all_pairs(labels);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> raw(7);
    for (double& r : raw) r = normal(rng);
    const double gamma = 0.4, margin = seed % 3 == 0 ? 0.1 : 0.0;
    const NodeKernelTable table(trees, variant, KernelConfig{KernelKind::rbf, gamma});
    const auto lg = loss_grad(batch, table, raw, margin);
    CHECK(lg.loss == doctest::Approx(oracle_loss(batch, trees, raw, averaging, gamma, margin)).epsilon(1e-12));
    const auto fd = oracle::central_diff(
        [&](const std::vector<double>& r) { return oracle_loss(batch, trees, r, averaging, gamma, margin); }, raw);
    double scale = 0.0, err = 0.0;
    for (std::size_t p = 0; p < raw.size(); ++p) {
      scale = std::max(scale, std::abs(fd[p]));
      err = std::max(err, std::abs(fd[p] - lg.raw[p]));
    }
    CHECK(err <= 1e-5 * std::max(scale, 1e-3));
    // gradients in raw space sum to zero (softmax is shift invariant)
    double total = 0.0;
    for (double g : lg.raw) total += g;
    CHECK(std::abs(total) <= 1e-12);
  }
}

TEST_CASE("lazy and cached tables give the same gradient") {
  const auto trees = testing::random_trees(9, 2, 4, 3);
  const auto batch = all_pairs(cycling_labels(9, 3));
  const std::vector<double> raw{0.1, -0.4, 0.7};
  const KernelConfig kc{KernelKind::rbf, 0.2};
  for (auto variant : {CombineVariant::concatenation, CombineVariant::averaging}) {
    const auto cached = loss_grad(batch, NodeKernelTable(trees, variant, kc), raw);
    const auto lazy = loss_grad(batch, trees, raw, variant, kc);
    CHECK(cached.loss == lazy.loss);
    CHECK(cached.raw == lazy.raw);
  }
}

TEST_CASE("zero loss gives a zero gradient") {
  auto tree = testing::random_tree(3, 4, 1);
  const std::vector<PooledTree> trees{tree, tree, tree};
  const auto batch = all_pairs(std::vector<int>{1, 1, 1});
  const NodeKernelTable table(trees, CombineVariant::concatenation, KernelConfig{KernelKind::rbf, 1.0});
  const auto lg = loss_grad(batch, table, std::vector<double>(7, 0.0));
  CHECK(lg.loss <= 1e-28);
  for (double g : lg.raw) CHECK(std::abs(g) <= 1e-14);
}

TEST_CASE("single positive pair at uniform weights, concatenation") {
  const auto trees = testing::random_trees(2, 2, 3, 8);
  PairBatch batch;
  batch.pairs = {{0, 1}};
  batch.y = {1};
  const NodeKernelTable table(trees, CombineVariant::concatenation, KernelConfig{KernelKind::rbf, 0.5});
  const auto lg = loss_grad(batch, table, std::vector<double>(3, 0.0));
  std::vector<double> kappa(3);
  double k = 0.0;
  for (std::size_t p = 0; p < 3; ++p) {
    kappa[p] = oracle::node_kernel(trees[0], p, trees[1], p, KernelKind::rbf, 0.5);
    k += kappa[p] / 3.0;
  }
  double mean_kappa = (kappa[0] + kappa[1] + kappa[2]) / 3.0;
  for (std::size_t p = 0; p < 3; ++p) {
    CHECK(lg.beta[p] == doctest::Approx(2.0 * (k - 1.0) * kappa[p]));
    CHECK(lg.raw[p] == doctest::Approx(2.0 * (k - 1.0) * (kappa[p] - mean_kappa) / 3.0));
  }
}

TEST_CASE("per-pair shared-network gradient equals the batch gradient") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto trees = testing::random_trees(7, 3, 3, seed + 40);
    const auto batch = all_pairs(cycling_labels(7, 2));
    std::vector<double> raw(7);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (double& r : raw) r = normal(rng);
    for (auto variant : {CombineVariant::concatenation, CombineVariant::averaging}) {
      const NodeKernelTable table(trees, variant, KernelConfig{KernelKind::rbf, 0.3});
      const auto shared = shared_network_grad(batch, table, raw);
      const auto direct = loss_grad(batch, table, raw).raw;
      for (std::size_t p = 0; p < raw.size(); ++p) CHECK(shared[p] == doctest::Approx(direct[p]).epsilon(1e-12).scale(1e-12));
    }
  }
}

TEST_CASE("adaptive-moment step") {
  ContrastiveConfig cfg;
  cfg.lr = 0.1;
  MomentState state(2);
  std::vector<double> raw{0.0, 0.0};
  adam_step(state, std::vector<double>{2.0, -0.5}, raw, cfg);
  // the first bias-corrected step moves each coordinate by lr against the gradient sign
  CHECK(raw[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(raw[1] == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(state.step == 1);
}

TEST_CASE("contrastive fit") {
  SynthSpec spec;
  spec.classes = 3;
  spec.per_class = 8;
  spec.frames = 16;
  spec.dim = 6;
  spec.seed = 2;
  std::vector<PooledTree> trees;
  std::vector<int> labels;
  for (const auto& v : generate(spec)) {
    trees.push_back(pool_sequence(v.appearance, Hierarchy(3)));
    labels.push_back(v.label);
  }
  const KernelConfig kc{KernelKind::rbf, median_gamma(trees)};
  ContrastiveConfig cfg;
  cfg.iters = 60;
  cfg.batch = 128;
  cfg.lr = 0.05;
  cfg.eval_pairs = 256;

  SUBCASE("zero learning rate keeps uniform weights and a flat trace") {
    cfg.lr = 0.0;
    const auto fit = dmkl_fit(trees, labels, CombineVariant::concatenation, kc, cfg);
    CHECK(fit.beta == std::vector<double>(7, 1.0 / 7));
    for (const auto& row : fit.trace) CHECK(row.eval_loss == fit.trace[0].eval_loss);
  }
  SUBCASE("loss goes down, weights stay on the simplex, more pairs than videos") {
    for (auto variant : {CombineVariant::concatenation, CombineVariant::averaging}) {
      int steps = 0;
      const auto fit = dmkl_fit(trees, labels, variant, kc, cfg, [&](std::span<const double> beta) {
        CHECK(on_simplex(beta, 1e-9));
        ++steps;
      });
      CHECK(steps == cfg.iters);
      CHECK(fit.trace.size() == static_cast<std::size_t>(cfg.iters) + 1);
      CHECK(fit.trace.back().eval_loss <= fit.trace.front().eval_loss);
      CHECK(fit.pairs_consumed == static_cast<std::size_t>(cfg.iters) * cfg.batch);
      CHECK(fit.distinct_pairs > trees.size());
    }
  }
  SUBCASE("same seed, same result") {
    const auto a = dmkl_fit(trees, labels, CombineVariant::averaging, kc, cfg);
    const auto b = dmkl_fit(trees, labels, CombineVariant::averaging, kc, cfg);
    CHECK(a.beta == b.beta);
    CHECK(a.raw == b.raw);
  }
  SUBCASE("worker count does not change the result") {
    const auto a = dmkl_fit(trees, labels, CombineVariant::concatenation, kc, cfg);
    setenv("HAGG_WORKERS", "3", 1);
    const auto b = dmkl_fit(trees, labels, CombineVariant::concatenation, kc, cfg);
    unsetenv("HAGG_WORKERS");
    CHECK(a.beta == b.beta);
  }
  SUBCASE("one-level hierarchy keeps the single weight") {
    std::vector<PooledTree> flat;
    for (const auto& t : trees) {
      PooledTree f = t;
      f.depth = 1;
      f.nodes = t.nodes.topRows(1);
      flat.push_back(f);
    }
    const auto fit = dmkl_then_svm(flat, labels, CombineVariant::concatenation, kc, cfg, TrainConfig{});
    CHECK(fit.fit.beta == std::vector<double>{1.0});
    CHECK(fit.model.num_classes() == 3);
  }
  SUBCASE("one class is rejected") {
    CHECK_THROWS_AS(dmkl_fit(trees, std::vector<int>(trees.size(), 1), CombineVariant::concatenation, kc, cfg), Error);
  }
}
