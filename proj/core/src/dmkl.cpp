#include "hagg/dmkl.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hagg/error.hpp"
#include "hagg/parallel.hpp"
#include "hagg/simplex.hpp"

namespace hagg {

namespace {

constexpr std::size_t kPairChunk = 256;

std::pair<std::size_t, std::size_t> ordered(std::size_t a, std::size_t b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

double pair_loss(double k, int y, double margin) {
  if (y > 0) return (1.0 - k) * (1.0 - k);
  const double excess = std::max(0.0, k - margin);
  return excess * excess;
}

double pair_loss_derivative(double k, int y, double margin) {
  if (y > 0) return -2.0 * (1.0 - k);
  return k > margin ? 2.0 * (k - margin) : 0.0;
}

void check_labels(std::span<const double> k, std::span<const int> y) {
  if (k.size() != y.size()) {
    fail(Errc::shape_mismatch, std::to_string(k.size()) + " kernel values for " + std::to_string(y.size()) + " labels");
  }
  if (k.empty()) fail(Errc::empty_input, "contrastive loss over an empty batch");
  for (int v : y) {
    if (v != 1 && v != -1) fail(Errc::invalid_config, "pair labels must be +1 or -1");
  }
}

void check_batch(const PairBatch& batch, const NodeKernelTable& table, std::span<const double> raw) {
  if (raw.size() != table.node_count()) {
    fail(Errc::shape_mismatch, std::to_string(raw.size()) + " raw weights for " +
                                   std::to_string(table.node_count()) + " nodes");
  }
  if (batch.y.size() != batch.pairs.size()) fail(Errc::shape_mismatch, "pair batch has mismatched labels");
  if (batch.pairs.empty()) fail(Errc::empty_input, "empty pair batch");
  for (const auto& [i, j] : batch.pairs) {
    if (i >= table.rows() || j >= table.cols()) fail(Errc::shape_mismatch, "pair index outside the kernel table");
  }
}

}  // namespace

PairBatch all_pairs(std::span<const int> labels) {
  if (labels.size() < 2) fail(Errc::too_few_videos, "pairs need at least 2 videos");
  PairBatch batch;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      batch.pairs.emplace_back(i, j);
      batch.y.push_back(labels[i] == labels[j] ? 1 : -1);
    }
  }
  return batch;
}

PairSampler::PairSampler(std::span<const int> labels, std::uint64_t seed, std::optional<double> positive_fraction)
    : labels_(labels.begin(), labels.end()), positive_fraction_(positive_fraction), rng_(seed) {
  if (labels_.size() < 2) fail(Errc::too_few_videos, "pair sampling needs at least 2 videos");
  if (positive_fraction_ && !(*positive_fraction_ >= 0.0 && *positive_fraction_ <= 1.0)) {
    fail(Errc::invalid_config, "positive fraction must lie in [0, 1]");
  }
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels_.size(); ++i) groups[labels_[i]].push_back(i);
  for (auto& [label, idx] : groups) {
    const std::size_t count = idx.size() * (idx.size() - 1) / 2;
    class_pair_counts_.push_back(static_cast<double>(count));
    positive_total_ += count;
    members_.push_back(std::move(idx));
  }
  const std::size_t n = labels_.size();
  negative_total_ = n * (n - 1) / 2 - positive_total_;
}

std::pair<std::size_t, std::size_t> PairSampler::any_pair() {
  const std::size_t n = labels_.size();
  std::uniform_int_distribution<std::size_t> first(0, n - 1), second(0, n - 2);
  const std::size_t i = first(rng_);
  std::size_t j = second(rng_);
  if (j >= i) ++j;
  return ordered(i, j);
}

std::pair<std::size_t, std::size_t> PairSampler::positive_pair() {
  std::uniform_int_distribution<std::size_t> pick(0, positive_total_ - 1);
  std::size_t r = pick(rng_);
  std::size_t c = 0;
  while (r >= static_cast<std::size_t>(class_pair_counts_[c])) {
    r -= static_cast<std::size_t>(class_pair_counts_[c]);
    ++c;
  }
  const auto& idx = members_[c];
  std::uniform_int_distribution<std::size_t> first(0, idx.size() - 1), second(0, idx.size() - 2);
  const std::size_t a = first(rng_);
  std::size_t b = second(rng_);
  if (b >= a) ++b;
  return ordered(idx[a], idx[b]);
}

std::pair<std::size_t, std::size_t> PairSampler::negative_pair() {
  for (;;) {
    const auto pair = any_pair();
    if (labels_[pair.first] != labels_[pair.second]) return pair;
  }
}

void PairSampler::record(PairBatch& batch, std::pair<std::size_t, std::size_t> pair) {
  batch.pairs.push_back(pair);
  batch.y.push_back(labels_[pair.first] == labels_[pair.second] ? 1 : -1);
  seen_.insert(static_cast<std::uint64_t>(pair.first) * labels_.size() + pair.second);
  ++consumed_;
}

PairBatch PairSampler::next(std::size_t batch_size) {
  PairBatch batch;
  batch.pairs.reserve(batch_size);
  batch.y.reserve(batch_size);
  if (!positive_fraction_) {
    for (std::size_t b = 0; b < batch_size; ++b) record(batch, any_pair());
    return batch;
  }
  std::size_t positives = static_cast<std::size_t>(std::llround(*positive_fraction_ * static_cast<double>(batch_size)));
  if (positive_total_ == 0) positives = 0;
  if (negative_total_ == 0) positives = batch_size;
  for (std::size_t b = 0; b < positives; ++b) record(batch, positive_pair());
  for (std::size_t b = positives; b < batch_size; ++b) record(batch, negative_pair());
  return batch;
}

double contrastive_loss(std::span<const double> k, std::span<const int> y, double margin) {
  check_labels(k, y);
  double total = 0.0;
  for (std::size_t b = 0; b < k.size(); ++b) total += pair_loss(k[b], y[b], margin);
  return total / static_cast<double>(k.size());
}

std::vector<double> contrastive_loss_grad(std::span<const double> k, std::span<const int> y, double margin) {
  check_labels(k, y);
  std::vector<double> out(k.size());
  const double scale = 1.0 / static_cast<double>(k.size());
  for (std::size_t b = 0; b < k.size(); ++b) out[b] = scale * pair_loss_derivative(k[b], y[b], margin);
  return out;
}

LossGradient loss_grad(const PairBatch& batch, const NodeKernelTable& table, std::span<const double> raw,
                       double margin) {
  check_batch(batch, table, raw);
  const std::vector<double> beta = to_simplex(raw);
  const std::size_t nodes = beta.size();
  const std::size_t count = batch.size();
  const double scale = 1.0 / static_cast<double>(count);

  LossGradient out;
  out.kernel.resize(count);
  const std::size_t chunks = (count + kPairChunk - 1) / kPairChunk;
  std::vector<std::vector<double>> partial(chunks);
  std::vector<double> chunk_loss(chunks, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    std::vector<double> scratch, dk(nodes), acc(nodes, 0.0);
    double loss = 0.0;
    const std::size_t end = std::min(count, (c + 1) * kPairChunk);
    for (std::size_t b = c * kPairChunk; b < end; ++b) {
      const auto block = table.block(batch.pairs[b].first, batch.pairs[b].second, scratch);
      const double k = combine_block(block, beta, table.variant());
      out.kernel[b] = k;
      loss += pair_loss(k, batch.y[b], margin);
      const double dE_dk = scale * pair_loss_derivative(k, batch.y[b], margin);
      if (dE_dk == 0.0) continue;
      combine_block_grad(block, beta, table.variant(), dk);
      for (std::size_t p = 0; p < nodes; ++p) acc[p] += dE_dk * dk[p];
    }
    partial[c] = std::move(acc);
    chunk_loss[c] = loss;
  });

  out.beta.assign(nodes, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    out.loss += chunk_loss[c];
    for (std::size_t p = 0; p < nodes; ++p) out.beta[p] += partial[c][p];
  }
  out.loss *= scale;
  out.raw = backprop_through_simplex(out.beta, beta);
  return out;
}

LossGradient loss_grad(const PairBatch& batch, std::span<const PooledTree> trees, std::span<const double> raw,
                       CombineVariant variant, const KernelConfig& kernel, double margin) {
  const NodeKernelTable table(trees, variant, kernel, 0);
  return loss_grad(batch, table, raw, margin);
}

std::vector<double> shared_network_grad(const PairBatch& batch, const NodeKernelTable& table,
                                        std::span<const double> raw, double margin) {
  check_batch(batch, table, raw);
  const std::vector<double> beta = to_simplex(raw);
  std::vector<std::vector<double>> copies(batch.size());
  parallel_for(batch.size(), [&](std::size_t b) {
    std::vector<double> scratch, dk(beta.size());
    const auto block = table.block(batch.pairs[b].first, batch.pairs[b].second, scratch);
    const double k = combine_block(block, beta, table.variant());
    combine_block_grad(block, beta, table.variant(), dk);
    const double dl_dk = pair_loss_derivative(k, batch.y[b], margin);
    for (double& v : dk) v *= dl_dk;
    copies[b] = backprop_through_simplex(dk, beta);
  });
  return accumulate_shared(copies);
}

std::string_view to_string(Optimizer optimizer) noexcept { return optimizer == Optimizer::adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view text) {
  if (text == "adam") return Optimizer::adam;
  if (text == "sgd") return Optimizer::sgd;
  fail(Errc::invalid_config, "unknown optimizer '" + std::string(text) + "'");
}

void validate(const ContrastiveConfig& cfg) {
  if (!(cfg.lr >= 0.0 && std::isfinite(cfg.lr))) fail(Errc::invalid_config, "learning rate must be non-negative");
  if (cfg.batch == 0) fail(Errc::invalid_config, "batch size must be positive");
  if (cfg.iters < 0) fail(Errc::invalid_config, "iteration count must be non-negative");
  if (!(cfg.margin >= 0.0 && cfg.margin < 1.0)) fail(Errc::invalid_config, "margin must lie in [0, 1)");
  if (cfg.positive_fraction && !(*cfg.positive_fraction >= 0.0 && *cfg.positive_fraction <= 1.0)) {
    fail(Errc::invalid_config, "positive fraction must lie in [0, 1]");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    fail(Errc::invalid_config, "moment decay rates must lie in [0, 1)");
  }
  if (!(cfg.eps > 0.0)) fail(Errc::invalid_config, "eps must be positive");
  if (cfg.eval_pairs == 0) fail(Errc::invalid_config, "evaluation batch must be non-empty");
}

void adam_step(MomentState& state, std::span<const double> grad, std::span<double> raw, const ContrastiveConfig& cfg) {
  if (grad.size() != raw.size() || state.first.size() != raw.size() || state.second.size() != raw.size()) {
    fail(Errc::shape_mismatch, "moment state, gradient and parameters differ in size");
  }
  ++state.step;
  const double correct1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double correct2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < raw.size(); ++p) {
    state.first[p] = cfg.beta1 * state.first[p] + (1.0 - cfg.beta1) * grad[p];
    state.second[p] = cfg.beta2 * state.second[p] + (1.0 - cfg.beta2) * grad[p] * grad[p];
    const double m = state.first[p] / correct1;
    const double v = state.second[p] / correct2;
    raw[p] -= cfg.lr * m / (std::sqrt(v) + cfg.eps);
  }
}

namespace {

double batch_loss(const PairBatch& batch, const NodeKernelTable& table, std::span<const double> beta, double margin) {
  const std::size_t chunks = (batch.size() + kPairChunk - 1) / kPairChunk;
  std::vector<double> chunk_loss(chunks, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    std::vector<double> scratch;
    const std::size_t end = std::min(batch.size(), (c + 1) * kPairChunk);
    for (std::size_t b = c * kPairChunk; b < end; ++b) {
      const double k = table.combined(batch.pairs[b].first, batch.pairs[b].second, beta, scratch);
      chunk_loss[c] += pair_loss(k, batch.y[b], margin);
    }
  });
  double total = 0.0;
  for (double l : chunk_loss) total += l;
  return total / static_cast<double>(batch.size());
}

}  // namespace

DmklResult dmkl_fit(std::span<const PooledTree> trees, std::span<const int> labels, CombineVariant variant,
                    const KernelConfig& kernel, const ContrastiveConfig& cfg, const WeightObserver& observer) {
  validate(cfg);
  validate(kernel);
  if (trees.size() != labels.size()) fail(Errc::shape_mismatch, "one label per tree is required");
  if (trees.size() < 2) fail(Errc::too_few_videos, "contrastive training needs at least 2 videos");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    fail(Errc::single_class, "contrastive training needs at least 2 classes");
  }

  const NodeKernelTable table(trees, variant, kernel);
  PairSampler sampler(labels, cfg.seed, cfg.positive_fraction);
  PairSampler eval_sampler(labels, cfg.seed ^ 0x9e3779b97f4a7c15ULL, cfg.positive_fraction);
  const PairBatch eval_batch = eval_sampler.next(cfg.eval_pairs);

  DmklResult result;
  result.raw.assign(table.node_count(), 0.0);
  std::vector<double> beta = to_simplex(result.raw);
  const double initial = batch_loss(eval_batch, table, beta, cfg.margin);
  result.trace.push_back({0, initial, initial});

  MomentState moments(result.raw.size());
  for (int iter = 1; iter <= cfg.iters; ++iter) {
    const PairBatch batch = sampler.next(cfg.batch);
    const LossGradient lg = loss_grad(batch, table, result.raw, cfg.margin);
    if (cfg.optimizer == Optimizer::adam) {
      adam_step(moments, lg.raw, result.raw, cfg);
    } else {
      for (std::size_t p = 0; p < result.raw.size(); ++p) result.raw[p] -= cfg.lr * lg.raw[p];
    }
    beta = to_simplex(result.raw);
    if (observer) observer(beta);
    result.trace.push_back({iter, batch_loss(eval_batch, table, beta, cfg.margin), lg.loss});
  }

  result.beta = std::move(beta);
  result.pairs_consumed = sampler.pairs_consumed();
  result.distinct_pairs = sampler.distinct_pairs();
  return result;
}

DmklModel dmkl_then_svm(std::span<const PooledTree> trees, std::span<const int> labels, CombineVariant variant,
                        const KernelConfig& kernel, const ContrastiveConfig& cfg, const TrainConfig& svm,
                        const WeightObserver& observer) {
  validate(svm);
  DmklModel out;
  out.fit = dmkl_fit(trees, labels, variant, kernel, cfg, observer);
  const GramMatrix gram = gram_matrix(trees, out.fit.beta, variant, kernel);
  out.model = train_one_vs_rest(gram, labels, svm);
  return out;
}

}  // namespace hagg
