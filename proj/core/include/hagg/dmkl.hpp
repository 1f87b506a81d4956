#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hagg/kernels.hpp"
#include "hagg/svm.hpp"

namespace hagg {

/// Video index pairs (i < j) with +1 for same-class pairs and -1 otherwise.
struct PairBatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<int> y;

  std::size_t size() const noexcept { return pairs.size(); }
};

/// Every pair of the label list, in (0,1), (0,2), ..., (1,2), ... order.
PairBatch all_pairs(std::span<const int> labels);

/// Seeded batch sampler. Without a positive fraction pairs are uniform over
/// all i < j; with one, that share of every batch is drawn uniformly from the
/// same-class pairs and the rest from the different-class pairs.
class PairSampler {
 public:
  PairSampler(std::span<const int> labels, std::uint64_t seed, std::optional<double> positive_fraction = {});

  PairBatch next(std::size_t batch_size);

  std::size_t pairs_consumed() const noexcept { return consumed_; }
  std::size_t distinct_pairs() const noexcept { return seen_.size(); }
  std::size_t positive_pairs_available() const noexcept { return positive_total_; }
  std::size_t negative_pairs_available() const noexcept { return negative_total_; }

 private:
  std::pair<std::size_t, std::size_t> any_pair();
  std::pair<std::size_t, std::size_t> positive_pair();
  std::pair<std::size_t, std::size_t> negative_pair();
  void record(PairBatch& batch, std::pair<std::size_t, std::size_t> pair);

  std::vector<int> labels_;
  std::optional<double> positive_fraction_;
  std::mt19937_64 rng_;
  std::vector<std::vector<std::size_t>> members_;  // video indices per distinct label
  std::vector<double> class_pair_counts_;
  std::size_t positive_total_ = 0;
  std::size_t negative_total_ = 0;
  std::size_t consumed_ = 0;
  std::unordered_set<std::uint64_t> seen_;
};

/// Mean over the batch of (1 - k)^2 for positives and max(0, k - margin)^2 for negatives.
double contrastive_loss(std::span<const double> k, std::span<const int> y, double margin = 0.0);

/// d contrastive_loss / d k_b for every batch entry.
std::vector<double> contrastive_loss_grad(std::span<const double> k, std::span<const int> y, double margin = 0.0);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> beta;       // dE / d beta
  std::vector<double> raw;        // dE / d raw parameters
  std::vector<double> kernel;     // combined kernel value per pair
};

/// Loss and gradient of the contrastive objective at beta = softmax(raw).
/// Pair indices address the table's rows and columns.
LossGradient loss_grad(const PairBatch& batch, const NodeKernelTable& table, std::span<const double> raw,
                       double margin = 0.0);

/// Same, recomputing node kernels on the fly.
LossGradient loss_grad(const PairBatch& batch, std::span<const PooledTree> trees, std::span<const double> raw,
                       CombineVariant variant, const KernelConfig& kernel, double margin = 0.0);

/// Gradient built the way a weight-sharing network sees it: every pair is a
/// copy of the network with its own raw-parameter gradient, and the shared
/// parameters receive the accumulated mean.
std::vector<double> shared_network_grad(const PairBatch& batch, const NodeKernelTable& table,
                                        std::span<const double> raw, double margin = 0.0);

enum class Optimizer { adam, sgd };

std::string_view to_string(Optimizer optimizer) noexcept;
Optimizer parse_optimizer(std::string_view text);

struct ContrastiveConfig {
  double lr = 5e-4;
  std::size_t batch = 2048;
  int iters = 4000;
  double margin = 0.0;
  std::uint64_t seed = 0;
  /// Share of same-class pairs per batch; unset samples pairs uniformly.
  std::optional<double> positive_fraction;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Size of the fixed batch the trace is measured on (all pairs when fewer exist).
  std::size_t eval_pairs = 2048;
};

void validate(const ContrastiveConfig& cfg);

struct MomentState {
  std::vector<double> first;
  std::vector<double> second;
  long long step = 0;

  explicit MomentState(std::size_t size = 0) : first(size, 0.0), second(size, 0.0) {}
};

/// One bias-corrected adaptive-moment update of raw in place.
void adam_step(MomentState& state, std::span<const double> grad, std::span<double> raw, const ContrastiveConfig& cfg);

struct DmklTraceRow {
  int iteration = 0;
  double eval_loss = 0.0;
  double batch_loss = 0.0;  // loss of the batch the step was taken on (eval loss for row 0)
};

struct DmklResult {
  std::vector<double> raw;
  std::vector<double> beta;
  std::vector<DmklTraceRow> trace;
  std::size_t pairs_consumed = 0;
  std::size_t distinct_pairs = 0;
};

/// Receives the weights after every optimizer step.
using WeightObserver = std::function<void(std::span<const double> beta)>;

/// Minimizes the contrastive loss over the simplex through the softmax
/// parameterization, starting from uniform weights.
DmklResult dmkl_fit(std::span<const PooledTree> trees, std::span<const int> labels, CombineVariant variant,
                    const KernelConfig& kernel, const ContrastiveConfig& cfg, const WeightObserver& observer = {});

struct DmklModel {
  DmklResult fit;
  SvmModel model;
};

/// Learns the weights, then trains one-vs-rest machines once on the resulting kernel.
DmklModel dmkl_then_svm(std::span<const PooledTree> trees, std::span<const int> labels, CombineVariant variant,
                        const KernelConfig& kernel, const ContrastiveConfig& cfg, const TrainConfig& svm,
                        const WeightObserver& observer = {});

}  // namespace hagg
