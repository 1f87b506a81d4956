#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hagg/hierarchy.hpp"

namespace hagg {

enum class KernelKind { rbf, linear };

struct KernelConfig {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;  // rbf only
};

void validate(const KernelConfig& cfg);
std::string_view to_string(KernelKind kind) noexcept;
KernelKind parse_kernel_kind(std::string_view text);

/// (*) sums aligned node pairs, (**) sums all cross pairs weighted by beta_p beta_q.
enum class CombineVariant { concatenation, averaging };

std::string_view to_string(CombineVariant variant) noexcept;
CombineVariant parse_variant(std::string_view text);

/// rbf: exp(-gamma |x - y|^2); linear: <x, y>.
double elementary(std::span<const double> x, std::span<const double> y, const KernelConfig& cfg);

/// Combined kernel between two pooled trees of the same hierarchy.
double combined_kernel(const PooledTree& a, const PooledTree& b, std::span<const double> beta,
                       CombineVariant variant, const KernelConfig& cfg);

/// d combined_kernel / d beta. Concatenation: kappa_pp (independent of beta);
/// averaging: sum_q beta_q (kappa(a_p, b_q) + kappa(a_q, b_p)).
std::vector<double> kernel_grad_beta(const PooledTree& a, const PooledTree& b, std::span<const double> beta,
                                     CombineVariant variant, const KernelConfig& cfg);

/// Symmetric kernel matrix over a set of videos.
struct GramMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;
};

/// Kernel values between query videos (rows) and training videos (columns).
struct CrossKernel {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  Eigen::MatrixXd values;
};

GramMatrix gram_matrix(std::span<const PooledTree> trees, std::span<const double> beta, CombineVariant variant,
                       const KernelConfig& cfg);

CrossKernel cross_kernel(std::span<const PooledTree> queries, std::span<const PooledTree> training,
                         std::span<const double> beta, CombineVariant variant, const KernelConfig& cfg);

/// 1 / median squared distance over same-node vector pairs of distinct trees
/// (all pairs, or max_pairs sampled with the seed when there are more).
double median_gamma(std::span<const PooledTree> trees, std::uint64_t seed = 0, std::size_t max_pairs = 10000);

/// w * a + (1 - w) * m; ids must agree.
GramMatrix fuse_kernels(const GramMatrix& a, const GramMatrix& m, double w = 0.5);
CrossKernel fuse_kernels(const CrossKernel& a, const CrossKernel& m, double w = 0.5);

// GRM1 layout: "GRM1" | u32 n | n x (u32 len, id bytes) | n(n+1)/2 f64 LE, upper triangle row-major.
void write_gram_cache(const GramMatrix& gram, const std::filesystem::path& path);
GramMatrix load_gram_cache(const std::filesystem::path& path);

/// Elementary node kernels for every (row video, column video) pair. For
/// concatenation a pair holds the aligned values kappa(a_p, b_p); for
/// averaging the full node x node block kappa(a_p, b_q). Blocks are cached
/// when they fit the memory budget and recomputed on demand otherwise.
/// The tree spans must outlive the table.
class NodeKernelTable {
 public:
  static constexpr std::size_t kDefaultBudgetBytes = std::size_t{1} << 30;

  /// Symmetric table over one video set.
  NodeKernelTable(std::span<const PooledTree> trees, CombineVariant variant, const KernelConfig& cfg,
                  std::size_t budget_bytes = kDefaultBudgetBytes);
  NodeKernelTable(std::span<const PooledTree> rows, std::span<const PooledTree> cols, CombineVariant variant,
                  const KernelConfig& cfg, std::size_t budget_bytes = kDefaultBudgetBytes);

  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t cols() const noexcept { return cols_.size(); }
  std::size_t node_count() const noexcept { return nodes_; }
  std::size_t block_size() const noexcept { return block_; }
  CombineVariant variant() const noexcept { return variant_; }
  const KernelConfig& config() const noexcept { return cfg_; }
  bool cached() const noexcept { return !cache_.empty(); }

  /// Node kernels of pair (i, j); may point into scratch.
  std::span<const double> block(std::size_t i, std::size_t j, std::vector<double>& scratch) const;

  double combined(std::size_t i, std::size_t j, std::span<const double> beta, std::vector<double>& scratch) const;

  /// Combined kernel matrix for the given weights.
  Eigen::MatrixXd combine(std::span<const double> beta) const;

 private:
  void compute_block(std::size_t i, std::size_t j, std::span<double> out) const;

  std::span<const PooledTree> rows_;
  std::span<const PooledTree> cols_;
  bool symmetric_;
  CombineVariant variant_;
  KernelConfig cfg_;
  std::size_t nodes_ = 0;
  std::size_t block_ = 0;
  std::vector<double> cache_;
};

/// Weighted sum of one node block, in the same summation order used
/// everywhere a combined kernel value is produced.
double combine_block(std::span<const double> block, std::span<const double> beta, CombineVariant variant);

/// Gradient of combine_block with respect to beta, written to out.
void combine_block_grad(std::span<const double> block, std::span<const double> beta, CombineVariant variant,
                        std::span<double> out);

}  // namespace hagg
