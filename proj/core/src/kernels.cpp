#include "hagg/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "hagg/error.hpp"
#include "hagg/parallel.hpp"

namespace hagg {
namespace fs = std::filesystem;

void validate(const KernelConfig& cfg) {
  if (cfg.kind == KernelKind::rbf && !(cfg.gamma > 0.0 && std::isfinite(cfg.gamma))) {
    fail(Errc::invalid_config, "rbf gamma must be positive and finite");
  }
}

std::string_view to_string(KernelKind kind) noexcept { return kind == KernelKind::rbf ? "rbf" : "linear"; }

KernelKind parse_kernel_kind(std::string_view text) {
  if (text == "rbf") return KernelKind::rbf;
  if (text == "linear") return KernelKind::linear;
  fail(Errc::invalid_config, "unknown kernel '" + std::string(text) + "'");
}

std::string_view to_string(CombineVariant variant) noexcept {
  return variant == CombineVariant::concatenation ? "concat" : "avg";
}

CombineVariant parse_variant(std::string_view text) {
  if (text == "concat" || text == "concatenation") return CombineVariant::concatenation;
  if (text == "avg" || text == "averaging") return CombineVariant::averaging;
  fail(Errc::invalid_config, "unknown variant '" + std::string(text) + "'");
}

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) noexcept {
  double sum = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - y[d];
    sum += diff * diff;
  }
  return sum;
}

double unchecked_elementary(std::span<const double> x, std::span<const double> y, const KernelConfig& cfg) noexcept {
  if (cfg.kind == KernelKind::rbf) return std::exp(-cfg.gamma * squared_distance(x, y));
  double dot = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) dot += x[d] * y[d];
  return dot;
}

void check_compatible(const PooledTree& a, const PooledTree& b) {
  if (a.node_count() != b.node_count() || a.dim() != b.dim()) {
    fail(Errc::shape_mismatch, "trees '" + a.video_id + "' and '" + b.video_id + "' have different shapes (" +
                                   std::to_string(a.node_count()) + "x" + std::to_string(a.dim()) + " vs " +
                                   std::to_string(b.node_count()) + "x" + std::to_string(b.dim()) + ")");
  }
}

void check_beta(std::span<const double> beta, std::size_t nodes) {
  if (beta.size() != nodes) {
    fail(Errc::shape_mismatch, "weight vector has " + std::to_string(beta.size()) + " entries for " +
                                   std::to_string(nodes) + " nodes");
  }
}

void check_homogeneous(std::span<const PooledTree> trees) {
  for (std::size_t i = 1; i < trees.size(); ++i) check_compatible(trees[0], trees[i]);
}

std::size_t block_size_for(std::size_t nodes, CombineVariant variant) {
  return variant == CombineVariant::concatenation ? nodes : nodes * nodes;
}

void fill_block(const PooledTree& a, const PooledTree& b, CombineVariant variant, const KernelConfig& cfg,
                std::span<double> out) {
  const std::size_t nodes = a.node_count();
  if (variant == CombineVariant::concatenation) {
    for (std::size_t p = 0; p < nodes; ++p) out[p] = unchecked_elementary(a.node(p), b.node(p), cfg);
    return;
  }
  for (std::size_t p = 0; p < nodes; ++p) {
    for (std::size_t q = 0; q < nodes; ++q) out[p * nodes + q] = unchecked_elementary(a.node(p), b.node(q), cfg);
  }
}

}  // namespace

double elementary(std::span<const double> x, std::span<const double> y, const KernelConfig& cfg) {
  if (x.size() != y.size()) {
    fail(Errc::dim_mismatch, "vectors of size " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
  validate(cfg);
  return unchecked_elementary(x, y, cfg);
}

double combine_block(std::span<const double> block, std::span<const double> beta, CombineVariant variant) {
  const std::size_t nodes = beta.size();
  double total = 0.0;
  if (variant == CombineVariant::concatenation) {
    for (std::size_t p = 0; p < nodes; ++p) total += beta[p] * block[p];
    return total;
  }
  for (std::size_t p = 0; p < nodes; ++p) {
    double inner = 0.0;
    for (std::size_t q = 0; q < nodes; ++q) inner += beta[q] * block[p * nodes + q];
    total += beta[p] * inner;
  }
  return total;
}

void combine_block_grad(std::span<const double> block, std::span<const double> beta, CombineVariant variant,
                        std::span<double> out) {
  const std::size_t nodes = beta.size();
  if (variant == CombineVariant::concatenation) {
    std::copy_n(block.begin(), nodes, out.begin());
    return;
  }
  for (std::size_t m = 0; m < nodes; ++m) {
    double g = 0.0;
    for (std::size_t q = 0; q < nodes; ++q) g += beta[q] * (block[m * nodes + q] + block[q * nodes + m]);
    out[m] = g;
  }
}

double combined_kernel(const PooledTree& a, const PooledTree& b, std::span<const double> beta,
                       CombineVariant variant, const KernelConfig& cfg) {
  check_compatible(a, b);
  check_beta(beta, a.node_count());
  validate(cfg);
  std::vector<double> block(block_size_for(a.node_count(), variant));
  fill_block(a, b, variant, cfg, block);
  return combine_block(block, beta, variant);
}

std::vector<double> kernel_grad_beta(const PooledTree& a, const PooledTree& b, std::span<const double> beta,
                                     CombineVariant variant, const KernelConfig& cfg) {
  check_compatible(a, b);
  check_beta(beta, a.node_count());
  validate(cfg);
  std::vector<double> block(block_size_for(a.node_count(), variant));
  fill_block(a, b, variant, cfg, block);
  std::vector<double> grad(a.node_count());
  combine_block_grad(block, beta, variant, grad);
  return grad;
}

namespace {

std::vector<std::string> ids_of(std::span<const PooledTree> trees) {
  std::vector<std::string> ids;
  ids.reserve(trees.size());
  for (const auto& t : trees) ids.push_back(t.video_id);
  return ids;
}

}  // namespace

GramMatrix gram_matrix(std::span<const PooledTree> trees, std::span<const double> beta, CombineVariant variant,
                       const KernelConfig& cfg) {
  check_homogeneous(trees);
  validate(cfg);
  GramMatrix gram{ids_of(trees), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(trees.size()),
                                                       static_cast<Eigen::Index>(trees.size()))};
  if (trees.empty()) return gram;
  check_beta(beta, trees[0].node_count());
  const std::size_t n = trees.size();
  const std::size_t bs = block_size_for(trees[0].node_count(), variant);
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> block(bs);
    for (std::size_t j = i; j < n; ++j) {
      fill_block(trees[i], trees[j], variant, cfg, block);
      const double value = combine_block(block, beta, variant);
      gram.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
      gram.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
    }
  });
  return gram;
}

CrossKernel cross_kernel(std::span<const PooledTree> queries, std::span<const PooledTree> training,
                         std::span<const double> beta, CombineVariant variant, const KernelConfig& cfg) {
  validate(cfg);
  check_homogeneous(training);
  check_homogeneous(queries);
  if (!queries.empty() && !training.empty()) check_compatible(queries[0], training[0]);
  CrossKernel out{ids_of(queries), ids_of(training),
                  Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(queries.size()),
                                        static_cast<Eigen::Index>(training.size()))};
  if (queries.empty() || training.empty()) return out;
  check_beta(beta, training[0].node_count());
  const std::size_t bs = block_size_for(training[0].node_count(), variant);
  parallel_for(queries.size(), [&](std::size_t i) {
    std::vector<double> block(bs);
    for (std::size_t j = 0; j < training.size(); ++j) {
      fill_block(queries[i], training[j], variant, cfg, block);
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = combine_block(block, beta, variant);
    }
  });
  return out;
}

double median_gamma(std::span<const PooledTree> trees, std::uint64_t seed, std::size_t max_pairs) {
  if (trees.size() < 2) fail(Errc::too_few_videos, "median heuristic needs at least 2 trees");
  check_homogeneous(trees);
  const std::uint64_t n = trees.size();
  const std::uint64_t nodes = trees[0].node_count();
  const std::uint64_t video_pairs = n * (n - 1) / 2;
  const std::uint64_t total = video_pairs * nodes;

  // Map a flat index to (i < j, node).
  auto distance_at = [&](std::uint64_t flat) {
    const std::uint64_t node = flat % nodes;
    std::uint64_t pair = flat / nodes;
    std::uint64_t i = 0;
    while (pair >= n - 1 - i) {
      pair -= n - 1 - i;
      ++i;
    }
    const std::uint64_t j = i + 1 + pair;
    return squared_distance(trees[i].node(node), trees[j].node(node));
  };

  std::vector<double> distances;
  if (total <= max_pairs) {
    distances.reserve(total);
    std::uint64_t flat = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      for (std::uint64_t j = i + 1; j < n; ++j) {
        for (std::uint64_t p = 0; p < nodes; ++p, ++flat) {
          distances.push_back(squared_distance(trees[i].node(p), trees[j].node(p)));
        }
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
    distances.reserve(max_pairs);
    for (std::size_t s = 0; s < max_pairs; ++s) distances.push_back(distance_at(pick(rng)));
  }

  const std::size_t mid = distances.size() / 2;
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid), distances.end());
  double median = distances[mid];
  if (distances.size() % 2 == 0) {
    const double lower = *std::max_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) fail(Errc::degenerate_data, "median squared node distance is zero");
  return 1.0 / median;
}

GramMatrix fuse_kernels(const GramMatrix& a, const GramMatrix& m, double w) {
  if (!(w >= 0.0 && w <= 1.0)) fail(Errc::invalid_config, "fusion weight must lie in [0, 1]");
  if (a.ids != m.ids) fail(Errc::id_mismatch, "fused Gram matrices cover different videos");
  return {a.ids, w * a.values + (1.0 - w) * m.values};
}

CrossKernel fuse_kernels(const CrossKernel& a, const CrossKernel& m, double w) {
  if (!(w >= 0.0 && w <= 1.0)) fail(Errc::invalid_config, "fusion weight must lie in [0, 1]");
  if (a.row_ids != m.row_ids || a.col_ids != m.col_ids) {
    fail(Errc::id_mismatch, "fused kernel blocks cover different videos");
  }
  return {a.row_ids, a.col_ids, w * a.values + (1.0 - w) * m.values};
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int shift = 0; shift < 64; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

class ByteReader {
 public:
  ByteReader(std::vector<unsigned char> bytes, fs::path path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint64_t read(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * b);
    return v;
  }
  std::string read_string(std::size_t len) {
    need(len);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }
  std::size_t pos() const noexcept { return pos_; }

 private:
  void need(std::size_t len) const {
    if (pos_ + len > bytes_.size()) {
      fail(Errc::truncated, path_.string() + " ends at byte offset " + std::to_string(bytes_.size()));
    }
  }
  std::vector<unsigned char> bytes_;
  fs::path path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_gram_cache(const GramMatrix& gram, const fs::path& path) {
  const std::size_t n = gram.ids.size();
  if (static_cast<std::size_t>(gram.values.rows()) != n || static_cast<std::size_t>(gram.values.cols()) != n) {
    fail(Errc::shape_mismatch, "Gram matrix size does not match its ids");
  }
  std::string out = "GRM1";
  put_u32(out, static_cast<std::uint32_t>(n));
  for (const auto& id : gram.ids) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      put_u64(out, std::bit_cast<std::uint64_t>(gram.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(Errc::io, "cannot create " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) fail(Errc::io, "write failed for " + path.string());
}

GramMatrix load_gram_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  ByteReader reader({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}, path);
  if (reader.read_string(4) != "GRM1") fail(Errc::bad_magic, "expected \"GRM1\" in " + path.string());
  const auto n = static_cast<std::size_t>(reader.read(4));
  GramMatrix gram;
  gram.ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) gram.ids.push_back(reader.read_string(static_cast<std::size_t>(reader.read(4))));
  gram.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = std::bit_cast<double>(reader.read(8));
      gram.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      gram.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  if (!reader.done()) fail(Errc::trailing_data, path.string() + ": bytes after matrix at offset " + std::to_string(reader.pos()));
  return gram;
}

NodeKernelTable::NodeKernelTable(std::span<const PooledTree> trees, CombineVariant variant, const KernelConfig& cfg,
                                 std::size_t budget_bytes)
    : NodeKernelTable(trees, trees, variant, cfg, budget_bytes) {}

NodeKernelTable::NodeKernelTable(std::span<const PooledTree> rows, std::span<const PooledTree> cols,
                                 CombineVariant variant, const KernelConfig& cfg, std::size_t budget_bytes)
    : rows_(rows),
      cols_(cols),
      symmetric_(rows.data() == cols.data() && rows.size() == cols.size()),
      variant_(variant),
      cfg_(cfg) {
  validate(cfg);
  check_homogeneous(rows);
  check_homogeneous(cols);
  if (!rows.empty() && !cols.empty()) check_compatible(rows[0], cols[0]);
  nodes_ = !rows.empty() ? rows[0].node_count() : (!cols.empty() ? cols[0].node_count() : 0);
  block_ = block_size_for(nodes_, variant);

  const std::size_t entries = rows.size() * cols.size() * block_;
  if (entries == 0 || entries > budget_bytes / sizeof(double)) return;
  cache_.resize(entries);
  parallel_for(rows.size(), [&](std::size_t i) {
    const std::size_t first = symmetric_ ? i : 0;
    for (std::size_t j = first; j < cols.size(); ++j) {
      std::span<double> out(cache_.data() + (i * cols.size() + j) * block_, block_);
      compute_block(i, j, out);
      if (symmetric_ && j != i) {
        std::span<double> mirror(cache_.data() + (j * cols.size() + i) * block_, block_);
        if (variant_ == CombineVariant::concatenation) {
          std::copy(out.begin(), out.end(), mirror.begin());
        } else {
          for (std::size_t p = 0; p < nodes_; ++p) {
            for (std::size_t q = 0; q < nodes_; ++q) mirror[q * nodes_ + p] = out[p * nodes_ + q];
          }
        }
      }
    }
  });
}

void NodeKernelTable::compute_block(std::size_t i, std::size_t j, std::span<double> out) const {
  fill_block(rows_[i], cols_[j], variant_, cfg_, out);
}

std::span<const double> NodeKernelTable::block(std::size_t i, std::size_t j, std::vector<double>& scratch) const {
  if (cached()) return {cache_.data() + (i * cols_.size() + j) * block_, block_};
  scratch.resize(block_);
  compute_block(i, j, scratch);
  return scratch;
}

double NodeKernelTable::combined(std::size_t i, std::size_t j, std::span<const double> beta,
                                 std::vector<double>& scratch) const {
  return combine_block(block(i, j, scratch), beta, variant_);
}

Eigen::MatrixXd NodeKernelTable::combine(std::span<const double> beta) const {
  check_beta(beta, nodes_);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
  parallel_for(rows(), [&](std::size_t i) {
    std::vector<double> scratch;
    const std::size_t first = symmetric_ ? i : 0;
    for (std::size_t j = first; j < cols(); ++j) {
      const double value = combined(i, j, beta, scratch);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
      if (symmetric_) out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
    }
  });
  return out;
}

}  // namespace hagg
