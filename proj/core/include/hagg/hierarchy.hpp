#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hagg/dataio.hpp"

namespace hagg {

/// Node (level, index), both 1-based: level l holds indices 1..2^(l-1).
struct NodeId {
  int level = 1;
  int index = 1;

  friend bool operator==(const NodeId&, const NodeId&) = default;
};

/// "l:k", the key used for weights in model artifacts.
std::string node_key(NodeId node);

/// Binary temporal hierarchy of depth D with 2^D - 1 nodes in canonical
/// level-major order: (1,1), (2,1), (2,2), (3,1), ...
class Hierarchy {
 public:
  static constexpr int kMaxDepth = 20;

  explicit Hierarchy(int depth);

  int depth() const noexcept { return depth_; }
  std::size_t node_count() const noexcept { return (std::size_t{1} << depth_) - 1; }

  NodeId node(std::size_t canonical_index) const;
  std::size_t index_of(NodeId node) const;

  /// Canonical index of the first node of a level.
  static std::size_t level_offset(int level) noexcept { return (std::size_t{1} << (level - 1)) - 1; }
  static std::size_t level_width(int level) noexcept { return std::size_t{1} << (level - 1); }

 private:
  int depth_;
};

/// Half-open frame range [start, end) covered by a node.
struct NodeInterval {
  NodeId node;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
};

/// Intervals for every node in canonical order. Node k at level l covers
/// [floor((k-1)T/2^(l-1)), floor(kT/2^(l-1))). Throws InsufficientFrames
/// when T < 2^(D-1).
std::vector<NodeInterval> build_intervals(std::size_t frame_count, int depth);

enum class FeatureNorm { none, frame_l2, node_l2 };

std::string_view to_string(FeatureNorm norm) noexcept;
FeatureNorm parse_feature_norm(std::string_view text);

/// Node-wise mean descriptors for one video and stream; row i belongs to the
/// node with canonical index i.
struct PooledTree {
  std::string video_id;
  Stream stream = Stream::appearance;
  int depth = 1;
  RowMatrix nodes;

  std::size_t node_count() const noexcept { return static_cast<std::size_t>(nodes.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(nodes.cols()); }
  std::span<const double> node(std::size_t i) const noexcept {
    return {nodes.data() + i * dim(), dim()};
  }
};

PooledTree pool_sequence(const StreamFeatureSequence& seq, const Hierarchy& hierarchy,
                         FeatureNorm norm = FeatureNorm::none);

// GPT1 layout: "GPT1" | u32 LE node_count | u32 LE dim | node_count*dim f32 LE.
void write_pooled_tree(const PooledTree& tree, const std::filesystem::path& path);
PooledTree load_pooled_tree(const std::filesystem::path& path, std::string video_id = {},
                            Stream stream = Stream::appearance);

}  // namespace hagg
