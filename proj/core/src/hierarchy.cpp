#include "hagg/hierarchy.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "hagg/error.hpp"

namespace hagg {
namespace fs = std::filesystem;

std::string node_key(NodeId node) { return std::to_string(node.level) + ":" + std::to_string(node.index); }

Hierarchy::Hierarchy(int depth) : depth_(depth) {
  if (depth < 1 || depth > kMaxDepth) {
    fail(Errc::invalid_config, "hierarchy depth must be in 1.." + std::to_string(kMaxDepth) + ", got " +
                                   std::to_string(depth));
  }
}

NodeId Hierarchy::node(std::size_t canonical_index) const {
  if (canonical_index >= node_count()) fail(Errc::shape_mismatch, "node index out of range");
  const int level = std::bit_width(canonical_index + 1);
  return {level, static_cast<int>(canonical_index - level_offset(level)) + 1};
}

std::size_t Hierarchy::index_of(NodeId node) const {
  if (node.level < 1 || node.level > depth_ || node.index < 1 ||
      static_cast<std::size_t>(node.index) > level_width(node.level)) {
    fail(Errc::shape_mismatch, "node " + node_key(node) + " not in hierarchy of depth " + std::to_string(depth_));
  }
  return level_offset(node.level) + static_cast<std::size_t>(node.index - 1);
}

std::vector<NodeInterval> build_intervals(std::size_t frame_count, int depth) {
  const Hierarchy hierarchy(depth);
  const std::size_t leaves = Hierarchy::level_width(depth);
  if (frame_count < leaves) {
    fail(Errc::insufficient_frames, "T=" + std::to_string(frame_count) + " frames cannot fill " +
                                        std::to_string(leaves) + " leaves at depth D=" + std::to_string(depth));
  }
  std::vector<NodeInterval> intervals;
  intervals.reserve(hierarchy.node_count());
  for (int level = 1; level <= depth; ++level) {
    const std::size_t width = Hierarchy::level_width(level);
    for (std::size_t k = 0; k < width; ++k) {
      intervals.push_back({NodeId{level, static_cast<int>(k) + 1}, k * frame_count / width,
                           (k + 1) * frame_count / width});
    }
  }
  return intervals;
}

std::string_view to_string(FeatureNorm norm) noexcept {
  switch (norm) {
    case FeatureNorm::none: return "none";
    case FeatureNorm::frame_l2: return "frame-l2";
    case FeatureNorm::node_l2: return "node-l2";
  }
  return "none";
}

FeatureNorm parse_feature_norm(std::string_view text) {
  if (text == "none") return FeatureNorm::none;
  if (text == "frame-l2") return FeatureNorm::frame_l2;
  if (text == "node-l2") return FeatureNorm::node_l2;
  fail(Errc::invalid_config, "unknown normalization '" + std::string(text) + "'");
}

namespace {

template <class Row>
void l2_normalize(Row&& row) {
  const double norm = row.norm();
  if (norm > 0.0) row /= norm;
}

}  // namespace

PooledTree pool_sequence(const StreamFeatureSequence& seq, const Hierarchy& hierarchy, FeatureNorm norm) {
  validate(seq);
  const auto intervals = build_intervals(seq.frame_count(), hierarchy.depth());

  RowMatrix normalized;
  const RowMatrix* frames = &seq.frames;
  if (norm == FeatureNorm::frame_l2) {
    normalized = seq.frames;
    for (Eigen::Index t = 0; t < normalized.rows(); ++t) l2_normalize(normalized.row(t));
    frames = &normalized;
  }

  PooledTree tree;
  tree.video_id = seq.video_id;
  tree.stream = seq.stream;
  tree.depth = hierarchy.depth();
  tree.nodes = RowMatrix::Zero(static_cast<Eigen::Index>(intervals.size()), frames->cols());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    auto row = tree.nodes.row(static_cast<Eigen::Index>(i));
    for (std::size_t t = intervals[i].start; t < intervals[i].end; ++t) row += frames->row(static_cast<Eigen::Index>(t));
    row /= static_cast<double>(intervals[i].size());
    if (norm == FeatureNorm::node_l2) l2_normalize(row);
  }
  return tree;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_pooled_tree(const PooledTree& tree, const fs::path& path) {
  std::string out = "GPT1";
  put_u32(out, static_cast<std::uint32_t>(tree.node_count()));
  put_u32(out, static_cast<std::uint32_t>(tree.dim()));
  for (Eigen::Index i = 0; i < tree.nodes.size(); ++i) {
    const auto value = static_cast<float>(tree.nodes.data()[i]);
    if (!std::isfinite(value)) fail(Errc::non_finite, "pooled tree '" + tree.video_id + "' is not finite");
    put_u32(out, std::bit_cast<std::uint32_t>(value));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(Errc::io, "cannot create " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) fail(Errc::io, "write failed for " + path.string());
}

PooledTree load_pooled_tree(const fs::path& path, std::string video_id, Stream stream) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 12) fail(Errc::truncated, path.string() + ": incomplete GPT1 header");
  if (std::string(bytes.begin(), bytes.begin() + 4) != "GPT1") fail(Errc::bad_magic, path.string() + ": expected GPT1");
  const std::uint32_t nodes = read_u32(bytes.data() + 4);
  const std::uint32_t dim = read_u32(bytes.data() + 8);
  // node_count must be 2^D - 1
  if (nodes == 0 || !std::has_single_bit(nodes + 1u)) {
    fail(Errc::shape_mismatch, path.string() + ": node count " + std::to_string(nodes) + " is not 2^D - 1");
  }
  if (dim == 0) fail(Errc::zero_dim, path.string() + ": dim = 0");
  const std::uint64_t expected = 12 + std::uint64_t{nodes} * dim * 4;
  if (bytes.size() < expected) fail(Errc::truncated, path.string() + ": payload shorter than declared");
  if (bytes.size() > expected) fail(Errc::trailing_data, path.string() + ": bytes after payload");

  PooledTree tree;
  tree.video_id = video_id.empty() ? path.stem().string() : std::move(video_id);
  tree.stream = stream;
  tree.depth = std::bit_width(nodes);
  tree.nodes.resize(nodes, dim);
  for (Eigen::Index i = 0; i < tree.nodes.size(); ++i) {
    const float value = std::bit_cast<float>(read_u32(bytes.data() + 12 + 4 * i));
    if (!std::isfinite(value)) fail(Errc::non_finite, path.string() + ": non-finite value");
    tree.nodes.data()[i] = value;
  }
  return tree;
}

}  // namespace hagg
