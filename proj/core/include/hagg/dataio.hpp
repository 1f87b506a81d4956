#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hagg {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Stream { appearance, motion };

std::string_view to_string(Stream stream) noexcept;
Stream parse_stream(std::string_view text);

/// Per-video, per-stream frame descriptors: one row per frame.
struct StreamFeatureSequence {
  std::string video_id;
  Stream stream = Stream::appearance;
  RowMatrix frames;

  std::size_t frame_count() const noexcept { return static_cast<std::size_t>(frames.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(frames.cols()); }
};

/// Throws ZeroFrames / ZeroDim / NonFinite.
void validate(const StreamFeatureSequence& seq);

// GPF1 layout: "GPF1" | u32 LE dim | u32 LE T | T*dim f32 LE, frame-major.
inline constexpr std::size_t kGpf1HeaderBytes = 12;

StreamFeatureSequence load_feature_file(const std::filesystem::path& path,
                                        std::string video_id = {},
                                        Stream stream = Stream::appearance);

void write_feature_file(const StreamFeatureSequence& seq, const std::filesystem::path& path);

enum class Split { train, test };

std::string_view to_string(Split split) noexcept;

struct VideoRecord {
  std::string video_id;
  int label = 0;
  std::optional<std::filesystem::path> appearance;
  std::optional<std::filesystem::path> motion;
  Split split = Split::train;

  const std::optional<std::filesystem::path>& path_for(Stream stream) const noexcept {
    return stream == Stream::appearance ? appearance : motion;
  }
};

struct DatasetManifest {
  std::vector<VideoRecord> records;
  std::map<int, std::string> label_names;

  int num_classes() const noexcept { return static_cast<int>(label_names.size()); }
  const VideoRecord* find(std::string_view video_id) const noexcept;
  std::vector<const VideoRecord*> split(Split which) const;
};

/// JSON-lines manifest. Each line is a record object with keys video_id,
/// label, appearance, motion, split; relative paths resolve against the
/// manifest's directory. An optional line {"label_names": {"1": "...", ...}}
/// declares the class set; otherwise the labels present must be 1..C.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Paths are written relative to the manifest directory when possible.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Loads the stream file of a record and tags it with the record's id.
StreamFeatureSequence load_record_stream(const VideoRecord& record, Stream stream);

}  // namespace hagg
