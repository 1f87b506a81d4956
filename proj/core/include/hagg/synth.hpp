#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hagg/dataio.hpp"

namespace hagg {

/// Multi-granularity dataset recipe. Every frame is N(0, noise^2) noise; class c
/// adds amplitude * u_c over interval (c mod 2^(level-1)) of the given level
/// and, when balanced, subtracts it over the sibling interval, so coarser
/// levels carry no class signal.
struct SynthSpec {
  int classes = 4;
  int per_class = 50;
  std::size_t frames = 32;
  std::size_t dim = 16;
  int level = 3;
  double amplitude = 2.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
  int streams = 1;
  bool balanced = true;
  /// Signal level of the motion stream; 0 picks a level next to `level`.
  int motion_level = 0;
  double train_fraction = 0.7;
};

void validate(const SynthSpec& spec);

/// Signal level used for the motion stream.
int motion_signal_level(const SynthSpec& spec);

struct SynthVideo {
  std::string video_id;
  int label = 0;
  Split split = Split::train;
  StreamFeatureSequence appearance;
  std::optional<StreamFeatureSequence> motion;
};

/// In-memory dataset; values are rounded to single precision so they match
/// what the feature files hold.
std::vector<SynthVideo> generate(const SynthSpec& spec);

/// Writes features/<id>.<stream>.gpf and manifest.jsonl under dir.
DatasetManifest write_dataset(const SynthSpec& spec, const std::filesystem::path& dir);

/// Circular shift: frame t moves to (t + shift) mod T. |shift| <= T.
StreamFeatureSequence misalign(const StreamFeatureSequence& seq, long long shift);

/// Every frame repeated `repeat` times in place.
StreamFeatureSequence duplicate_frames(const StreamFeatureSequence& seq, std::size_t repeat);

}  // namespace hagg
