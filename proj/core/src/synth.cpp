#include "hagg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "hagg/error.hpp"
#include "hagg/hierarchy.hpp"
#include "hagg/parallel.hpp"

namespace hagg {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

std::vector<Eigen::VectorXd> class_directions(int classes, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Eigen::VectorXd> dirs;
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(dim));
    for (auto& v : u) v = normal(rng);
    u /= u.norm();
    dirs.push_back(std::move(u));
  }
  return dirs;
}

NodeInterval level_interval(std::size_t frames, int level, std::size_t k) {
  const std::size_t width = Hierarchy::level_width(level);
  return {NodeId{level, static_cast<int>(k) + 1}, k * frames / width, (k + 1) * frames / width};
}

StreamFeatureSequence make_stream(const SynthSpec& spec, const std::string& id, Stream stream, int label, int level,
                                  const Eigen::VectorXd& direction, std::uint64_t seed) {
  StreamFeatureSequence seq;
  seq.video_id = id;
  seq.stream = stream;
  seq.frames.resize(static_cast<Eigen::Index>(spec.frames), static_cast<Eigen::Index>(spec.dim));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, spec.noise);
  for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
    for (Eigen::Index d = 0; d < seq.frames.cols(); ++d) seq.frames(t, d) = normal(rng);
  }

  const std::size_t width = Hierarchy::level_width(level);
  const std::size_t slot = static_cast<std::size_t>(label - 1) % width;
  auto add = [&](std::size_t k, double sign) {
    const auto iv = level_interval(spec.frames, level, k);
    for (std::size_t t = iv.start; t < iv.end; ++t) {
      seq.frames.row(static_cast<Eigen::Index>(t)) += sign * spec.amplitude * direction.transpose();
    }
  };
  add(slot, 1.0);
  if (spec.balanced && level > 1) add(slot ^ 1, -1.0);

  seq.frames = seq.frames.cast<float>().cast<double>();
  return seq;
}

std::string video_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vid%05zu", index);
  return buf;
}

}  // namespace

void validate(const SynthSpec& spec) {
  auto bad = [](const std::string& msg) { fail(Errc::spec_invalid, msg); };
  if (spec.classes < 1) bad("classes must be at least 1");
  if (spec.per_class < 1) bad("per_class must be at least 1");
  if (spec.dim < 1) bad("dim must be at least 1");
  if (spec.level < 1 || spec.level > Hierarchy::kMaxDepth) bad("signal level out of range");
  if (!(spec.amplitude > 0.0 && std::isfinite(spec.amplitude))) bad("amplitude must be positive");
  if (!(spec.noise > 0.0 && std::isfinite(spec.noise))) bad("noise sigma must be positive");
  if (spec.streams != 1 && spec.streams != 2) bad("streams must be 1 or 2");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) bad("train fraction must lie in (0, 1)");
  if (spec.motion_level < 0 || spec.motion_level > Hierarchy::kMaxDepth) bad("motion level out of range");
  if (spec.frames < Hierarchy::level_width(spec.level)) {
    bad("T=" + std::to_string(spec.frames) + " is shorter than the " +
        std::to_string(Hierarchy::level_width(spec.level)) + " intervals of the signal level");
  }
  if (spec.streams == 2 && spec.frames < Hierarchy::level_width(motion_signal_level(spec))) {
    bad("T is shorter than the intervals of the motion signal level");
  }
}

int motion_signal_level(const SynthSpec& spec) {
  if (spec.motion_level > 0) return spec.motion_level;
  return spec.level > 1 ? spec.level - 1 : spec.level + 1;
}

std::vector<SynthVideo> generate(const SynthSpec& spec) {
  validate(spec);
  const auto appearance_dirs = class_directions(spec.classes, spec.dim, derive(spec.seed, 1, 0));
  const auto motion_dirs = class_directions(spec.classes, spec.dim, derive(spec.seed, 2, 0));
  const int motion_level = motion_signal_level(spec);
  const auto per_class = static_cast<std::size_t>(spec.per_class);
  const std::size_t total = static_cast<std::size_t>(spec.classes) * per_class;

  std::vector<SynthVideo> videos(total);
  parallel_for(total, [&](std::size_t v) {
    SynthVideo& out = videos[v];
    out.video_id = video_name(v);
    out.label = static_cast<int>(v / per_class) + 1;
    out.appearance = make_stream(spec, out.video_id, Stream::appearance, out.label, spec.level,
                                 appearance_dirs[static_cast<std::size_t>(out.label - 1)], derive(spec.seed, 3, v));
    if (spec.streams == 2) {
      out.motion = make_stream(spec, out.video_id, Stream::motion, out.label, motion_level,
                               motion_dirs[static_cast<std::size_t>(out.label - 1)], derive(spec.seed, 4, v));
    }
  });

  // stratified split: a seeded permutation per class, the first share goes to training
  const auto train_count = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(per_class)));
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<std::size_t> order(per_class);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive(spec.seed, 5, static_cast<std::uint64_t>(c)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t r = 0; r < per_class; ++r) {
      videos[static_cast<std::size_t>(c) * per_class + order[r]].split = r < train_count ? Split::train : Split::test;
    }
  }
  return videos;
}

DatasetManifest write_dataset(const SynthSpec& spec, const fs::path& dir) {
  const auto videos = generate(spec);
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  if (ec) fail(Errc::io, "cannot create " + (dir / "features").string() + ": " + ec.message());

  DatasetManifest manifest;
  for (int c = 1; c <= spec.classes; ++c) manifest.label_names[c] = "class" + std::to_string(c);
  manifest.records.resize(videos.size());
  parallel_for(videos.size(), [&](std::size_t v) {
    const auto& video = videos[v];
    VideoRecord& record = manifest.records[v];
    record.video_id = video.video_id;
    record.label = video.label;
    record.split = video.split;
    record.appearance = dir / "features" / (video.video_id + ".appearance.gpf");
    write_feature_file(video.appearance, *record.appearance);
    if (video.motion) {
      record.motion = dir / "features" / (video.video_id + ".motion.gpf");
      write_feature_file(*video.motion, *record.motion);
    }
  });
  write_manifest(manifest, dir / "manifest.jsonl");
  return manifest;
}

StreamFeatureSequence misalign(const StreamFeatureSequence& seq, long long shift) {
  const auto frames = static_cast<long long>(seq.frame_count());
  if (frames == 0) fail(Errc::zero_frames, "cannot shift an empty sequence");
  if (shift > frames || shift < -frames) {
    fail(Errc::shift_too_large, "shift " + std::to_string(shift) + " exceeds T=" + std::to_string(frames));
  }
  StreamFeatureSequence out = seq;
  for (long long t = 0; t < frames; ++t) {
    const long long dest = ((t + shift) % frames + frames) % frames;
    out.frames.row(static_cast<Eigen::Index>(dest)) = seq.frames.row(static_cast<Eigen::Index>(t));
  }
  return out;
}

StreamFeatureSequence duplicate_frames(const StreamFeatureSequence& seq, std::size_t repeat) {
  if (repeat == 0) fail(Errc::invalid_config, "repeat count must be positive");
  StreamFeatureSequence out;
  out.video_id = seq.video_id;
  out.stream = seq.stream;
  out.frames.resize(static_cast<Eigen::Index>(seq.frame_count() * repeat), seq.frames.cols());
  for (Eigen::Index t = 0; t < out.frames.rows(); ++t) {
    out.frames.row(t) = seq.frames.row(t / static_cast<Eigen::Index>(repeat));
  }
  return out;
}

}  // namespace hagg
