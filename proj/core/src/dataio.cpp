#include "hagg/dataio.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hagg/error.hpp"

namespace hagg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 4> kGpf1Magic{'G', 'P', 'F', '1'};

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

std::vector<unsigned char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string where(const fs::path& path, std::uint64_t offset) {
  return path.string() + " at byte offset " + std::to_string(offset);
}

}  // namespace

std::string_view to_string(Stream stream) noexcept {
  return stream == Stream::appearance ? "appearance" : "motion";
}

Stream parse_stream(std::string_view text) {
  if (text == "appearance") return Stream::appearance;
  if (text == "motion") return Stream::motion;
  fail(Errc::invalid_config, "unknown stream '" + std::string(text) + "'");
}

std::string_view to_string(Split split) noexcept { return split == Split::train ? "train" : "test"; }

void validate(const StreamFeatureSequence& seq) {
  if (seq.frame_count() == 0) fail(Errc::zero_frames, "sequence '" + seq.video_id + "' has no frames");
  if (seq.dim() == 0) fail(Errc::zero_dim, "sequence '" + seq.video_id + "' has zero-dimensional frames");
  for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
    for (Eigen::Index d = 0; d < seq.frames.cols(); ++d) {
      if (!std::isfinite(seq.frames(t, d))) {
        fail(Errc::non_finite, "sequence '" + seq.video_id + "' frame " + std::to_string(t) + " component " +
                                   std::to_string(d) + " is not finite");
      }
    }
  }
}

StreamFeatureSequence load_feature_file(const fs::path& path, std::string video_id, Stream stream) {
  const auto bytes = slurp(path);
  if (bytes.size() < kGpf1Magic.size()) fail(Errc::truncated, "missing magic in " + where(path, bytes.size()));
  if (!std::equal(kGpf1Magic.begin(), kGpf1Magic.end(), bytes.begin())) {
    fail(Errc::bad_magic, "expected \"GPF1\" in " + where(path, 0));
  }
  if (bytes.size() < kGpf1HeaderBytes) fail(Errc::truncated, "incomplete header in " + where(path, bytes.size()));
  const std::uint32_t dim = read_u32(bytes.data() + 4);
  const std::uint32_t frames = read_u32(bytes.data() + 8);
  if (dim == 0) fail(Errc::zero_dim, "dim = 0 in " + where(path, 4));
  if (frames == 0) fail(Errc::zero_frames, "T = 0 in " + where(path, 8));

  const std::uint64_t payload = std::uint64_t{dim} * frames * 4;
  const std::uint64_t expected = kGpf1HeaderBytes + payload;
  if (bytes.size() < expected) {
    const std::uint64_t rows = (bytes.size() - kGpf1HeaderBytes) / (std::uint64_t{dim} * 4);
    fail(Errc::truncated, "header declares T=" + std::to_string(frames) + " but only " + std::to_string(rows) +
                              " complete rows present; data ends in " + where(path, bytes.size()));
  }
  if (bytes.size() > expected) {
    fail(Errc::trailing_data, std::to_string(bytes.size() - expected) + " unexpected bytes after data in " +
                                  where(path, expected));
  }

  StreamFeatureSequence seq;
  seq.video_id = video_id.empty() ? path.stem().string() : std::move(video_id);
  seq.stream = stream;
  seq.frames.resize(frames, dim);
  const unsigned char* p = bytes.data() + kGpf1HeaderBytes;
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::uint32_t d = 0; d < dim; ++d, p += 4) {
      const float value = std::bit_cast<float>(read_u32(p));
      if (!std::isfinite(value)) {
        fail(Errc::non_finite, "frame " + std::to_string(t) + " component " + std::to_string(d) + " in " +
                                   where(path, static_cast<std::uint64_t>(p - bytes.data())));
      }
      seq.frames(t, d) = value;
    }
  }
  return seq;
}

void write_feature_file(const StreamFeatureSequence& seq, const fs::path& path) {
  validate(seq);
  if (seq.dim() > UINT32_MAX || seq.frame_count() > UINT32_MAX) {
    fail(Errc::invalid_config, "sequence '" + seq.video_id + "' too large for GPF1");
  }
  std::string out;
  out.reserve(kGpf1HeaderBytes + seq.frame_count() * seq.dim() * 4);
  out.append(kGpf1Magic.begin(), kGpf1Magic.end());
  put_u32(out, static_cast<std::uint32_t>(seq.dim()));
  put_u32(out, static_cast<std::uint32_t>(seq.frame_count()));
  for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
    for (Eigen::Index d = 0; d < seq.frames.cols(); ++d) {
      const auto value = static_cast<float>(seq.frames(t, d));
      if (!std::isfinite(value)) {
        fail(Errc::non_finite, "sequence '" + seq.video_id + "' frame " + std::to_string(t) + " component " +
                                   std::to_string(d) + " overflows 32-bit float");
      }
      put_u32(out, std::bit_cast<std::uint32_t>(value));
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(Errc::io, "cannot create " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) fail(Errc::io, "write failed for " + path.string());
}

const VideoRecord* DatasetManifest::find(std::string_view video_id) const noexcept {
  for (const auto& record : records) {
    if (record.video_id == video_id) return &record;
  }
  return nullptr;
}

std::vector<const VideoRecord*> DatasetManifest::split(Split which) const {
  std::vector<const VideoRecord*> out;
  for (const auto& record : records) {
    if (record.split == which) out.push_back(&record);
  }
  return out;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  DatasetManifest manifest;
  std::optional<std::map<int, std::string>> declared;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  auto context = [&] { return path.string() + ":" + std::to_string(line_no); };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      fail(Errc::parse, context() + ": " + e.what());
    }
    if (!obj.is_object()) fail(Errc::parse, context() + ": expected a JSON object");

    if (obj.contains("label_names")) {
      if (declared) fail(Errc::parse, context() + ": label_names declared twice");
      declared.emplace();
      for (const auto& [key, value] : obj.at("label_names").items()) {
        try {
          (*declared)[std::stoi(key)] = value.get<std::string>();
        } catch (const std::exception&) {
          fail(Errc::parse, context() + ": bad label_names entry '" + key + "'");
        }
      }
      continue;
    }

    VideoRecord record;
    try {
      record.video_id = obj.at("video_id").get<std::string>();
      record.label = obj.at("label").get<int>();
      const auto split = obj.at("split").get<std::string>();
      if (split == "train") {
        record.split = Split::train;
      } else if (split == "test") {
        record.split = Split::test;
      } else {
        fail(Errc::parse, context() + ": split must be \"train\" or \"test\"");
      }
      if (obj.contains("appearance") && !obj["appearance"].is_null()) {
        record.appearance = base / obj["appearance"].get<std::string>();
      }
      if (obj.contains("motion") && !obj["motion"].is_null()) {
        record.motion = base / obj["motion"].get<std::string>();
      }
    } catch (const json::exception& e) {
      fail(Errc::parse, context() + ": " + e.what());
    }
    if (!seen.insert(record.video_id).second) {
      fail(Errc::duplicate_id, context() + ": video_id '" + record.video_id + "' already used");
    }
    if (!record.appearance && !record.motion) {
      fail(Errc::missing_path, context() + ": record '" + record.video_id + "' has no stream path");
    }
    for (const auto* p : {&record.appearance, &record.motion}) {
      if (*p && !fs::exists(**p)) {
        fail(Errc::missing_path, context() + ": " + (*p)->string() + " does not exist");
      }
    }
    manifest.records.push_back(std::move(record));
  }

  if (declared) {
    int expected = 1;
    for (const auto& [id, name] : *declared) {
      if (id != expected++) fail(Errc::unknown_label, path.string() + ": declared class ids must be 1..C");
    }
    manifest.label_names = std::move(*declared);
    for (const auto& record : manifest.records) {
      if (!manifest.label_names.contains(record.label)) {
        fail(Errc::unknown_label, "record '" + record.video_id + "' has label " + std::to_string(record.label) +
                                      " outside declared classes 1.." +
                                      std::to_string(manifest.label_names.size()));
      }
    }
  } else {
    std::set<int> labels;
    for (const auto& record : manifest.records) labels.insert(record.label);
    const int count = static_cast<int>(labels.size());
    for (const auto& record : manifest.records) {
      if (record.label < 1 || record.label > count) {
        fail(Errc::unknown_label, "record '" + record.video_id + "' has label " + std::to_string(record.label) +
                                      "; labels must be contiguous 1.." + std::to_string(count));
      }
    }
    for (int c = 1; c <= count; ++c) manifest.label_names[c] = "class" + std::to_string(c);
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path().lexically_normal();
  auto relative = [&](const fs::path& p) {
    const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(base);
    return rel.empty() ? p.generic_string() : rel.generic_string();
  };

  std::ostringstream out;
  nlohmann::ordered_json names = nlohmann::ordered_json::object();
  for (const auto& [id, name] : manifest.label_names) names[std::to_string(id)] = name;
  out << nlohmann::ordered_json{{"label_names", names}}.dump() << '\n';
  for (const auto& record : manifest.records) {
    nlohmann::ordered_json obj;
    obj["video_id"] = record.video_id;
    obj["label"] = record.label;
    if (record.appearance) obj["appearance"] = relative(*record.appearance);
    if (record.motion) obj["motion"] = relative(*record.motion);
    obj["split"] = std::string(to_string(record.split));
    out << obj.dump() << '\n';
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) fail(Errc::io, "cannot create " + path.string());
  file << out.str();
  if (!file) fail(Errc::io, "write failed for " + path.string());
}

StreamFeatureSequence load_record_stream(const VideoRecord& record, Stream stream) {
  const auto& path = record.path_for(stream);
  if (!path) {
    fail(Errc::missing_features,
         "record '" + record.video_id + "' has no " + std::string(to_string(stream)) + " stream");
  }
  return load_feature_file(*path, record.video_id, stream);
}

}  // namespace hagg
