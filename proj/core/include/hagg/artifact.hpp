#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hagg/hierarchy.hpp"
#include "hagg/kernels.hpp"
#include "hagg/svm.hpp"

namespace hagg {

/// Everything needed to rebuild the kernel a model was trained with.
struct ModelConfig {
  int depth = 1;
  CombineVariant variant = CombineVariant::concatenation;
  KernelConfig kernel;
  FeatureNorm norm = FeatureNorm::none;
  Stream stream = Stream::appearance;
  std::string route = "em";  // "em" or "dmkl"
  TrainConfig svm;
  /// Route-specific settings and outcomes, already formatted.
  std::map<std::string, std::string> training;
};

struct ModelArtifact {
  ModelConfig config;
  std::vector<double> beta;  // canonical node order
  SvmModel model;
};

/// Checks depth, weight count and machine shapes against each other.
void validate(const ModelArtifact& artifact);

/// Deterministic JSON text: doubles are written with round-trip precision,
/// per-class machines list only their support videos.
std::string serialize_artifact(const ModelArtifact& artifact);
ModelArtifact parse_artifact(const std::string& text);

void write_artifact(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_artifact(const std::filesystem::path& path);

}  // namespace hagg
