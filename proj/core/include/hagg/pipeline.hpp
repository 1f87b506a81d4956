#pragma once

#include <span>
#include <string>
#include <vector>

#include "hagg/artifact.hpp"
#include "hagg/dataio.hpp"
#include "hagg/hierarchy.hpp"
#include "hagg/kernels.hpp"
#include "hagg/svm.hpp"

namespace hagg {

/// Pooled trees of one split, in manifest order, with their labels.
struct PooledSplit {
  std::vector<PooledTree> trees;
  std::vector<int> labels;
};

/// Loads and pools every record of the split. Throws EmptySplit when the
/// split has no videos.
PooledSplit load_split(const DatasetManifest& manifest, Split split, Stream stream, int depth,
                       FeatureNorm norm = FeatureNorm::none);

/// Pools the artifact's training videos, in the artifact's order.
std::vector<PooledTree> load_training_trees(const ModelArtifact& artifact, const DatasetManifest& manifest);

/// Kernel values of the queries against the artifact's training videos.
CrossKernel artifact_cross_kernel(const ModelArtifact& artifact, std::span<const PooledTree> queries,
                                  std::span<const PooledTree> training);

/// Per-class decision scores, one row per query.
std::vector<std::vector<double>> score_rows(const SvmModel& model, const CrossKernel& kernel);

std::vector<int> predict_rows(std::span<const std::vector<double>> scores);

struct Metrics {
  double overall_accuracy = 0.0;
  std::vector<double> per_class;               // accuracy of class c at index c - 1
  std::vector<int> per_class_count;
  std::vector<std::vector<int>> confusion;     // confusion[true - 1][predicted - 1]
};

Metrics evaluate(std::span<const int> truth, std::span<const int> predicted, int num_classes);

}  // namespace hagg
