#include "hagg/pipeline.hpp"

#include "hagg/error.hpp"
#include "hagg/parallel.hpp"

namespace hagg {

PooledSplit load_split(const DatasetManifest& manifest, Split split, Stream stream, int depth, FeatureNorm norm) {
  const Hierarchy hierarchy(depth);
  const auto records = manifest.split(split);
  if (records.empty()) fail(Errc::empty_split, "the " + std::string(to_string(split)) + " split has no videos");
  PooledSplit out;
  out.trees.resize(records.size());
  out.labels.resize(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    out.trees[i] = pool_sequence(load_record_stream(*records[i], stream), hierarchy, norm);
    out.labels[i] = records[i]->label;
  });
  return out;
}

std::vector<PooledTree> load_training_trees(const ModelArtifact& artifact, const DatasetManifest& manifest) {
  const auto& ids = artifact.model.training_ids;
  std::vector<const VideoRecord*> records;
  for (const auto& id : ids) {
    const VideoRecord* record = manifest.find(id);
    if (!record) fail(Errc::artifact_mismatch, "training video '" + id + "' is not in the manifest");
    records.push_back(record);
  }
  const Hierarchy hierarchy(artifact.config.depth);
  std::vector<PooledTree> trees(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    trees[i] = pool_sequence(load_record_stream(*records[i], artifact.config.stream), hierarchy, artifact.config.norm);
  });
  return trees;
}

CrossKernel artifact_cross_kernel(const ModelArtifact& artifact, std::span<const PooledTree> queries,
                                  std::span<const PooledTree> training) {
  if (training.size() != artifact.model.training_ids.size()) {
    fail(Errc::artifact_mismatch, "training trees do not match the artifact's training set");
  }
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training[i].video_id != artifact.model.training_ids[i]) {
      fail(Errc::artifact_mismatch, "training tree order differs from the artifact");
    }
  }
  const std::size_t nodes = artifact.beta.size();
  for (const auto& q : queries) {
    if (q.node_count() != nodes) fail(Errc::artifact_mismatch, "query '" + q.video_id + "' has the wrong depth");
  }
  return cross_kernel(queries, training, artifact.beta, artifact.config.variant, artifact.config.kernel);
}

std::vector<std::vector<double>> score_rows(const SvmModel& model, const CrossKernel& kernel) {
  if (static_cast<std::size_t>(kernel.values.cols()) != model.training_ids.size()) {
    fail(Errc::shape_mismatch, "kernel columns do not match the training set");
  }
  std::vector<std::vector<double>> out(static_cast<std::size_t>(kernel.values.rows()));
  parallel_for(out.size(), [&](std::size_t r) {
    std::vector<double> row(static_cast<std::size_t>(kernel.values.cols()));
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = kernel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
    }
    out[r] = decision_scores(model, row);
  });
  return out;
}

std::vector<int> predict_rows(std::span<const std::vector<double>> scores) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(argmax_class(s));
  return out;
}

Metrics evaluate(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (truth.size() != predicted.size()) fail(Errc::shape_mismatch, "truth and predictions differ in count");
  if (truth.empty()) fail(Errc::empty_split, "nothing to evaluate");
  if (num_classes < 1) fail(Errc::invalid_config, "need at least one class");
  const auto c = static_cast<std::size_t>(num_classes);
  Metrics m;
  m.per_class.assign(c, 0.0);
  m.per_class_count.assign(c, 0);
  m.confusion.assign(c, std::vector<int>(c, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 1 || truth[i] > num_classes || predicted[i] < 1 || predicted[i] > num_classes) {
      fail(Errc::unknown_label, "label outside 1.." + std::to_string(num_classes));
    }
    const auto t = static_cast<std::size_t>(truth[i] - 1);
    const auto p = static_cast<std::size_t>(predicted[i] - 1);
    ++m.confusion[t][p];
    ++m.per_class_count[t];
    if (t == p) ++correct;
  }
  for (std::size_t k = 0; k < c; ++k) {
    m.per_class[k] = m.per_class_count[k] ? static_cast<double>(m.confusion[k][k]) / m.per_class_count[k] : 0.0;
  }
  m.overall_accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  return m;
}

}  // namespace hagg
