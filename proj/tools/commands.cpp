#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hagg::cli {

using ojson = nlohmann::ordered_json;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Files produced by one command, listed in outputs.json when the command finishes.
class OutputSet {
 public:
  OutputSet(std::string command, fs::path dir) : command_(std::move(command)), dir_(std::move(dir)) {
    if (dir_.empty()) fail(Errc::invalid_config, "--out is required");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(Errc::io, "cannot create " + dir_.string() + ": " + ec.message());
  }

  const fs::path& dir() const noexcept { return dir_; }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    fs::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) fail(Errc::io, "cannot create " + path.string());
    file << content;
    if (!file) fail(Errc::io, "write failed for " + path.string());
    add(name);
  }

  void add(const std::string& name) { files_.insert(fs::path(name).generic_string()); }

  void finish() {
    ojson doc;
    doc["command"] = command_;
    doc["files"] = std::vector<std::string>(files_.begin(), files_.end());
    std::ofstream file(dir_ / "outputs.json", std::ios::binary | std::ios::trunc);
    file << doc.dump(2) << '\n';
    if (!file) fail(Errc::io, "write failed for outputs.json");
  }

 private:
  std::string command_;
  fs::path dir_;
  std::set<std::string> files_;
};

void check_depth(int depth) {
  if (depth < 1 || depth > 8) fail(Errc::invalid_config, "depth must lie in 1..8, got " + std::to_string(depth));
}

std::string beta_csv(std::span<const double> beta, int depth) {
  const Hierarchy hierarchy(depth);
  std::string out = "node,level,index,beta\n";
  for (std::size_t p = 0; p < beta.size(); ++p) {
    const NodeId node = hierarchy.node(p);
    out += node_key(node) + "," + std::to_string(node.level) + "," + std::to_string(node.index) + "," +
           fmt_double(beta[p]) + "\n";
  }
  return out;
}

std::string level_csv(std::span<const double> beta, int depth) {
  std::string out = "level,beta\n";
  for (int level = 1; level <= depth; ++level) {
    double sum = 0.0;
    for (std::size_t k = 0; k < Hierarchy::level_width(level); ++k) sum += beta[Hierarchy::level_offset(level) + k];
    out += std::to_string(level) + "," + fmt_double(sum) + "\n";
  }
  return out;
}

ojson metrics_json(const Metrics& m, const DatasetManifest& manifest) {
  ojson per_class = ojson::array();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const int id = static_cast<int>(c) + 1;
    const auto name = manifest.label_names.count(id) ? manifest.label_names.at(id) : std::to_string(id);
    per_class.push_back(ojson{{"class", id}, {"name", name}, {"count", m.per_class_count[c]}, {"accuracy", m.per_class[c]}});
  }
  ojson doc;
  doc["overall_accuracy"] = m.overall_accuracy;
  doc["per_class"] = std::move(per_class);
  doc["confusion"] = m.confusion;
  return doc;
}

std::string predictions_csv(std::span<const PooledTree> trees, std::span<const int> truth, std::span<const int> predicted) {
  std::string out = "video_id,label,predicted\n";
  for (std::size_t i = 0; i < trees.size(); ++i) {
    out += trees[i].video_id + "," + std::to_string(truth[i]) + "," + std::to_string(predicted[i]) + "\n";
  }
  return out;
}

struct RunSummary {
  std::string command;
  std::string route;
  std::string variant;
  int depth = 0;
  std::string stream;
  std::optional<double> accuracy;
};

std::string run_json(const RunSummary& run) {
  ojson doc;
  doc["command"] = run.command;
  doc["route"] = run.route;
  doc["variant"] = run.variant;
  doc["depth"] = run.depth;
  doc["stream"] = run.stream;
  if (run.accuracy) doc["test_accuracy"] = *run.accuracy;
  return doc.dump(2) + "\n";
}

int num_classes_of(const DatasetManifest& manifest, const SvmModel& model) {
  return std::max(manifest.num_classes(), model.num_classes());
}

/// Scores, predictions and metrics of a trained artifact on the test split.
struct TestOutcome {
  PooledSplit test;
  std::vector<std::vector<double>> scores;
  std::vector<int> predicted;
  Metrics metrics;
};

TestOutcome score_artifact(const ModelArtifact& artifact, std::span<const PooledTree> training,
                           const DatasetManifest& manifest) {
  TestOutcome out;
  out.test = load_split(manifest, Split::test, artifact.config.stream, artifact.config.depth, artifact.config.norm);
  const CrossKernel kernel = artifact_cross_kernel(artifact, out.test.trees, training);
  out.scores = score_rows(artifact.model, kernel);
  out.predicted = predict_rows(out.scores);
  out.metrics = evaluate(out.test.labels, out.predicted, num_classes_of(manifest, artifact.model));
  return out;
}

struct Prepared {
  DatasetManifest manifest;
  PooledSplit train;
  KernelConfig kernel;
};

void validate_common(const TrainOptions& opts) {
  check_depth(opts.depth);
  validate(opts.svm);
  if (opts.kernel.gamma) validate(KernelConfig{opts.kernel.kind, *opts.kernel.gamma});
  if (opts.manifest.empty()) fail(Errc::invalid_config, "--manifest is required");
  if (opts.out.empty()) fail(Errc::invalid_config, "--out is required");
}

Prepared prepare(const TrainOptions& opts) {
  Prepared p;
  p.manifest = load_manifest(opts.manifest);
  p.train = load_split(p.manifest, Split::train, opts.stream, opts.depth, opts.norm);
  p.kernel.kind = opts.kernel.kind;
  if (opts.kernel.kind == KernelKind::linear) {
    p.kernel.gamma = opts.kernel.gamma.value_or(1.0);
  } else {
    p.kernel.gamma = opts.kernel.gamma ? *opts.kernel.gamma : median_gamma(p.train.trees, opts.seed);
  }
  return p;
}

ModelConfig model_config(const TrainOptions& opts, const KernelConfig& kernel, std::string route) {
  ModelConfig cfg;
  cfg.depth = opts.depth;
  cfg.variant = opts.variant;
  cfg.kernel = kernel;
  cfg.norm = opts.norm;
  cfg.stream = opts.stream;
  cfg.route = std::move(route);
  cfg.svm = opts.svm;
  return cfg;
}

/// Writes the artifact, weight tables, test metrics and run summary.
void finish_training(OutputSet& out, const ModelArtifact& artifact, const Prepared& prepared, const char* command) {
  out.write("model.json", serialize_artifact(artifact));
  out.write("beta.csv", beta_csv(artifact.beta, artifact.config.depth));
  out.write("level_beta.csv", level_csv(artifact.beta, artifact.config.depth));

  RunSummary run{command, artifact.config.route, std::string(to_string(artifact.config.variant)),
                 artifact.config.depth, std::string(to_string(artifact.config.stream)), std::nullopt};
  if (!prepared.manifest.split(Split::test).empty()) {
    const TestOutcome test = score_artifact(artifact, prepared.train.trees, prepared.manifest);
    out.write("metrics.json", metrics_json(test.metrics, prepared.manifest).dump(2) + "\n");
    out.write("predictions.csv", predictions_csv(test.test.trees, test.test.labels, test.predicted));
    run.accuracy = test.metrics.overall_accuracy;
  }
  out.write("run.json", run_json(run));
  out.finish();
}

}  // namespace

KernelChoice parse_kernel_choice(const std::string& kind, const std::string& gamma) {
  KernelChoice out;
  out.kind = parse_kernel_kind(kind);
  if (gamma != "median") {
    double value = 0.0;
    const auto res = std::from_chars(gamma.data(), gamma.data() + gamma.size(), value);
    if (res.ec != std::errc{} || res.ptr != gamma.data() + gamma.size()) {
      fail(Errc::invalid_config, "gamma must be a number or 'median', got '" + gamma + "'");
    }
    out.gamma = value;
    validate(KernelConfig{out.kind, value});
  }
  return out;
}

std::string to_string(FusionMode mode) { return mode == FusionMode::kernel_avg ? "kernel-avg" : "score-avg"; }

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "kernel-avg") return FusionMode::kernel_avg;
  if (text == "score-avg") return FusionMode::score_avg;
  fail(Errc::invalid_config, "unknown fusion mode '" + text + "'");
}

int exit_code_for(const Error& error) noexcept { return is_numerical(error.code()) ? kExitNumerical : kExitValidation; }

void cmd_pool(const PoolOptions& opts) {
  check_depth(opts.depth);
  if (opts.manifest.empty()) fail(Errc::invalid_config, "--manifest is required");
  OutputSet out("pool", opts.out);
  const DatasetManifest manifest = load_manifest(opts.manifest);
  const Hierarchy hierarchy(opts.depth);

  struct Job {
    const VideoRecord* record;
    Stream stream;
    std::string name;
  };
  std::vector<Job> jobs;
  for (const auto& record : manifest.records) {
    for (Stream stream : {Stream::appearance, Stream::motion}) {
      if (opts.stream && *opts.stream != stream) continue;
      if (!record.path_for(stream)) {
        if (opts.stream) load_record_stream(record, stream);  // raises MissingFeatures
        continue;
      }
      jobs.push_back({&record, stream, "pooled/" + record.video_id + "." + std::string(to_string(stream)) + ".gpt"});
    }
  }
  fs::create_directories(out.dir() / "pooled");
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto tree = pool_sequence(load_record_stream(*jobs[j].record, jobs[j].stream), hierarchy, opts.norm);
    write_pooled_tree(tree, out.dir() / jobs[j].name);
  });
  for (const auto& job : jobs) out.add(job.name);
  out.finish();
}

void cmd_gen_synth(const SynthOptions& opts) {
  validate(opts.spec);
  OutputSet out("gen-synth", opts.out);
  const DatasetManifest manifest = write_dataset(opts.spec, out.dir());
  out.add("manifest.jsonl");
  for (const auto& record : manifest.records) {
    for (Stream stream : {Stream::appearance, Stream::motion}) {
      if (record.path_for(stream)) out.add(fs::relative(*record.path_for(stream), out.dir()).generic_string());
    }
  }
  out.finish();
}

void cmd_train_em(const EmOptions& opts) {
  validate_common(opts.common);
  validate(opts.em);
  const Prepared prepared = prepare(opts.common);
  OutputSet out("train-em", opts.common.out);

  const EmResult fit = em_fit(prepared.train.trees, prepared.train.labels, opts.common.variant, prepared.kernel,
                              opts.em, opts.common.svm);
  ModelArtifact artifact;
  artifact.config = model_config(opts.common, prepared.kernel, "em");
  artifact.config.training = {{"eta", fmt_double(opts.em.eta)},
                              {"max_iters", std::to_string(opts.em.max_iters)},
                              {"param_tol", fmt_double(opts.em.param_tol)},
                              {"objective", std::string(to_string(opts.em.objective))},
                              {"iterations", std::to_string(fit.iterations)},
                              {"converged", fit.converged ? "true" : "false"}};
  artifact.beta = fit.beta;
  artifact.model = fit.model;

  std::string trace = "iteration,objective,entropy\n";
  for (const auto& row : fit.trace) {
    trace += std::to_string(row.iteration) + "," + fmt_double(row.objective) + "," + fmt_double(row.entropy) + "\n";
  }
  out.write("trace.csv", trace);
  finish_training(out, artifact, prepared, "train-em");
}

void cmd_train_dmkl(const DmklOptions& opts) {
  validate_common(opts.common);
  validate(opts.dmkl);
  const Prepared prepared = prepare(opts.common);
  OutputSet out("train-dmkl", opts.common.out);

  const DmklModel fit = dmkl_then_svm(prepared.train.trees, prepared.train.labels, opts.common.variant,
                                      prepared.kernel, opts.dmkl, opts.common.svm);
  ModelArtifact artifact;
  artifact.config = model_config(opts.common, prepared.kernel, "dmkl");
  artifact.config.training = {
      {"lr", fmt_double(opts.dmkl.lr)},
      {"batch", std::to_string(opts.dmkl.batch)},
      {"iters", std::to_string(opts.dmkl.iters)},
      {"margin", fmt_double(opts.dmkl.margin)},
      {"seed", std::to_string(opts.dmkl.seed)},
      {"optimizer", std::string(to_string(opts.dmkl.optimizer))},
      {"positive_fraction", opts.dmkl.positive_fraction ? fmt_double(*opts.dmkl.positive_fraction) : "natural"},
      {"pairs_consumed", std::to_string(fit.fit.pairs_consumed)},
      {"distinct_pairs", std::to_string(fit.fit.distinct_pairs)}};
  artifact.beta = fit.fit.beta;
  artifact.model = fit.model;

  std::string trace = "iteration,eval_loss,batch_loss\n";
  for (const auto& row : fit.fit.trace) {
    trace += std::to_string(row.iteration) + "," + fmt_double(row.eval_loss) + "," + fmt_double(row.batch_loss) + "\n";
  }
  out.write("loss_trace.csv", trace);
  finish_training(out, artifact, prepared, "train-dmkl");
}

void cmd_eval(const EvalOptions& opts) {
  if (opts.model.empty() || opts.manifest.empty()) fail(Errc::invalid_config, "--model and --manifest are required");
  const ModelArtifact artifact = load_artifact(opts.model);
  const DatasetManifest manifest = load_manifest(opts.manifest);
  if (manifest.split(Split::test).empty()) fail(Errc::empty_split, "the test split has no videos");
  OutputSet out("eval", opts.out);

  const auto training = load_training_trees(artifact, manifest);
  const TestOutcome test = score_artifact(artifact, training, manifest);
  out.write("metrics.json", metrics_json(test.metrics, manifest).dump(2) + "\n");
  out.write("predictions.csv", predictions_csv(test.test.trees, test.test.labels, test.predicted));
  out.write("beta.csv", beta_csv(artifact.beta, artifact.config.depth));
  out.write("level_beta.csv", level_csv(artifact.beta, artifact.config.depth));
  out.write("run.json", run_json({"eval", artifact.config.route, std::string(to_string(artifact.config.variant)),
                                  artifact.config.depth, std::string(to_string(artifact.config.stream)),
                                  test.metrics.overall_accuracy}));
  out.finish();
}

void cmd_fuse_eval(const FuseOptions& opts) {
  if (opts.model_a.empty() || opts.model_m.empty() || opts.manifest.empty()) {
    fail(Errc::invalid_config, "--model-a, --model-m and --manifest are required");
  }
  if (!(opts.weight >= 0.0 && opts.weight <= 1.0)) fail(Errc::invalid_config, "fusion weight must lie in [0, 1]");
  const ModelArtifact a = load_artifact(opts.model_a);
  const ModelArtifact m = load_artifact(opts.model_m);
  if (a.config.depth != m.config.depth || a.config.variant != m.config.variant ||
      a.config.kernel.kind != m.config.kernel.kind) {
    fail(Errc::config_mismatch, "artifacts differ in depth, variant or kernel kind");
  }
  if (a.model.training_ids != m.model.training_ids || a.model.training_labels != m.model.training_labels) {
    fail(Errc::config_mismatch, "artifacts were trained on different videos");
  }
  const DatasetManifest manifest = load_manifest(opts.manifest);
  if (manifest.split(Split::test).empty()) fail(Errc::empty_split, "the test split has no videos");
  OutputSet out("fuse-eval", opts.out);

  const auto train_a = load_training_trees(a, manifest);
  const auto train_m = load_training_trees(m, manifest);
  const PooledSplit test_a = load_split(manifest, Split::test, a.config.stream, a.config.depth, a.config.norm);
  const PooledSplit test_m = load_split(manifest, Split::test, m.config.stream, m.config.depth, m.config.norm);
  const CrossKernel cross_a = artifact_cross_kernel(a, test_a.trees, train_a);
  const CrossKernel cross_m = artifact_cross_kernel(m, test_m.trees, train_m);

  std::vector<std::vector<double>> scores;
  if (opts.mode == FusionMode::score_avg) {
    const auto sa = score_rows(a.model, cross_a);
    const auto sm = score_rows(m.model, cross_m);
    scores = sa;
    for (std::size_t r = 0; r < scores.size(); ++r) {
      for (std::size_t c = 0; c < scores[r].size(); ++c) scores[r][c] = opts.weight * sa[r][c] + (1.0 - opts.weight) * sm[r][c];
    }
  } else {
    // fused kernel on both sides; the machines are retrained on the fused training Gram
    const GramMatrix gram = fuse_kernels(gram_matrix(train_a, a.beta, a.config.variant, a.config.kernel),
                                         gram_matrix(train_m, m.beta, m.config.variant, m.config.kernel), opts.weight);
    const SvmModel fused = train_one_vs_rest(gram, a.model.training_labels, a.config.svm);
    scores = score_rows(fused, fuse_kernels(cross_a, cross_m, opts.weight));
  }
  const auto predicted = predict_rows(scores);
  const Metrics metrics = evaluate(test_a.labels, predicted, num_classes_of(manifest, a.model));

  ojson doc = metrics_json(metrics, manifest);
  doc["mode"] = to_string(opts.mode);
  doc["weight"] = opts.weight;
  out.write("metrics.json", doc.dump(2) + "\n");
  out.write("predictions.csv", predictions_csv(test_a.trees, test_a.labels, predicted));
  out.write("run.json", run_json({"fuse-eval", a.config.route, std::string(to_string(a.config.variant)),
                                  a.config.depth, "fused", metrics.overall_accuracy}));
  out.finish();
}

void cmd_report(const ReportOptions& opts) {
  if (opts.runs.empty()) fail(Errc::invalid_config, "--runs is required");
  if (!fs::is_directory(opts.runs)) fail(Errc::no_runs, opts.runs.string() + " is not a directory");

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(opts.runs)) {
    if (entry.is_regular_file() && entry.path().filename() == "run.json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  using Key = std::tuple<std::string, std::string, int>;  // route, variant, depth
  std::map<Key, std::map<std::string, std::pair<double, int>>> grid;
  std::set<std::string> streams;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    ojson doc;
    try {
      doc = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::parse, file.string() + ": " + e.what());
    }
    if (!doc.contains("test_accuracy")) continue;
    const Key key{doc.at("route").get<std::string>(), doc.at("variant").get<std::string>(), doc.at("depth").get<int>()};
    const auto stream = doc.at("stream").get<std::string>();
    auto& cell = grid[key][stream];
    cell.first += doc.at("test_accuracy").get<double>();
    ++cell.second;
    streams.insert(stream);
  }
  if (grid.empty()) fail(Errc::no_runs, "no completed runs under " + opts.runs.string());

  std::vector<std::string> columns;
  for (const char* known : {"appearance", "motion", "fused"}) {
    if (streams.erase(known)) columns.push_back(known);
  }
  columns.insert(columns.end(), streams.begin(), streams.end());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"route", "variant", "depth"};
  header.insert(header.end(), columns.begin(), columns.end());
  rows.push_back(header);
  for (const auto& [key, cells] : grid) {
    std::vector<std::string> row{std::get<0>(key), std::get<1>(key), std::to_string(std::get<2>(key))};
    for (const auto& col : columns) {
      const auto it = cells.find(col);
      if (it == cells.end()) {
        row.emplace_back();
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", it->second.first / it->second.second);
        row.emplace_back(buf);
      }
    }
    rows.push_back(std::move(row));
  }

  std::string csv;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) csv += (c ? "," : "") + row[c];
    csv += "\n";
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::string text;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      std::string cell = rows[r][c].empty() ? "-" : rows[r][c];
      line += (c ? "  " : "") + cell + std::string(widths[c] > cell.size() ? widths[c] - cell.size() : 0, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    text += line + "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      text += std::string(total + 2 * (widths.size() - 1), '-') + "\n";
    }
  }

  OutputSet out("report", opts.out);
  out.write("report.csv", csv);
  out.write("report.txt", text);
  out.finish();
}

}  // namespace hagg::cli
