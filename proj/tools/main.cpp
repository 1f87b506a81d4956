#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace hagg;
using namespace hagg::cli;

namespace {

struct TrainFlags {
  std::string manifest, variant = "concat", kernel = "rbf", gamma = "median", stream = "appearance", norm = "none",
              out, c_box = "10";
  int depth = 3;
  TrainConfig svm;
  std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--manifest", f.manifest, "Dataset manifest (JSON lines)")->required();
  cmd->add_option("--depth", f.depth, "Hierarchy depth D (1..8)")->capture_default_str();
  cmd->add_option("--variant", f.variant, "Kernel combination: concat or avg")->capture_default_str();
  cmd->add_option("--kernel", f.kernel, "Elementary kernel: rbf or linear")->capture_default_str();
  cmd->add_option("--gamma", f.gamma, "RBF gamma or 'median'")->capture_default_str();
  cmd->add_option("--stream", f.stream, "appearance or motion")->capture_default_str();
  cmd->add_option("--norm", f.norm, "Feature normalization: none, frame-l2, node-l2")->capture_default_str();
  cmd->add_option("--c-box", f.c_box, "Dual box bound, or 'inf' for hard margin")->capture_default_str();
  cmd->add_option("--kkt-tol", f.svm.kkt_tol, "KKT violation tolerance")->capture_default_str();
  cmd->add_option("--max-passes", f.svm.max_passes, "Solver budget in passes over the data")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for sampling")->capture_default_str();
  cmd->add_option("--out", f.out, "Output directory")->required();
}

double parse_c_box(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  fail(Errc::invalid_config, "--c-box must be a number or 'inf'");
}

TrainOptions to_options(const TrainFlags& f) {
  TrainOptions o;
  o.manifest = f.manifest;
  o.depth = f.depth;
  o.variant = parse_variant(f.variant);
  o.kernel = parse_kernel_choice(f.kernel, f.gamma);
  o.stream = parse_stream(f.stream);
  o.norm = parse_feature_norm(f.norm);
  o.svm = f.svm;
  o.svm.c_box = parse_c_box(f.c_box);
  o.seed = f.seed;
  o.out = f.out;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical temporal aggregation with multiple-kernel SVMs"};
  app.require_subcommand(1);

  std::string manifest, out, stream, norm = "none";
  int depth = 3;
  auto* pool = app.add_subcommand("pool", "Pool frame features into temporal trees");
  pool->add_option("--manifest", manifest, "Dataset manifest")->required();
  pool->add_option("--depth", depth, "Hierarchy depth D (1..8)")->capture_default_str();
  pool->add_option("--stream", stream, "Only this stream (default: all)");
  pool->add_option("--norm", norm, "Feature normalization")->capture_default_str();
  pool->add_option("--out", out, "Output directory")->required();

  SynthSpec spec;
  bool unbalanced = false;
  std::string synth_out;
  auto* synth = app.add_subcommand("gen-synth", "Generate a synthetic multi-granularity dataset");
  synth->add_option("--classes", spec.classes)->capture_default_str();
  synth->add_option("--per-class", spec.per_class)->capture_default_str();
  synth->add_option("--frames", spec.frames)->capture_default_str();
  synth->add_option("--dim", spec.dim)->capture_default_str();
  synth->add_option("--level", spec.level, "Discriminative level")->capture_default_str();
  synth->add_option("--amplitude", spec.amplitude)->capture_default_str();
  synth->add_option("--noise", spec.noise)->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--streams", spec.streams, "1 or 2")->capture_default_str();
  synth->add_option("--motion-level", spec.motion_level, "Motion signal level (0: automatic)")->capture_default_str();
  synth->add_option("--train-fraction", spec.train_fraction)->capture_default_str();
  synth->add_flag("--unbalanced", unbalanced, "Do not cancel the signal in the sibling interval");
  synth->add_option("--out", synth_out, "Output directory")->required();

  TrainFlags em_flags;
  EmConfig em;
  std::string objective = "saddle";
  auto* train_em = app.add_subcommand("train-em", "Alternating SVM / weight training");
  add_train_flags(train_em, em_flags);
  train_em->add_option("--eta", em.eta, "Weight step damping")->capture_default_str();
  train_em->add_option("--max-iters", em.max_iters)->capture_default_str();
  train_em->add_option("--param-tol", em.param_tol)->capture_default_str();
  train_em->add_option("--objective", objective, "Weight objective: saddle or joint")->capture_default_str();
  train_em->add_option("--max-backtracks", em.max_backtracks)->capture_default_str();

  TrainFlags dmkl_flags;
  ContrastiveConfig dmkl;
  std::string optimizer = "adam";
  double positive_fraction = -1.0;
  auto* train_dmkl = app.add_subcommand("train-dmkl", "Contrastive weight learning followed by SVM training");
  add_train_flags(train_dmkl, dmkl_flags);
  train_dmkl->add_option("--lr", dmkl.lr)->capture_default_str();
  train_dmkl->add_option("--batch", dmkl.batch, "Pairs per batch")->capture_default_str();
  train_dmkl->add_option("--iters", dmkl.iters)->capture_default_str();
  train_dmkl->add_option("--margin", dmkl.margin)->capture_default_str();
  train_dmkl->add_option("--positive-fraction", positive_fraction, "Same-class share per batch (default: natural)");
  train_dmkl->add_option("--optimizer", optimizer, "adam or sgd")->capture_default_str();
  train_dmkl->add_option("--eval-pairs", dmkl.eval_pairs)->capture_default_str();

  std::string model;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test split");
  eval->add_option("--model", model, "Model artifact")->required();
  eval->add_option("--manifest", manifest, "Dataset manifest")->required();
  eval->add_option("--out", out, "Output directory")->required();

  std::string model_a, model_m, mode = "kernel-avg";
  double weight = 0.5;
  auto* fuse = app.add_subcommand("fuse-eval", "Evaluate a two-stream fusion");
  fuse->add_option("--model-a", model_a, "Appearance artifact")->required();
  fuse->add_option("--model-m", model_m, "Motion artifact")->required();
  fuse->add_option("--mode", mode, "kernel-avg or score-avg")->capture_default_str();
  fuse->add_option("--weight", weight, "Weight of the appearance stream")->capture_default_str();
  fuse->add_option("--manifest", manifest, "Dataset manifest")->required();
  fuse->add_option("--out", out, "Output directory")->required();

  std::string runs;
  auto* report = app.add_subcommand("report", "Aggregate completed runs into an accuracy grid");
  report->add_option("--runs", runs, "Directory holding run outputs")->required();
  report->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*pool) {
      PoolOptions o;
      o.manifest = manifest;
      o.depth = depth;
      if (!stream.empty()) o.stream = parse_stream(stream);
      o.norm = parse_feature_norm(norm);
      o.out = out;
      cmd_pool(o);
    } else if (*synth) {
      spec.balanced = !unbalanced;
      cmd_gen_synth({spec, synth_out});
    } else if (*train_em) {
      em.objective = parse_beta_objective(objective);
      cmd_train_em({to_options(em_flags), em});
    } else if (*train_dmkl) {
      dmkl.seed = dmkl_flags.seed;
      dmkl.optimizer = parse_optimizer(optimizer);
      if (positive_fraction >= 0.0) dmkl.positive_fraction = positive_fraction;
      cmd_train_dmkl({to_options(dmkl_flags), dmkl});
    } else if (*eval) {
      cmd_eval({model, manifest, out});
    } else if (*fuse) {
      cmd_fuse_eval({model_a, model_m, parse_fusion_mode(mode), weight, manifest, out});
    } else if (*report) {
      cmd_report({runs, out});
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
