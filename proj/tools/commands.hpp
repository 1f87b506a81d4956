#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hagg/hagg.hpp"

namespace hagg::cli {

namespace fs = std::filesystem;

/// Kernel choice as given on the command line: a fixed gamma or the median heuristic.
struct KernelChoice {
  KernelKind kind = KernelKind::rbf;
  std::optional<double> gamma;  // unset: median heuristic over the training trees
};

KernelChoice parse_kernel_choice(const std::string& kind, const std::string& gamma);

struct PoolOptions {
  fs::path manifest;
  int depth = 3;
  std::optional<Stream> stream;  // unset: every stream a record has
  FeatureNorm norm = FeatureNorm::none;
  fs::path out;
};

struct SynthOptions {
  SynthSpec spec;
  fs::path out;
};

/// Settings shared by both training routes.
struct TrainOptions {
  fs::path manifest;
  int depth = 3;
  CombineVariant variant = CombineVariant::concatenation;
  KernelChoice kernel;
  Stream stream = Stream::appearance;
  FeatureNorm norm = FeatureNorm::none;
  TrainConfig svm;
  std::uint64_t seed = 0;
  fs::path out;
};

struct EmOptions {
  TrainOptions common;
  EmConfig em;
};

struct DmklOptions {
  TrainOptions common;
  ContrastiveConfig dmkl;
};

struct EvalOptions {
  fs::path model;
  fs::path manifest;
  fs::path out;
};

enum class FusionMode { kernel_avg, score_avg };

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& text);

struct FuseOptions {
  fs::path model_a;
  fs::path model_m;
  FusionMode mode = FusionMode::kernel_avg;
  double weight = 0.5;
  fs::path manifest;
  fs::path out;
};

struct ReportOptions {
  fs::path runs;
  fs::path out;
};

void cmd_pool(const PoolOptions& opts);
void cmd_gen_synth(const SynthOptions& opts);
void cmd_train_em(const EmOptions& opts);
void cmd_train_dmkl(const DmklOptions& opts);
void cmd_eval(const EvalOptions& opts);
void cmd_fuse_eval(const FuseOptions& opts);
void cmd_report(const ReportOptions& opts);

/// Process exit code for an error raised by a command.
int exit_code_for(const Error& error) noexcept;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

}  // namespace hagg::cli
