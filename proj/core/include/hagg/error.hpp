#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hagg {

enum class Errc {
  io,
  bad_magic,
  truncated,
  trailing_data,
  non_finite,
  zero_frames,
  zero_dim,
  parse,
  duplicate_id,
  unknown_label,
  missing_path,
  insufficient_frames,
  dim_mismatch,
  shape_mismatch,
  id_mismatch,
  degenerate_data,
  not_on_simplex,
  empty_input,
  single_class,
  too_few_videos,
  spec_invalid,
  shift_too_large,
  invalid_config,
  missing_features,
  artifact_mismatch,
  config_mismatch,
  empty_split,
  no_runs,
  not_converged,
  not_psd,
};

/// CamelCase name of the error kind, e.g. "ZeroFrames".
std::string_view errc_name(Errc code) noexcept;

/// Solver-side failures (NotConverged, NotPSD) as opposed to bad input.
bool is_numerical(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace hagg
