#include "hagg/error.hpp"

namespace hagg {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "IoError";
    case Errc::bad_magic: return "BadMagic";
    case Errc::truncated: return "Truncated";
    case Errc::trailing_data: return "TrailingData";
    case Errc::non_finite: return "NonFinite";
    case Errc::zero_frames: return "ZeroFrames";
    case Errc::zero_dim: return "ZeroDim";
    case Errc::parse: return "ParseError";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::missing_path: return "MissingPath";
    case Errc::insufficient_frames: return "InsufficientFrames";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::id_mismatch: return "IdMismatch";
    case Errc::degenerate_data: return "DegenerateData";
    case Errc::not_on_simplex: return "NotOnSimplex";
    case Errc::empty_input: return "Empty";
    case Errc::single_class: return "SingleClass";
    case Errc::too_few_videos: return "TooFewVideos";
    case Errc::spec_invalid: return "SpecInvalid";
    case Errc::shift_too_large: return "ShiftTooLarge";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::missing_features: return "MissingFeatures";
    case Errc::artifact_mismatch: return "ArtifactMismatch";
    case Errc::config_mismatch: return "ConfigMismatch";
    case Errc::empty_split: return "EmptySplit";
    case Errc::no_runs: return "NoRuns";
    case Errc::not_converged: return "NotConverged";
    case Errc::not_psd: return "NotPSD";
  }
  return "Unknown";
}

bool is_numerical(Errc code) noexcept {
  return code == Errc::not_converged || code == Errc::not_psd;
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace hagg
