#include "bistab/error.hpp"

namespace bistab {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::cutoff_too_small: return "cutoff-too-small";
    case ErrorCode::not_pure: return "not-pure";
    case ErrorCode::degenerate_superposition: return "degenerate-superposition";
    case ErrorCode::unsupported_representation: return "unsupported-representation";
    case ErrorCode::unsupported_representation_regime: return "unsupported-representation-regime";
    case ErrorCode::deconvolution_regime_unsupported: return "deconvolution-regime-unsupported";
    case ErrorCode::numerical_blowup: return "numerical-blowup";
    case ErrorCode::invalid_sweep: return "invalid-sweep";
    case ErrorCode::jpo_fixed_points_not_found: return "jpo-fixed-points-not-found";
    case ErrorCode::syntax_error: return "syntax-error";
    case ErrorCode::semantic_error: return "semantic-error";
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown-error";
}

namespace {

std::string with_offset(std::size_t offset, const std::vector<std::string>& expected,
                        const std::string& message) {
  std::string out = "at offset " + std::to_string(offset) + ": " + message;
  if (!expected.empty()) {
    out += " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) out += i + 1 == expected.size() ? " or " : ", ";
      out += expected[i];
    }
    out += ")";
  }
  return out;
}

}  // namespace

ParseError::ParseError(ErrorCode code, std::size_t offset, std::vector<std::string> expected,
                       const std::string& message)
    : Error(code, with_offset(offset, expected, message)),
      offset_(offset),
      expected_(std::move(expected)) {}

}  // namespace bistab
