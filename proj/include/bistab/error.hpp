#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bistab {

enum class ErrorCode {
  invalid_argument,
  cutoff_too_small,
  not_pure,
  degenerate_superposition,
  unsupported_representation,
  unsupported_representation_regime,
  deconvolution_regime_unsupported,
  numerical_blowup,
  invalid_sweep,
  jpo_fixed_points_not_found,
  syntax_error,
  semantic_error,
  invalid_spec,
  io_error,
};

/// Stable kebab-case name used in CLI messages and JSON reports.
std::string_view error_name(ErrorCode code) noexcept;

/// Base error for every module. The code is what callers switch on; the
/// message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Error raised by the state-expression parser; `offset` is a byte offset into
/// the input, always <= input length.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t offset, std::vector<std::string> expected,
             const std::string& message);

  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

}  // namespace bistab
