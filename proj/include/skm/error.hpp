#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skm {

enum class ErrorCode {
  non_finite_entry,
  empty_matrix,
  index_out_of_range,
  degenerate_distribution,
  power_iteration_stall,
  dimension_mismatch,
  invalid_tau,
  invalid_delta,
  invalid_parameter,
  k_too_large,
  missing_tau,
  invalid_shape,
  budget_violated,
  parse_error,
  ragged_rows,
  bad_magic,
  truncated_file,
  io_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::non_finite_entry: return "NonFiniteEntry";
    case ErrorCode::empty_matrix: return "EmptyMatrix";
    case ErrorCode::index_out_of_range: return "IndexOutOfRange";
    case ErrorCode::degenerate_distribution: return "DegenerateDistribution";
    case ErrorCode::power_iteration_stall: return "PowerIterationStall";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::invalid_tau: return "InvalidTau";
    case ErrorCode::invalid_delta: return "InvalidDelta";
    case ErrorCode::invalid_parameter: return "InvalidParameter";
    case ErrorCode::k_too_large: return "KTooLarge";
    case ErrorCode::missing_tau: return "MissingTau";
    case ErrorCode::invalid_shape: return "InvalidShape";
    case ErrorCode::budget_violated: return "BudgetViolated";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::ragged_rows: return "RaggedRows";
    case ErrorCode::bad_magic: return "BadMagic";
    case ErrorCode::truncated_file: return "TruncatedFile";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace skm
