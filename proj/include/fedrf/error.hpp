#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedrf {

/// Every failure the library reports maps to one of these codes. The names
/// are also used verbatim on the wire inside ERROR envelopes.
enum class ErrorCode {
  // forest_core
  EmptyDataset,
  SingleClassDataset,
  SchemaMismatch,
  UnknownLabel,
  DimensionMismatch,
  InvalidArgument,
  // aggregation
  NoSuccessfulClients,
  DeclaredWeightsExceedOne,
  EmptyForest,
  // wire
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  CorruptIndex,
  TrailingData,
  FrameTooLarge,
  ConnectionClosed,
  MalformedHeader,
  MalformedPayload,
  Timeout,
  // datasite
  MissingColumn,
  NonNumericFeature,
  UnknownLabelValue,
  EmptyFile,
  NotApproved,
  Rejected,
  TrainingFailed,
  CorruptModel,
  UnknownRequestId,
  StaleRound,
  DataParamsNotSet,
  // coordinator
  EvalSiloUnavailable,
  // harness
  TooFewRows,
  SingleClassPartition,
  PortUnavailable,
  ChildProcessFailure,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Parses a code name produced by to_string. Unknown names map to
/// ErrorCode::MalformedPayload.
ErrorCode error_code_from_string(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace fedrf
