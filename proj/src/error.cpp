#include "fedrf/error.hpp"

#include <array>
#include <utility>

namespace fedrf {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 36> kNames{{
    {ErrorCode::EmptyDataset, "EmptyDataset"},
    {ErrorCode::SingleClassDataset, "SingleClassDataset"},
    {ErrorCode::SchemaMismatch, "SchemaMismatch"},
    {ErrorCode::UnknownLabel, "UnknownLabel"},
    {ErrorCode::DimensionMismatch, "DimensionMismatch"},
    {ErrorCode::InvalidArgument, "InvalidArgument"},
    {ErrorCode::NoSuccessfulClients, "NoSuccessfulClients"},
    {ErrorCode::DeclaredWeightsExceedOne, "DeclaredWeightsExceedOne"},
    {ErrorCode::EmptyForest, "EmptyForest"},
    {ErrorCode::BadMagic, "BadMagic"},
    {ErrorCode::UnsupportedVersion, "UnsupportedVersion"},
    {ErrorCode::TruncatedPayload, "TruncatedPayload"},
    {ErrorCode::CorruptIndex, "CorruptIndex"},
    {ErrorCode::TrailingData, "TrailingData"},
    {ErrorCode::FrameTooLarge, "FrameTooLarge"},
    {ErrorCode::ConnectionClosed, "ConnectionClosed"},
    {ErrorCode::MalformedHeader, "MalformedHeader"},
    {ErrorCode::MalformedPayload, "MalformedPayload"},
    {ErrorCode::Timeout, "Timeout"},
    {ErrorCode::MissingColumn, "MissingColumn"},
    {ErrorCode::NonNumericFeature, "NonNumericFeature"},
    {ErrorCode::UnknownLabelValue, "UnknownLabelValue"},
    {ErrorCode::EmptyFile, "EmptyFile"},
    {ErrorCode::NotApproved, "NotApproved"},
    {ErrorCode::Rejected, "Rejected"},
    {ErrorCode::TrainingFailed, "TrainingFailed"},
    {ErrorCode::CorruptModel, "CorruptModel"},
    {ErrorCode::UnknownRequestId, "UnknownRequestId"},
    {ErrorCode::StaleRound, "StaleRound"},
    {ErrorCode::DataParamsNotSet, "DataParamsNotSet"},
    {ErrorCode::EvalSiloUnavailable, "EvalSiloUnavailable"},
    {ErrorCode::TooFewRows, "TooFewRows"},
    {ErrorCode::SingleClassPartition, "SingleClassPartition"},
    {ErrorCode::PortUnavailable, "PortUnavailable"},
    {ErrorCode::ChildProcessFailure, "ChildProcessFailure"},
    {ErrorCode::Io, "Io"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

ErrorCode error_code_from_string(std::string_view name) noexcept {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return ErrorCode::MalformedPayload;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

}  // namespace fedrf
