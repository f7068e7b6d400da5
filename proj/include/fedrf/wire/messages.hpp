#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedrf/error.hpp"
#include "fedrf/forest.hpp"
#include "fedrf/wire/envelope.hpp"

namespace fedrf::wire {

inline constexpr std::uint32_t kProtocolVersion = 1;

/// Training schedule and tree hyperparameters sent by the coordinator.
struct ModelParams {
  std::uint32_t n_base_estimators = 100;
  std::uint32_t n_incremental_estimators = 0;
  std::uint32_t incremental_rounds = 0;
  double sample_fraction = 1.0;
  std::uint64_t seed = 0;
  forest::MaxFeatures max_features = forest::MaxFeatures::sqrt();
  std::optional<std::uint32_t> max_depth;
  std::uint32_t min_samples_split = 2;
  bool bootstrap = true;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
  forest::ForestParams forest_params(std::uint32_t n_estimators, std::uint64_t seed) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// How a datasite turns its CSV into a Dataset. label_names is the
/// federation-wide class table.
struct DataParams {
  std::string target_column;
  std::vector<std::string> ignored_columns;
  std::string positive_label;
  std::vector<std::string> label_names;

  void validate() const;
  ClassId positive_class() const;

  friend bool operator==(const DataParams&, const DataParams&) = default;
};

enum class Direction { ToDatasite, ToCoordinator };

// Message bodies. `kind` and `direction` tie each body to its envelope.

struct Hello {
  static constexpr MessageKind kind = MessageKind::Hello;
  std::uint32_t protocol_version = kProtocolVersion;
  std::string role;
  std::string name;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct SetDataParams {
  static constexpr MessageKind kind = MessageKind::SetDataParams;
  static constexpr Direction direction = Direction::ToDatasite;
  DataParams params;
  friend bool operator==(const SetDataParams&, const SetDataParams&) = default;
};

/// Datasite's acknowledgement of SET_DATA_PARAMS: the column schema it will
/// train on (names only).
struct DataParamsAck {
  static constexpr MessageKind kind = MessageKind::SetDataParams;
  static constexpr Direction direction = Direction::ToCoordinator;
  std::vector<std::string> feature_names;
  friend bool operator==(const DataParamsAck&, const DataParamsAck&) = default;
};

struct SetModelParams {
  static constexpr MessageKind kind = MessageKind::SetModelParams;
  static constexpr Direction direction = Direction::ToDatasite;
  ModelParams params;
  friend bool operator==(const SetModelParams&, const SetModelParams&) = default;
};

struct ModelParamsAck {
  static constexpr MessageKind kind = MessageKind::SetModelParams;
  static constexpr Direction direction = Direction::ToCoordinator;
  bool accepted = true;
  friend bool operator==(const ModelParamsAck&, const ModelParamsAck&) = default;
};

struct TrainRequest {
  static constexpr MessageKind kind = MessageKind::TrainRequest;
  static constexpr Direction direction = Direction::ToDatasite;
  std::uint32_t round_index = 0;
  std::uint64_t seed = 0;
  ModelParams model_params;
  std::optional<std::vector<std::uint8_t>> base_forest;  // encode_forest bytes
  friend bool operator==(const TrainRequest&, const TrainRequest&) = default;
};

struct TrainResponse {
  static constexpr MessageKind kind = MessageKind::TrainResponse;
  static constexpr Direction direction = Direction::ToCoordinator;
  std::uint32_t round_index = 0;
  std::vector<std::uint8_t> forest;
  std::uint64_t n_samples = 0;
  friend bool operator==(const TrainResponse&, const TrainResponse&) = default;
};

struct EvalRequest {
  static constexpr MessageKind kind = MessageKind::EvalRequest;
  static constexpr Direction direction = Direction::ToDatasite;
  std::vector<std::uint8_t> forest;
  friend bool operator==(const EvalRequest&, const EvalRequest&) = default;
};

struct EvalResponse {
  static constexpr MessageKind kind = MessageKind::EvalResponse;
  static constexpr Direction direction = Direction::ToCoordinator;
  forest::Metrics metrics;
  friend bool operator==(const EvalResponse&, const EvalResponse&) = default;
};

struct ApprovalPending {
  static constexpr MessageKind kind = MessageKind::ApprovalPending;
  static constexpr Direction direction = Direction::ToCoordinator;
  std::uint64_t request_id = 0;
  std::string summary;
  friend bool operator==(const ApprovalPending&, const ApprovalPending&) = default;
};

struct ErrorMessage {
  static constexpr MessageKind kind = MessageKind::Error;
  static constexpr Direction direction = Direction::ToCoordinator;
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;
  friend bool operator==(const ErrorMessage&, const ErrorMessage&) = default;
};

// ---------------------------------------------------------------------------
// Payload schema. Every payload is a CBOR map whose keys and value types are
// fixed per (kind, direction); decoding rejects missing, extra or mistyped
// keys with MalformedPayload.

enum class FieldType {
  UInt,
  Float,
  Bool,
  Text,
  TextList,
  OptionalUInt,
  ForestBlob,          // encode_forest bytes
  OptionalForestBlob,  // encode_forest bytes or null
  ModelParamsMap,
  MetricsMap,
};

struct FieldSpec {
  std::string_view name;
  FieldType type;
};

/// Schema of the payload map for a message kind travelling in a direction.
std::span<const FieldSpec> payload_schema(MessageKind kind, Direction direction);
std::span<const FieldSpec> model_params_schema();
std::span<const FieldSpec> metrics_schema();

std::vector<std::uint8_t> encode_payload(const Hello& m);
std::vector<std::uint8_t> encode_payload(const SetDataParams& m);
std::vector<std::uint8_t> encode_payload(const DataParamsAck& m);
std::vector<std::uint8_t> encode_payload(const SetModelParams& m);
std::vector<std::uint8_t> encode_payload(const ModelParamsAck& m);
std::vector<std::uint8_t> encode_payload(const TrainRequest& m);
std::vector<std::uint8_t> encode_payload(const TrainResponse& m);
std::vector<std::uint8_t> encode_payload(const EvalRequest& m);
std::vector<std::uint8_t> encode_payload(const EvalResponse& m);
std::vector<std::uint8_t> encode_payload(const ApprovalPending& m);
std::vector<std::uint8_t> encode_payload(const ErrorMessage& m);

/// Decodes a payload of message type M (throws MalformedPayload).
template <typename M>
M decode_payload(std::span<const std::uint8_t> payload);

template <typename M>
Envelope make_envelope(const M& message, std::uint64_t correlation_id) {
  return Envelope{M::kind, correlation_id, encode_payload(message)};
}

Envelope make_error(ErrorCode code, const std::string& message, std::uint64_t correlation_id);

/// Decodes `env` as M. An ERROR envelope is rethrown as fedrf::Error with the
/// remote code; any other kind mismatch is MalformedPayload.
template <typename M>
M open_envelope(const Envelope& env) {
  if (env.kind == MessageKind::Error && M::kind != MessageKind::Error) {
    auto err = decode_payload<ErrorMessage>(env.payload);
    throw Error(err.code, "remote: " + err.message);
  }
  if (env.kind != M::kind) {
    throw Error(ErrorCode::MalformedPayload, "expected " + std::string(to_string(M::kind)) + ", got " +
                                                 std::string(to_string(env.kind)));
  }
  return decode_payload<M>(env.payload);
}

}  // namespace fedrf::wire
