#include "fedrf/wire/messages.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

namespace fedrf::wire {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Params

void ModelParams::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (n_base_estimators == 0) bad("n_base_estimators must be >= 1");
  if (incremental_rounds > 0 && n_incremental_estimators == 0) {
    bad("incremental rounds need n_incremental_estimators >= 1");
  }
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) bad("sample_fraction must be in (0, 1]");
  if (max_depth && *max_depth == 0) bad("max_depth must be >= 1");
  if (min_samples_split == 0) bad("min_samples_split must be >= 1");
  if (max_features.kind == forest::MaxFeatures::Kind::Fixed && max_features.k == 0) bad("max_features must be >= 1");
}

forest::ForestParams ModelParams::forest_params(std::uint32_t n_estimators, std::uint64_t tree_seed) const {
  forest::ForestParams p;
  p.n_estimators = n_estimators;
  p.max_features = max_features;
  p.max_depth = max_depth;
  p.min_samples_split = min_samples_split;
  p.bootstrap = bootstrap;
  p.seed = tree_seed;
  return p;
}

void DataParams::validate() const {
  if (target_column.empty()) throw Error(ErrorCode::InvalidArgument, "target_column is empty");
  if (std::find(ignored_columns.begin(), ignored_columns.end(), target_column) != ignored_columns.end()) {
    throw Error(ErrorCode::InvalidArgument, "target_column '" + target_column + "' is also ignored");
  }
  if (label_names.size() < 2) throw Error(ErrorCode::InvalidArgument, "label_names needs at least two classes");
  std::set<std::string> unique(label_names.begin(), label_names.end());
  if (unique.size() != label_names.size()) throw Error(ErrorCode::InvalidArgument, "duplicate label name");
  positive_class();
}

ClassId DataParams::positive_class() const {
  auto it = std::find(label_names.begin(), label_names.end(), positive_label);
  if (it == label_names.end()) {
    throw Error(ErrorCode::InvalidArgument, "positive_label '" + positive_label + "' not in label_names");
  }
  return static_cast<ClassId>(it - label_names.begin());
}

// ---------------------------------------------------------------------------
// Schemas

namespace {

constexpr FieldSpec kHello[] = {
    {"protocol_version", FieldType::UInt}, {"role", FieldType::Text}, {"name", FieldType::Text}};
constexpr FieldSpec kSetDataParams[] = {{"target_column", FieldType::Text},
                                        {"ignored_columns", FieldType::TextList},
                                        {"positive_label", FieldType::Text},
                                        {"label_names", FieldType::TextList}};
constexpr FieldSpec kDataParamsAck[] = {{"feature_names", FieldType::TextList}};
constexpr FieldSpec kSetModelParams[] = {{"model_params", FieldType::ModelParamsMap}};
constexpr FieldSpec kModelParamsAck[] = {{"accepted", FieldType::Bool}};
constexpr FieldSpec kTrainRequest[] = {{"round_index", FieldType::UInt},
                                       {"seed", FieldType::UInt},
                                       {"model_params", FieldType::ModelParamsMap},
                                       {"base_forest", FieldType::OptionalForestBlob}};
constexpr FieldSpec kTrainResponse[] = {
    {"round_index", FieldType::UInt}, {"forest", FieldType::ForestBlob}, {"n_samples", FieldType::UInt}};
constexpr FieldSpec kEvalRequest[] = {{"forest", FieldType::ForestBlob}};
constexpr FieldSpec kEvalResponse[] = {{"metrics", FieldType::MetricsMap}};
constexpr FieldSpec kApprovalPending[] = {{"request_id", FieldType::UInt}, {"summary", FieldType::Text}};
constexpr FieldSpec kError[] = {{"code", FieldType::Text}, {"message", FieldType::Text}};
constexpr FieldSpec kModelParams[] = {
    {"n_base_estimators", FieldType::UInt},  {"n_incremental_estimators", FieldType::UInt},
    {"incremental_rounds", FieldType::UInt}, {"sample_fraction", FieldType::Float},
    {"seed", FieldType::UInt},               {"max_features", FieldType::Text},
    {"max_depth", FieldType::OptionalUInt},  {"min_samples_split", FieldType::UInt},
    {"bootstrap", FieldType::Bool}};
constexpr FieldSpec kMetrics[] = {{"accuracy", FieldType::Float}, {"precision", FieldType::Float},
                                  {"recall", FieldType::Float},   {"f1", FieldType::Float},
                                  {"tp", FieldType::UInt},        {"fp", FieldType::UInt},
                                  {"fn", FieldType::UInt},        {"tn", FieldType::UInt},
                                  {"n_samples", FieldType::UInt}};

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedPayload, what); }

void check_map(const json& j, std::span<const FieldSpec> schema, std::string_view where);

void check_field(const json& v, const FieldSpec& f, std::string_view where) {
  bool ok = false;
  switch (f.type) {
    case FieldType::UInt: ok = v.is_number_unsigned(); break;
    case FieldType::Float: ok = v.is_number_float(); break;
    case FieldType::Bool: ok = v.is_boolean(); break;
    case FieldType::Text: ok = v.is_string(); break;
    case FieldType::TextList:
      ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
      break;
    case FieldType::OptionalUInt: ok = v.is_null() || v.is_number_unsigned(); break;
    case FieldType::ForestBlob: ok = v.is_binary(); break;
    case FieldType::OptionalForestBlob: ok = v.is_null() || v.is_binary(); break;
    case FieldType::ModelParamsMap:
      check_map(v, kModelParams, f.name);
      ok = true;
      break;
    case FieldType::MetricsMap:
      check_map(v, kMetrics, f.name);
      ok = true;
      break;
  }
  if (!ok) malformed(std::string(where) + "." + std::string(f.name) + " has the wrong type");
}

void check_map(const json& j, std::span<const FieldSpec> schema, std::string_view where) {
  if (!j.is_object()) malformed(std::string(where) + " is not a map");
  if (j.size() != schema.size()) {
    malformed(std::string(where) + " has " + std::to_string(j.size()) + " keys, expected " +
              std::to_string(schema.size()));
  }
  for (const auto& f : schema) {
    auto it = j.find(std::string(f.name));
    if (it == j.end()) malformed(std::string(where) + " lacks key '" + std::string(f.name) + "'");
    check_field(*it, f, where);
  }
}

json parse(std::span<const std::uint8_t> payload, std::span<const FieldSpec> schema, std::string_view where) {
  json j;
  try {
    j = json::from_cbor(payload.begin(), payload.end(), true, true, json::cbor_tag_handler_t::error);
  } catch (const json::exception& e) {
    malformed(std::string(where) + ": " + e.what());
  }
  check_map(j, schema, where);
  return j;
}

std::vector<std::uint8_t> dump(const json& j) { return json::to_cbor(j); }

std::uint32_t u32(const json& v, std::string_view name) {
  const auto x = v.get<std::uint64_t>();
  if (x > std::numeric_limits<std::uint32_t>::max()) malformed(std::string(name) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(x);
}

json::binary_t blob(const std::vector<std::uint8_t>& bytes) { return json::binary_t(bytes); }

std::vector<std::uint8_t> unblob(const json& v) {
  const auto& b = v.get_binary();
  return {b.begin(), b.end()};
}

json model_params_to_json(const ModelParams& p) {
  json j;
  j["n_base_estimators"] = p.n_base_estimators;
  j["n_incremental_estimators"] = p.n_incremental_estimators;
  j["incremental_rounds"] = p.incremental_rounds;
  j["sample_fraction"] = p.sample_fraction;
  j["seed"] = p.seed;
  j["max_features"] = p.max_features.to_string();
  j["max_depth"] = p.max_depth ? json(*p.max_depth) : json(nullptr);
  j["min_samples_split"] = p.min_samples_split;
  j["bootstrap"] = p.bootstrap;
  return j;
}

ModelParams model_params_from_json(const json& j) {
  ModelParams p;
  p.n_base_estimators = u32(j["n_base_estimators"], "n_base_estimators");
  p.n_incremental_estimators = u32(j["n_incremental_estimators"], "n_incremental_estimators");
  p.incremental_rounds = u32(j["incremental_rounds"], "incremental_rounds");
  p.sample_fraction = j["sample_fraction"].get<double>();
  p.seed = j["seed"].get<std::uint64_t>();
  try {
    p.max_features = forest::MaxFeatures::parse(j["max_features"].get<std::string>());
  } catch (const Error& e) {
    malformed(e.detail());
  }
  if (!j["max_depth"].is_null()) p.max_depth = u32(j["max_depth"], "max_depth");
  p.min_samples_split = u32(j["min_samples_split"], "min_samples_split");
  p.bootstrap = j["bootstrap"].get<bool>();
  return p;
}

}  // namespace

std::span<const FieldSpec> payload_schema(MessageKind kind, Direction direction) {
  const bool down = direction == Direction::ToDatasite;
  switch (kind) {
    case MessageKind::Hello: return kHello;
    case MessageKind::SetDataParams: return down ? std::span<const FieldSpec>(kSetDataParams) : kDataParamsAck;
    case MessageKind::SetModelParams: return down ? std::span<const FieldSpec>(kSetModelParams) : kModelParamsAck;
    case MessageKind::TrainRequest: return down ? std::span<const FieldSpec>(kTrainRequest) : std::span<const FieldSpec>{};
    case MessageKind::TrainResponse: return down ? std::span<const FieldSpec>{} : kTrainResponse;
    case MessageKind::EvalRequest: return down ? std::span<const FieldSpec>(kEvalRequest) : std::span<const FieldSpec>{};
    case MessageKind::EvalResponse: return down ? std::span<const FieldSpec>{} : kEvalResponse;
    case MessageKind::ApprovalPending: return down ? std::span<const FieldSpec>{} : kApprovalPending;
    case MessageKind::Error: return down ? std::span<const FieldSpec>{} : kError;
  }
  return {};
}

std::span<const FieldSpec> model_params_schema() { return kModelParams; }
std::span<const FieldSpec> metrics_schema() { return kMetrics; }

// ---------------------------------------------------------------------------
// Encoders

std::vector<std::uint8_t> encode_payload(const Hello& m) {
  return dump({{"protocol_version", m.protocol_version}, {"role", m.role}, {"name", m.name}});
}

std::vector<std::uint8_t> encode_payload(const SetDataParams& m) {
  return dump({{"target_column", m.params.target_column},
               {"ignored_columns", m.params.ignored_columns},
               {"positive_label", m.params.positive_label},
               {"label_names", m.params.label_names}});
}

std::vector<std::uint8_t> encode_payload(const DataParamsAck& m) {
  return dump({{"feature_names", m.feature_names}});
}

std::vector<std::uint8_t> encode_payload(const SetModelParams& m) {
  return dump({{"model_params", model_params_to_json(m.params)}});
}

std::vector<std::uint8_t> encode_payload(const ModelParamsAck& m) { return dump({{"accepted", m.accepted}}); }

std::vector<std::uint8_t> encode_payload(const TrainRequest& m) {
  json j;
  j["round_index"] = m.round_index;
  j["seed"] = m.seed;
  j["model_params"] = model_params_to_json(m.model_params);
  j["base_forest"] = m.base_forest ? json(blob(*m.base_forest)) : json(nullptr);
  return dump(j);
}

std::vector<std::uint8_t> encode_payload(const TrainResponse& m) {
  json j;
  j["round_index"] = m.round_index;
  j["forest"] = blob(m.forest);
  j["n_samples"] = m.n_samples;
  return dump(j);
}

std::vector<std::uint8_t> encode_payload(const EvalRequest& m) {
  json j;
  j["forest"] = blob(m.forest);
  return dump(j);
}

std::vector<std::uint8_t> encode_payload(const EvalResponse& m) {
  const auto& x = m.metrics;
  json metrics = {{"accuracy", x.accuracy}, {"precision", x.precision}, {"recall", x.recall},
                  {"f1", x.f1},             {"tp", x.tp()},             {"fp", x.fp()},
                  {"fn", x.fn()},           {"tn", x.tn()},             {"n_samples", x.n_samples}};
  return dump({{"metrics", metrics}});
}

std::vector<std::uint8_t> encode_payload(const ApprovalPending& m) {
  return dump({{"request_id", m.request_id}, {"summary", m.summary}});
}

std::vector<std::uint8_t> encode_payload(const ErrorMessage& m) {
  return dump({{"code", std::string(to_string(m.code))}, {"message", m.message}});
}

Envelope make_error(ErrorCode code, const std::string& message, std::uint64_t correlation_id) {
  return make_envelope(ErrorMessage{code, message}, correlation_id);
}

// ---------------------------------------------------------------------------
// Decoders

template <>
Hello decode_payload<Hello>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kHello, "HELLO");
  return Hello{u32(j["protocol_version"], "protocol_version"), j["role"].get<std::string>(),
               j["name"].get<std::string>()};
}

template <>
SetDataParams decode_payload<SetDataParams>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kSetDataParams, "SET_DATA_PARAMS");
  SetDataParams m;
  m.params.target_column = j["target_column"].get<std::string>();
  m.params.ignored_columns = j["ignored_columns"].get<std::vector<std::string>>();
  m.params.positive_label = j["positive_label"].get<std::string>();
  m.params.label_names = j["label_names"].get<std::vector<std::string>>();
  return m;
}

template <>
DataParamsAck decode_payload<DataParamsAck>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kDataParamsAck, "SET_DATA_PARAMS ack");
  return DataParamsAck{j["feature_names"].get<std::vector<std::string>>()};
}

template <>
SetModelParams decode_payload<SetModelParams>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kSetModelParams, "SET_MODEL_PARAMS");
  return SetModelParams{model_params_from_json(j["model_params"])};
}

template <>
ModelParamsAck decode_payload<ModelParamsAck>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kModelParamsAck, "SET_MODEL_PARAMS ack");
  return ModelParamsAck{j["accepted"].get<bool>()};
}

template <>
TrainRequest decode_payload<TrainRequest>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kTrainRequest, "TRAIN_REQUEST");
  TrainRequest m;
  m.round_index = u32(j["round_index"], "round_index");
  m.seed = j["seed"].get<std::uint64_t>();
  m.model_params = model_params_from_json(j["model_params"]);
  if (!j["base_forest"].is_null()) m.base_forest = unblob(j["base_forest"]);
  return m;
}

template <>
TrainResponse decode_payload<TrainResponse>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kTrainResponse, "TRAIN_RESPONSE");
  TrainResponse m;
  m.round_index = u32(j["round_index"], "round_index");
  m.forest = unblob(j["forest"]);
  m.n_samples = j["n_samples"].get<std::uint64_t>();
  return m;
}

template <>
EvalRequest decode_payload<EvalRequest>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kEvalRequest, "EVAL_REQUEST");
  return EvalRequest{unblob(j["forest"])};
}

template <>
EvalResponse decode_payload<EvalResponse>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kEvalResponse, "EVAL_RESPONSE");
  const auto& m = j["metrics"];
  EvalResponse r;
  r.metrics.accuracy = m["accuracy"].get<double>();
  r.metrics.precision = m["precision"].get<double>();
  r.metrics.recall = m["recall"].get<double>();
  r.metrics.f1 = m["f1"].get<double>();
  r.metrics.confusion[1][1] = m["tp"].get<std::uint64_t>();
  r.metrics.confusion[0][1] = m["fp"].get<std::uint64_t>();
  r.metrics.confusion[1][0] = m["fn"].get<std::uint64_t>();
  r.metrics.confusion[0][0] = m["tn"].get<std::uint64_t>();
  r.metrics.n_samples = m["n_samples"].get<std::uint64_t>();
  return r;
}

template <>
ApprovalPending decode_payload<ApprovalPending>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kApprovalPending, "APPROVAL_PENDING");
  return ApprovalPending{j["request_id"].get<std::uint64_t>(), j["summary"].get<std::string>()};
}

template <>
ErrorMessage decode_payload<ErrorMessage>(std::span<const std::uint8_t> payload) {
  auto j = parse(payload, kError, "ERROR");
  return ErrorMessage{error_code_from_string(j["code"].get<std::string>()), j["message"].get<std::string>()};
}

}  // namespace fedrf::wire
