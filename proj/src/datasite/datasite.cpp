#include "fedrf/datasite.hpp"

#include <iostream>
#include <json.hpp>

#include "fedrf/error.hpp"
#include "fedrf/rng.hpp"
#include "fedrf/wire/forest_codec.hpp"

namespace fedrf::datasite {

using wire::Envelope;
using wire::MessageKind;

ApprovalPolicy parse_policy(const std::string& text) {
  if (text == "auto") return ApprovalPolicy::AutoApprove;
  if (text == "manual") return ApprovalPolicy::Manual;
  throw Error(ErrorCode::InvalidArgument, "approval policy must be 'auto' or 'manual', got '" + text + "'");
}

LogSink stderr_log() {
  return [](const std::string& line) {
    static std::mutex m;
    std::lock_guard lock(m);
    std::cerr << line << '\n';
  };
}

namespace {

std::string summarize(const Envelope& request) {
  if (request.kind == MessageKind::TrainRequest) {
    auto req = wire::decode_payload<wire::TrainRequest>(request.payload);
    std::string s = "train round " + std::to_string(req.round_index);
    if (req.base_forest) {
      s += " warm start +" + std::to_string(req.model_params.n_incremental_estimators) + " trees";
    } else {
      s += " base " + std::to_string(req.model_params.n_base_estimators) + " trees";
    }
    return s;
  }
  auto req = wire::decode_payload<wire::EvalRequest>(request.payload);
  return "evaluate forest (" + std::to_string(req.forest.size()) + " bytes)";
}

forest::RandomForest decode_model(const std::vector<std::uint8_t>& blob) {
  try {
    return wire::decode_forest(blob);
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptModel, e.what());
  }
}

}  // namespace

Datasite::Datasite(DatasiteConfig config, LogSink log) : config_(std::move(config)), log_(std::move(log)) {}

void Datasite::log(const std::string& event, const std::string& detail, std::uint64_t id) const {
  if (!log_) return;
  nlohmann::json j;
  j["ts_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
  j["site"] = config_.name;
  j["event"] = event;
  if (id != 0) j["request_id"] = id;
  if (!detail.empty()) j["detail"] = detail;
  log_(j.dump());
}

void Datasite::submit(const Envelope& request, const Reply& raw_reply) {
  log("request", std::string(wire::to_string(request.kind)));
  const Reply reply = [this, raw_reply](Envelope e) {
    log("response", std::string(wire::to_string(e.kind)));
    raw_reply(std::move(e));
  };
  const bool gated = request.kind == MessageKind::TrainRequest || request.kind == MessageKind::EvalRequest;
  if (!gated) {
    reply(dispatch(request));
    return;
  }

  std::uint64_t id = 0;
  {
    std::lock_guard lock(queue_mutex_);
    id = next_request_id_++;
  }
  if (config_.policy == ApprovalPolicy::AutoApprove) {
    reply(execute_gated(id, request));
    return;
  }

  std::string summary;
  try {
    summary = summarize(request);
  } catch (const Error& e) {
    reply(wire::make_error(e.code(), e.detail(), request.correlation_id));
    return;
  }
  {
    std::lock_guard lock(queue_mutex_);
    parked_.emplace(id, Parked{PendingRequest{id, summary, std::chrono::system_clock::now()}, request, reply});
  }
  log("parked", summary, id);
  reply(wire::make_envelope(wire::ApprovalPending{id, summary}, request.correlation_id));
}

Envelope Datasite::call(const Envelope& request) {
  std::optional<Envelope> last;
  submit(request, [&](Envelope e) { last = std::move(e); });
  return std::move(*last);
}

void Datasite::approve(std::uint64_t request_id) {
  Parked p;
  {
    std::lock_guard lock(queue_mutex_);
    auto it = parked_.find(request_id);
    if (it == parked_.end()) {
      throw Error(ErrorCode::UnknownRequestId, "no pending request " + std::to_string(request_id));
    }
    p = std::move(it->second);
    parked_.erase(it);
    approved_.insert(request_id);
  }
  log("approved", p.info.summary, request_id);
  p.reply(execute_gated(request_id, p.request));
}

void Datasite::reject(std::uint64_t request_id) {
  Parked p;
  {
    std::lock_guard lock(queue_mutex_);
    auto it = parked_.find(request_id);
    if (it == parked_.end()) {
      throw Error(ErrorCode::UnknownRequestId, "no pending request " + std::to_string(request_id));
    }
    p = std::move(it->second);
    parked_.erase(it);
  }
  log("rejected", p.info.summary, request_id);
  p.reply(wire::make_error(ErrorCode::Rejected, "request " + std::to_string(request_id) + " rejected by operator",
                           p.request.correlation_id));
}

std::vector<PendingRequest> Datasite::pending() const {
  std::lock_guard lock(queue_mutex_);
  std::vector<PendingRequest> out;
  for (const auto& [id, p] : parked_) out.push_back(p.info);
  return out;
}

std::uint32_t Datasite::round_index() const {
  std::lock_guard lock(state_mutex_);
  return round_index_;
}

std::optional<Dataset> Datasite::dataset() const {
  std::lock_guard lock(state_mutex_);
  return dataset_;
}

void Datasite::check_gate(std::uint64_t request_id) {
  if (config_.policy == ApprovalPolicy::AutoApprove) return;
  std::lock_guard lock(queue_mutex_);
  if (approved_.erase(request_id) == 0) {
    throw Error(ErrorCode::NotApproved, "request " + std::to_string(request_id) + " has not been approved");
  }
}

Envelope Datasite::execute_gated(std::uint64_t request_id, const Envelope& request) {
  const auto cid = request.correlation_id;
  try {
    if (request.kind == MessageKind::TrainRequest) {
      auto req = wire::decode_payload<wire::TrainRequest>(request.payload);
      return wire::make_envelope(handle_train(request_id, req), cid);
    }
    auto req = wire::decode_payload<wire::EvalRequest>(request.payload);
    return wire::make_envelope(handle_eval(request_id, req), cid);
  } catch (const Error& e) {
    log("error", e.what(), request_id);
    return wire::make_error(e.code(), e.detail(), cid);
  } catch (const std::exception& e) {
    log("error", e.what(), request_id);
    return wire::make_error(ErrorCode::TrainingFailed, e.what(), cid);
  }
}

wire::TrainResponse Datasite::handle_train(std::uint64_t request_id, const wire::TrainRequest& request) {
  check_gate(request_id);
  request.model_params.validate();
  std::lock_guard train_lock(train_mutex_);

  std::optional<Dataset> data;
  std::uint32_t current_round = 0;
  {
    std::lock_guard lock(state_mutex_);
    data = dataset_;
    current_round = round_index_;
  }
  if (!data) throw Error(ErrorCode::DataParamsNotSet, "SET_DATA_PARAMS must precede training");
  if (request.round_index < current_round) {
    throw Error(ErrorCode::StaleRound, "round " + std::to_string(request.round_index) + " already passed (at " +
                                           std::to_string(current_round) + ")");
  }

  const auto& mp = request.model_params;
  Dataset local = mp.sample_fraction < 1.0
                      ? data->subsample(mp.sample_fraction, derive_seed(request.seed, hash_label("subsample")))
                      : *data;

  forest::RandomForest result;
  if (!request.base_forest) {
    log("train", "base " + std::to_string(mp.n_base_estimators) + " trees on " +
                     std::to_string(local.n_samples()) + " rows",
        request_id);
    try {
      result = forest::fit_forest(local, mp.forest_params(mp.n_base_estimators, request.seed), config_.threads);
    } catch (const Error& e) {
      throw Error(ErrorCode::TrainingFailed, e.what());
    }
  } else {
    auto base = decode_model(*request.base_forest);
    try {
      forest::check_schema(base, local);
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaMismatch, e.detail());
    }
    const auto n_trees = static_cast<std::uint32_t>(base.trees.size());
    base.params = mp.forest_params(n_trees, request.seed);
    log("train", "warm start +" + std::to_string(mp.n_incremental_estimators) + " trees on " +
                     std::to_string(local.n_samples()) + " rows",
        request_id);
    try {
      result = forest::warm_start_extend(base, local, mp.n_incremental_estimators, request.seed, config_.threads);
    } catch (const Error& e) {
      throw Error(ErrorCode::TrainingFailed, e.what());
    }
  }

  {
    std::lock_guard lock(state_mutex_);
    round_index_ = request.round_index + 1;
  }
  ++executed_;
  log("trained", std::to_string(result.trees.size()) + " trees", request_id);
  return wire::TrainResponse{request.round_index, wire::encode_forest(result), local.n_samples()};
}

wire::EvalResponse Datasite::handle_eval(std::uint64_t request_id, const wire::EvalRequest& request) {
  check_gate(request_id);
  std::optional<Dataset> data;
  std::optional<wire::DataParams> params;
  {
    std::lock_guard lock(state_mutex_);
    data = dataset_;
    params = data_params_;
  }
  if (!data) throw Error(ErrorCode::DataParamsNotSet, "SET_DATA_PARAMS must precede evaluation");
  auto model = decode_model(request.forest);
  try {
    forest::check_schema(model, *data);
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaMismatch, e.detail());
  }
  auto metrics = forest::evaluate(model, *data, params->positive_class());
  ++executed_;
  log("evaluated", "accuracy " + std::to_string(metrics.accuracy), request_id);
  return wire::EvalResponse{metrics};
}

wire::DataParamsAck Datasite::set_data_params(const wire::DataParams& params) {
  params.validate();
  if (config_.target_column && *config_.target_column != params.target_column) {
    throw Error(ErrorCode::SchemaMismatch,
                "target column '" + params.target_column + "' differs from local '" + *config_.target_column + "'");
  }
  if (config_.positive_label && *config_.positive_label != params.positive_label) {
    throw Error(ErrorCode::SchemaMismatch, "positive label '" + params.positive_label + "' differs from local '" +
                                               *config_.positive_label + "'");
  }
  if (config_.ignored_columns && *config_.ignored_columns != params.ignored_columns) {
    throw Error(ErrorCode::SchemaMismatch, "ignored columns differ from local configuration");
  }
  {
    std::lock_guard lock(state_mutex_);
    if (data_params_) {
      if (*data_params_ != params) {
        throw Error(ErrorCode::SchemaMismatch, "data params already set to different values");
      }
      return wire::DataParamsAck{dataset_->feature_names()};
    }
  }
  auto loaded = load_dataset(config_.table, params);
  std::lock_guard lock(state_mutex_);
  auto names = loaded.feature_names();
  data_params_ = params;
  dataset_ = std::move(loaded);
  log("data_params", std::to_string(dataset_->n_samples()) + " rows, " + std::to_string(names.size()) + " features");
  return wire::DataParamsAck{std::move(names)};
}

Envelope Datasite::dispatch(const Envelope& request) {
  const auto cid = request.correlation_id;
  try {
    switch (request.kind) {
      case MessageKind::Hello: {
        auto hello = wire::decode_payload<wire::Hello>(request.payload);
        if (hello.protocol_version != wire::kProtocolVersion) {
          throw Error(ErrorCode::UnsupportedVersion,
                      "protocol version " + std::to_string(hello.protocol_version) + " not supported");
        }
        return wire::make_envelope(wire::Hello{wire::kProtocolVersion, "datasite", config_.name}, cid);
      }
      case MessageKind::SetDataParams: {
        auto msg = wire::decode_payload<wire::SetDataParams>(request.payload);
        return wire::make_envelope(set_data_params(msg.params), cid);
      }
      case MessageKind::SetModelParams: {
        auto msg = wire::decode_payload<wire::SetModelParams>(request.payload);
        msg.params.validate();
        std::lock_guard lock(state_mutex_);
        model_params_ = msg.params;
        return wire::make_envelope(wire::ModelParamsAck{true}, cid);
      }
      default:
        throw Error(ErrorCode::MalformedPayload,
                    std::string(wire::to_string(request.kind)) + " is not a request a datasite accepts");
    }
  } catch (const Error& e) {
    log("error", e.what());
    return wire::make_error(e.code(), e.detail(), cid);
  }
}

}  // namespace fedrf::datasite
