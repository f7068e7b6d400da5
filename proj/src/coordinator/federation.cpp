#include <atomic>
#include <thread>

#include "fedrf/coordinator.hpp"
#include "fedrf/error.hpp"
#include "fedrf/rng.hpp"
#include "fedrf/wire/forest_codec.hpp"

namespace fedrf::coordinator {

using nlohmann::json;

std::string to_string(SiloStatus s) {
  switch (s) {
    case SiloStatus::Ok: return "ok";
    case SiloStatus::Failed: return "failed";
    case SiloStatus::Timeout: return "timeout";
  }
  return "failed";
}

const SiloRound* RoundReport::find(const std::string& silo) const {
  for (const auto& s : silos) {
    if (s.silo == silo) return &s;
  }
  return nullptr;
}

json RoundReport::to_json() const {
  json silos_json = json::array();
  for (const auto& s : silos) {
    json js = {{"silo", s.silo},
               {"status", to_string(s.status)},
               {"trees_returned", s.trees_returned},
               {"n_samples", s.n_samples},
               {"trees_selected", s.trees_selected}};
    js["weight"] = s.weight ? json(*s.weight) : json(nullptr);
    if (!s.error.empty()) js["error"] = s.error;
    silos_json.push_back(std::move(js));
  }
  return {{"round_index", round_index},
          {"global_size", global_size},
          {"wall_seconds", wall_seconds},
          {"silos", std::move(silos_json)}};
}

std::uint64_t round_seed(std::uint64_t plan_seed, std::uint32_t round_index) {
  return derive_seed(plan_seed, round_index);
}

std::uint64_t silo_seed(std::uint64_t plan_seed, std::uint32_t round_index, std::size_t silo_index) {
  return derive_seed(round_seed(plan_seed, round_index), silo_index);
}

std::uint64_t aggregation_seed(std::uint64_t plan_seed, std::uint32_t round_index) {
  return derive_seed(round_seed(plan_seed, round_index), hash_label("aggregate"));
}

aggregation::ClientWeights resolve_round_weights(const FederationPlan& plan,
                                                 const std::set<aggregation::SiloId>& successful,
                                                 const std::map<aggregation::SiloId, std::uint64_t>& sample_counts) {
  aggregation::ClientWeights declared;
  for (const auto& s : plan.train_silos()) {
    declared.entries.emplace_back(s.id, plan.strategy == aggregation::Strategy::Uniform ? std::nullopt : s.weight);
  }
  const auto mode = plan.strategy == aggregation::Strategy::Uniform ? aggregation::FillMode::Equal : plan.fill_mode;
  return aggregation::resolve_weights(declared, successful, mode, sample_counts);
}

aggregation::AggregationResult merge_round(const FederationPlan& plan, std::uint32_t round_index,
                                           const std::vector<aggregation::ClientForest>& forests,
                                           const aggregation::ClientWeights& weights) {
  if (!plan.concat) {
    return aggregation::aggregate_detailed(forests, weights, aggregation_seed(plan.model_params.seed, round_index));
  }
  aggregation::AggregationResult result;
  result.forest = aggregation::concatenate(forests);
  for (const auto& cf : forests) {
    aggregation::Selection sel;
    sel.silo = cf.silo;
    sel.available = sel.sampled = cf.forest.trees.size();
    for (std::size_t i = 0; i < sel.available; ++i) sel.tree_indices.push_back(i);
    result.selections.push_back(std::move(sel));
  }
  return result;
}

namespace {

std::atomic<std::uint64_t> next_correlation{1};

template <typename Reply, typename Request>
Reply call(SiloClient& client, const Request& request) {
  auto env = wire::make_envelope(request, next_correlation++);
  return wire::open_envelope<Reply>(client.exchange(env));
}

struct Participant {
  SiloSpec spec;
  std::size_t index = 0;  // position among train silos
  std::unique_ptr<SiloClient> client;
  bool alive = false;
  SiloStatus failed_as = SiloStatus::Failed;
  std::string failure;
};

struct Outcome {
  SiloStatus status = SiloStatus::Failed;
  std::string error;
  std::optional<forest::RandomForest> forest;
  std::uint64_t n_samples = 0;
};

void emit(const RunHooks& hooks, json j) {
  if (hooks.log) hooks.log(j.dump());
}

// HELLO, SET_DATA_PARAMS, SET_MODEL_PARAMS; returns the silo's feature names.
std::vector<std::string> handshake(SiloClient& client, const FederationPlan& plan) {
  auto hello = call<wire::Hello>(client, wire::Hello{wire::kProtocolVersion, "coordinator", "coordinator"});
  if (hello.protocol_version != wire::kProtocolVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "datasite speaks protocol " + std::to_string(hello.protocol_version));
  }
  auto ack = call<wire::DataParamsAck>(client, wire::SetDataParams{plan.data_params});
  auto mp_ack = call<wire::ModelParamsAck>(client, wire::SetModelParams{plan.model_params});
  if (!mp_ack.accepted) throw Error(ErrorCode::InvalidArgument, "datasite refused the model params");
  return ack.feature_names;
}

Outcome train_one(Participant& p, const FederationPlan& plan, std::uint32_t round_index,
                  const std::optional<std::vector<std::uint8_t>>& base, const std::vector<std::string>& features) {
  Outcome out;
  try {
    wire::TrainRequest req;
    req.round_index = round_index;
    req.seed = silo_seed(plan.model_params.seed, round_index, p.index);
    req.model_params = plan.model_params;
    req.base_forest = base;
    auto resp = call<wire::TrainResponse>(*p.client, req);
    if (resp.round_index != round_index) {
      throw Error(ErrorCode::MalformedPayload, "response for round " + std::to_string(resp.round_index));
    }
    auto f = wire::decode_forest(resp.forest);
    if (f.feature_names != features || f.label_names != plan.data_params.label_names) {
      throw Error(ErrorCode::SchemaMismatch, "returned forest has a different schema");
    }
    out.forest = std::move(f);
    out.n_samples = resp.n_samples;
    out.status = SiloStatus::Ok;
  } catch (const Error& e) {
    out.status = e.code() == ErrorCode::Timeout ? SiloStatus::Timeout : SiloStatus::Failed;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

FederationResult run_federation(const FederationPlan& plan, const ClientFactory& factory, const RunHooks& hooks) {
  plan.validate();
  const auto& mp = plan.model_params;

  // Eval silo first: without it the run has no result.
  const auto& eval_spec = plan.eval_silo();
  std::unique_ptr<SiloClient> eval_client;
  std::vector<std::string> features;
  try {
    eval_client = factory(eval_spec);
    features = handshake(*eval_client, plan);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaMismatch || e.code() == ErrorCode::UnsupportedVersion) throw;
    throw Error(ErrorCode::EvalSiloUnavailable, "eval silo '" + eval_spec.id + "': " + e.what());
  }

  std::vector<Participant> silos;
  for (const auto& spec : plan.train_silos()) {
    Participant p;
    p.spec = spec;
    p.index = silos.size();
    try {
      p.client = factory(spec);
      auto names = handshake(*p.client, plan);
      if (names != features) {
        throw Error(ErrorCode::SchemaMismatch,
                    "silo '" + spec.id + "' feature columns differ from eval silo '" + eval_spec.id + "'");
      }
      p.alive = true;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SchemaMismatch) throw;
      p.failed_as = e.code() == ErrorCode::Timeout ? SiloStatus::Timeout : SiloStatus::Failed;
      p.failure = e.what();
      emit(hooks, {{"event", "silo_unavailable"}, {"silo", spec.id}, {"error", p.failure}});
    }
    silos.push_back(std::move(p));
  }

  FederationResult result;
  std::optional<forest::RandomForest> global;
  for (std::uint32_t round = 0; round <= mp.incremental_rounds; ++round) {
    const auto started = std::chrono::steady_clock::now();
    std::optional<std::vector<std::uint8_t>> base;
    if (global) base = wire::encode_forest(*global);

    std::vector<Outcome> outcomes(silos.size());
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < silos.size(); ++i) {
      if (!silos[i].alive) continue;
      workers.emplace_back([&, i] { outcomes[i] = train_one(silos[i], plan, round, base, features); });
    }
    for (auto& w : workers) w.join();

    RoundReport report;
    report.round_index = round;
    std::vector<aggregation::ClientForest> forests;
    std::set<aggregation::SiloId> successful;
    std::map<aggregation::SiloId, std::uint64_t> counts;
    for (std::size_t i = 0; i < silos.size(); ++i) {
      auto& p = silos[i];
      SiloRound sr;
      sr.silo = p.spec.id;
      if (!p.alive) {
        sr.status = p.failed_as;
        sr.error = p.failure;
      } else {
        auto& o = outcomes[i];
        sr.status = o.status;
        sr.error = o.error;
        if (o.status == SiloStatus::Ok) {
          sr.trees_returned = o.forest->trees.size();
          sr.n_samples = o.n_samples;
          successful.insert(p.spec.id);
          counts[p.spec.id] = o.n_samples;
          forests.push_back({p.spec.id, std::move(*o.forest)});
        } else {
          p.alive = false;
          p.failed_as = o.status;
          p.failure = "failed in round " + std::to_string(round) + ": " + o.error;
          emit(hooks, {{"event", "silo_failed"}, {"round", round}, {"silo", p.spec.id}, {"error", o.error}});
        }
      }
      report.silos.push_back(std::move(sr));
    }
    if (successful.empty()) {
      throw Error(ErrorCode::NoSuccessfulClients, "no silo completed round " + std::to_string(round));
    }

    auto weights = resolve_round_weights(plan, successful, counts);
    auto merged = merge_round(plan, round, forests, weights);
    for (auto& sr : report.silos) {
      if (sr.status != SiloStatus::Ok) continue;
      sr.weight = weights.get(sr.silo);
      for (const auto& sel : merged.selections) {
        if (sel.silo == sr.silo) sr.trees_selected = sel.tree_indices.size();
      }
    }
    global = std::move(merged.forest);
    global->params = mp.forest_params(static_cast<std::uint32_t>(global->trees.size()), mp.seed);
    report.global_size = global->trees.size();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    emit(hooks, {{"event", "round"}, {"report", report.to_json()}});
    result.reports.push_back(report);
    if (hooks.on_round) hooks.on_round(report);
  }

  try {
    auto eval = call<wire::EvalResponse>(*eval_client, wire::EvalRequest{wire::encode_forest(*global)});
    result.metrics = eval.metrics;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::ConnectionClosed:
      case ErrorCode::Timeout:
      case ErrorCode::MalformedHeader:
      case ErrorCode::FrameTooLarge:
        throw Error(ErrorCode::EvalSiloUnavailable, "eval silo '" + eval_spec.id + "': " + e.what());
      default:
        throw;
    }
  }
  result.forest = std::move(*global);
  emit(hooks, {{"event", "evaluated"},
               {"accuracy", result.metrics.accuracy},
               {"precision", result.metrics.precision},
               {"recall", result.metrics.recall},
               {"f1", result.metrics.f1}});
  return result;
}

}  // namespace fedrf::coordinator
