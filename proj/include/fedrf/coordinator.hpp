#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedrf/aggregation.hpp"
#include "fedrf/datasite.hpp"
#include "fedrf/forest.hpp"
#include "fedrf/wire/messages.hpp"

namespace fedrf::coordinator {

enum class SiloRole { Train, Eval };

struct SiloSpec {
  std::string id;
  std::string address;  // host:port; unused by in-process clients
  std::optional<double> weight;
  SiloRole role = SiloRole::Train;
};

struct FederationPlan {
  std::vector<SiloSpec> silos;
  wire::ModelParams model_params;  // model_params.seed is the federation seed
  wire::DataParams data_params;
  aggregation::Strategy strategy = aggregation::Strategy::Weighted;
  aggregation::FillMode fill_mode = aggregation::FillMode::Equal;
  bool concat = false;  // debug: merge by concatenation instead of sampling
  std::chrono::milliseconds timeout{600'000};

  /// At least one train silo, exactly one eval silo, unique ids, declared
  /// weights in [0,1] and summing to 1 when all are present.
  void validate() const;
  std::vector<SiloSpec> train_silos() const;
  const SiloSpec& eval_silo() const;
};

/// The "model" object of plan and experiment files; absent keys keep their
/// defaults, unknown keys are rejected.
wire::ModelParams parse_model_params(const nlohmann::json& model, std::uint64_t seed);
nlohmann::json model_params_to_json(const wire::ModelParams& params);

/// Plan files are JSON; see docs/protocol.md for the schema.
FederationPlan parse_plan(const nlohmann::json& j);
FederationPlan load_plan(const std::filesystem::path& path);
nlohmann::json plan_to_json(const FederationPlan& plan);

enum class SiloStatus { Ok, Failed, Timeout };
std::string to_string(SiloStatus s);

struct SiloRound {
  std::string silo;
  SiloStatus status = SiloStatus::Ok;
  std::size_t trees_returned = 0;
  std::uint64_t n_samples = 0;
  std::optional<double> weight;   // resolved weight, if the silo succeeded
  std::size_t trees_selected = 0;  // contribution to the global forest
  std::string error;
};

struct RoundReport {
  std::uint32_t round_index = 0;
  std::vector<SiloRound> silos;
  std::size_t global_size = 0;
  double wall_seconds = 0.0;

  const SiloRound* find(const std::string& silo) const;
  nlohmann::json to_json() const;
};

/// One request/response exchange with a datasite. APPROVAL_PENDING replies
/// are absorbed; the final reply is returned.
class SiloClient {
 public:
  virtual ~SiloClient() = default;
  virtual wire::Envelope exchange(const wire::Envelope& request) = 0;
};

using ClientFactory = std::function<std::unique_ptr<SiloClient>(const SiloSpec&)>;

/// Connects over TCP. Each exchange has `timeout` to complete; Timeout is
/// thrown when it passes.
std::unique_ptr<SiloClient> connect_tcp_client(const std::string& address, std::chrono::milliseconds timeout);
ClientFactory tcp_factory(std::chrono::milliseconds timeout);

/// Talks to a Datasite in the same process. Requests and replies still pass
/// through frame encoding so both sides see exactly the wire bytes.
std::unique_ptr<SiloClient> in_process_client(datasite::Datasite& site);

struct RunHooks {
  /// Called after every aggregation.
  std::function<void(const RoundReport&)> on_round;
  std::function<void(const std::string&)> log;
};

struct FederationResult {
  forest::RandomForest forest;
  std::vector<RoundReport> reports;
  forest::Metrics metrics;
};

std::uint64_t round_seed(std::uint64_t plan_seed, std::uint32_t round_index);
/// Seed sent to the train silo at position `silo_index` of the plan's train
/// list. Fixed per position so a failed silo does not shift the others.
std::uint64_t silo_seed(std::uint64_t plan_seed, std::uint32_t round_index, std::size_t silo_index);
std::uint64_t aggregation_seed(std::uint64_t plan_seed, std::uint32_t round_index);

/// Weights for one round over the silos that succeeded in it.
aggregation::ClientWeights resolve_round_weights(const FederationPlan& plan,
                                                 const std::set<aggregation::SiloId>& successful,
                                                 const std::map<aggregation::SiloId, std::uint64_t>& sample_counts);

/// Round 0 trains base forests, rounds 1..incremental_rounds warm-start the
/// global forest; each round is aggregated, then the final forest is
/// evaluated at the eval silo. Errors: NoSuccessfulClients,
/// EvalSiloUnavailable, SchemaMismatch.
FederationResult run_federation(const FederationPlan& plan, const ClientFactory& factory,
                                const RunHooks& hooks = {});

/// Merges one round's forests as the plan prescribes (sampling, or
/// concatenation when plan.concat is set).
aggregation::AggregationResult merge_round(const FederationPlan& plan, std::uint32_t round_index,
                                           const std::vector<aggregation::ClientForest>& forests,
                                           const aggregation::ClientWeights& weights);

}  // namespace fedrf::coordinator
