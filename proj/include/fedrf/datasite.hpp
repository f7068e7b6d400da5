#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fedrf/csv.hpp"
#include "fedrf/dataset.hpp"
#include "fedrf/forest.hpp"
#include "fedrf/net.hpp"
#include "fedrf/wire/messages.hpp"

namespace fedrf::datasite {

/// Builds a Dataset from CSV text cells: ignored columns dropped (absent ones
/// are skipped), the rest parsed as doubles, labels mapped through
/// params.label_names. Errors: EmptyFile, MissingColumn, NonNumericFeature
/// (names row and column), UnknownLabelValue.
Dataset load_dataset(const csv::Table& table, const wire::DataParams& params);
Dataset load_dataset(const std::filesystem::path& path, const wire::DataParams& params);

/// Distinct values of the target column, numerically sorted when they all
/// parse as numbers and lexicographically otherwise.
std::vector<std::string> discover_labels(const csv::Table& table, const std::string& target_column);

enum class ApprovalPolicy { AutoApprove, Manual };

ApprovalPolicy parse_policy(const std::string& text);

/// Silo-local settings. Any of target/ignored/positive_label that is set must
/// agree with the coordinator's SET_DATA_PARAMS.
struct DatasiteConfig {
  std::string name = "datasite";
  csv::Table table;
  std::optional<std::string> target_column;
  std::optional<std::vector<std::string>> ignored_columns;
  std::optional<std::string> positive_label;
  ApprovalPolicy policy = ApprovalPolicy::AutoApprove;
  unsigned threads = 0;  // tree-training threads, 0 = hardware concurrency
};

struct PendingRequest {
  std::uint64_t id = 0;
  std::string summary;
  std::chrono::system_clock::time_point received_at;
};

/// Sink for structured log lines (one JSON object per line).
using LogSink = std::function<void(const std::string&)>;
LogSink stderr_log();

/// Owns one private dataset and serves protocol requests against it.
///
/// TRAIN_REQUEST and EVAL_REQUEST pass through the approval gate; in manual
/// mode they are parked and answered with APPROVAL_PENDING until approve()
/// or reject() is called. Each request id executes at most once. Training
/// requests run one at a time in arrival order.
class Datasite {
 public:
  using Reply = std::function<void(wire::Envelope)>;

  explicit Datasite(DatasiteConfig config, LogSink log = stderr_log());

  /// Handles one request; `reply` is called exactly once with the final
  /// answer, and additionally with APPROVAL_PENDING first when parked.
  void submit(const wire::Envelope& request, const Reply& reply);

  /// Synchronous convenience for auto-approve mode: the final reply.
  wire::Envelope call(const wire::Envelope& request);

  void approve(std::uint64_t request_id);
  void reject(std::uint64_t request_id);
  std::vector<PendingRequest> pending() const;

  /// Gate-checked operations; request_id must have been approved unless the
  /// policy is AutoApprove (otherwise NotApproved).
  wire::TrainResponse handle_train(std::uint64_t request_id, const wire::TrainRequest& request);
  wire::EvalResponse handle_eval(std::uint64_t request_id, const wire::EvalRequest& request);

  std::uint32_t round_index() const;
  std::uint64_t executed_requests() const { return executed_.load(); }
  std::optional<Dataset> dataset() const;
  const std::string& name() const noexcept { return config_.name; }

 private:
  struct Parked {
    PendingRequest info;
    wire::Envelope request;
    Reply reply;
  };

  wire::Envelope dispatch(const wire::Envelope& request);
  wire::Envelope execute_gated(std::uint64_t request_id, const wire::Envelope& request);
  wire::DataParamsAck set_data_params(const wire::DataParams& params);
  void check_gate(std::uint64_t request_id);
  void log(const std::string& event, const std::string& detail, std::uint64_t id = 0) const;

  DatasiteConfig config_;
  LogSink log_;

  mutable std::mutex state_mutex_;
  std::optional<wire::DataParams> data_params_;
  std::optional<Dataset> dataset_;
  std::optional<wire::ModelParams> model_params_;
  std::uint32_t round_index_ = 0;

  std::mutex train_mutex_;

  mutable std::mutex queue_mutex_;
  std::uint64_t next_request_id_ = 1;
  std::map<std::uint64_t, Parked> parked_;
  std::set<std::uint64_t> approved_;
  std::atomic<std::uint64_t> executed_{0};
};

/// Serves a Datasite over TCP (framed envelopes) plus an optional local admin
/// socket accepting text lines "approve <id>", "reject <id>", "list".
class DatasiteServer {
 public:
  DatasiteServer(Datasite& site, const net::Address& listen, std::optional<std::string> admin_path = {});
  ~DatasiteServer();
  DatasiteServer(const DatasiteServer&) = delete;
  DatasiteServer& operator=(const DatasiteServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

 private:
  struct Connection;
  void accept_loop();
  void admin_loop();
  void serve(std::shared_ptr<Connection> conn);
  std::string admin_command(const std::string& line);

  Datasite& site_;
  net::Listener listener_;
  std::optional<net::Listener> admin_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex conn_mutex_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::vector<std::thread> workers_;
  std::thread acceptor_;
  std::thread admin_thread_;
  std::mutex stop_mutex_;
  std::condition_variable stopped_cv_;
  bool stopped_ = false;
};

/// Client side of the admin socket; returns the server's reply lines.
std::vector<std::string> admin_request(const std::string& admin_path, const std::string& command);

}  // namespace fedrf::datasite
