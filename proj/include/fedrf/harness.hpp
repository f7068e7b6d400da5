#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedrf/coordinator.hpp"
#include "fedrf/csv.hpp"
#include "fedrf/dataset.hpp"
#include "fedrf/datasite.hpp"
#include "fedrf/wire/messages.hpp"

namespace fedrf::harness {

struct Partition {
  Dataset test;
  std::vector<Dataset> parts;
  std::vector<std::size_t> test_rows;               // indices into the input
  std::vector<std::vector<std::size_t>> part_rows;  // one list per silo
};

/// Shuffles rows by `seed`, puts the first ceil(test_fraction * n) in the
/// test set and splits the rest into n_silos contiguous parts whose sizes
/// differ by at most one. With `stratify`, test and parts keep the overall
/// class ratios as closely as integer counts allow.
/// Errors: InvalidArgument, TooFewRows, SingleClassPartition.
Partition partition(const Dataset& data, std::size_t n_silos, double test_fraction, std::uint64_t seed,
                    bool stratify = false);

/// Dataset back to CSV cells: features, then `target` holding label names.
csv::Table to_table(const Dataset& data, const std::string& target);

/// Trains on `train` exactly as a one-silo federation would (same seeds,
/// subsampling and warm-start schedule) and evaluates on `test`.
forest::Metrics centralized_run(const Dataset& train, const Dataset& test, const wire::ModelParams& params,
                                ClassId positive, unsigned threads = 0);

/// Everything a local federation needs. Silo ids are "silo-1".."silo-N" and
/// "eval".
struct LocalFederationConfig {
  std::vector<Dataset> parts;
  Dataset test;
  wire::DataParams data_params;
  bool multi_process = false;
  std::filesystem::path datasite_binary;  // multi-process only
  std::filesystem::path work_dir;         // CSVs and child logs, multi-process only
  unsigned threads = 0;
};

/// Running datasites for one federation. Destruction tears everything down.
class LocalFederation {
 public:
  static std::unique_ptr<LocalFederation> start(const LocalFederationConfig& config);
  ~LocalFederation();
  LocalFederation(const LocalFederation&) = delete;
  LocalFederation& operator=(const LocalFederation&) = delete;

  /// Silo list with addresses filled in (train silos first, eval last).
  const std::vector<coordinator::SiloSpec>& silos() const noexcept { return silos_; }
  coordinator::ClientFactory factory(std::chrono::milliseconds timeout = std::chrono::seconds(600));

  /// Abruptly ends one datasite (SIGKILL for processes).
  void kill(const std::string& silo_id);
  /// Stops all datasites; idempotent.
  void shutdown();

  std::vector<std::uint16_t> ports() const;
  bool multi_process() const noexcept { return multi_process_; }

 private:
  LocalFederation() = default;
  struct Child;
  struct InProcessSite;

  bool multi_process_ = false;
  std::vector<coordinator::SiloSpec> silos_;
  std::vector<std::unique_ptr<Child>> children_;
  std::map<std::string, std::unique_ptr<InProcessSite>> sites_;
};

/// Builds the plan for a local federation: equal weights, one eval silo.
coordinator::FederationPlan make_plan(const std::vector<coordinator::SiloSpec>& silos,
                                      const wire::ModelParams& params, const wire::DataParams& data_params,
                                      aggregation::Strategy strategy = aggregation::Strategy::Weighted);

/// True if something accepts TCP connections on 127.0.0.1:port.
bool port_open(std::uint16_t port);

struct ExperimentConfig {
  std::filesystem::path dataset;
  std::string target_column;
  std::vector<std::string> ignored_columns;
  std::string positive_label;
  std::vector<std::string> label_names;  // discovered from the data when empty
  std::vector<std::size_t> silo_counts{1, 3, 5, 10};
  double test_fraction = 0.2;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  bool stratify = false;
  wire::ModelParams model_params;
  aggregation::Strategy strategy = aggregation::Strategy::Weighted;
  bool multi_process = false;
  std::filesystem::path datasite_binary;
  std::filesystem::path output_dir = "results";
  unsigned threads = 0;

  void validate() const;
};

ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);

struct ResultRow {
  std::string mode;  // "centralized" or "<N> silos"
  std::size_t n_silos = 0;  // 0 for centralized
  std::uint64_t seed = 0;
  forest::Metrics metrics;
  double acc_dev = 0.0;  // percent, against the same-seed centralized run
  double wall_seconds = 0.0;
  std::string error;
};

struct SummaryRow {
  std::string mode;
  std::size_t n_silos = 0;
  std::size_t runs = 0;
  double accuracy = 0.0;
  double accuracy_sd = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double acc_dev = 0.0;  // from the mean accuracies in this table
};

struct ExperimentResult {
  std::vector<ResultRow> runs;
  std::vector<SummaryRow> summary;
  std::size_t failures = 0;
};

double acc_dev(double centralized, double mode);
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& runs);

/// Sweeps seeds x silo counts, writing runs.csv, runs.jsonl, summary.csv,
/// summary.txt and accuracy_vs_silos.dat into config.output_dir. Per-run
/// records are flushed as they complete; failed runs are recorded and
/// counted rather than aborting the sweep.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::function<void(const ResultRow&)>& progress = {});

}  // namespace fedrf::harness
