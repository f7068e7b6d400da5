#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedrf/datasite.hpp"
#include "fedrf/error.hpp"
#include "fedrf/harness.hpp"

namespace {

int run_partition(const std::string& data_path, const std::string& target, std::size_t silos, double test,
                  std::uint64_t seed, bool stratify, const std::filesystem::path& out) {
  auto table = fedrf::csv::read_table(data_path);
  // Labels only matter for the class checks; every other column is kept
  // verbatim in the output files.
  fedrf::wire::DataParams dp;
  dp.target_column = target;
  dp.label_names = fedrf::datasite::discover_labels(table, target);
  dp.positive_label = dp.label_names.back();
  for (const auto& h : table.header) {
    if (h != target) dp.ignored_columns.push_back(h);
  }
  const auto data = fedrf::datasite::load_dataset(table, dp);
  const auto split = fedrf::harness::partition(data, silos, test, seed, stratify);

  std::filesystem::create_directories(out);
  auto write = [&](const std::string& name, const std::vector<std::size_t>& rows) {
    fedrf::csv::Table t;
    t.header = table.header;
    for (auto r : rows) t.rows.push_back(table.rows[r]);
    fedrf::csv::write_table(out / name, t);
    std::cout << nlohmann::json{{"file", (out / name).string()}, {"rows", rows.size()}}.dump() << '\n';
  };
  write("test.csv", split.test_rows);
  for (std::size_t k = 0; k < silos; ++k) write("silo-" + std::to_string(k + 1) + ".csv", split.part_rows[k]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedrf-bench: partition datasets and sweep federated experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment sweep");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();

  std::string data_path;
  std::string target;
  std::size_t silos = 1;
  double test = 0.2;
  std::uint64_t seed = 0;
  bool stratify = false;
  std::string out_dir;
  auto* part = app.add_subcommand("partition", "split a CSV into a test silo and N train silos");
  part->add_option("--data", data_path, "input CSV")->required();
  part->add_option("--target", target, "label column")->required();
  part->add_option("--silos", silos, "number of train silos")->required();
  part->add_option("--test", test, "test fraction");
  part->add_option("--seed", seed, "shuffle seed");
  part->add_flag("--stratify", stratify, "keep class ratios in every part");
  part->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (part->parsed()) return run_partition(data_path, target, silos, test, seed, stratify, out_dir);

    auto config = fedrf::harness::load_experiment(config_path);
    auto result = fedrf::harness::run_experiment(config, [](const fedrf::harness::ResultRow& r) {
      std::cerr << r.mode << " seed " << r.seed << ": "
                << (r.error.empty() ? "accuracy " + std::to_string(r.metrics.accuracy) : "FAILED " + r.error)
                << '\n';
    });
    std::ifstream summary(config.output_dir / "summary.txt");
    std::cout << summary.rdbuf();
    if (result.failures > 0) {
      std::cerr << result.failures << " run(s) failed\n";
      return 1;
    }
    return 0;
  } catch (const fedrf::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
