#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedrf/coordinator.hpp"
#include "fedrf/error.hpp"
#include "fedrf/wire/forest_codec.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Coordinator: runs a federated random forest over datasites"};
  app.require_subcommand(1);

  std::string plan_path;
  std::string model_out = "global_model.frf";
  std::string reports_out;
  bool concat = false;
  double timeout = 0.0;
  auto* run = app.add_subcommand("run", "run the federation described by a plan file");
  run->add_option("--plan", plan_path, "plan file (JSON)")->required();
  run->add_option("--model-out", model_out, "where to write the final forest blob");
  run->add_option("--reports", reports_out, "write round reports here instead of stdout");
  run->add_flag("--concat", concat, "merge by concatenating every silo's trees (debug)");
  run->add_option("--timeout", timeout, "per-request deadline in seconds (overrides the plan)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto plan = fedrf::coordinator::load_plan(plan_path);
    if (concat) plan.concat = true;
    if (timeout > 0.0) plan.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout * 1000.0));

    std::ofstream reports_file;
    if (!reports_out.empty()) {
      reports_file.open(reports_out, std::ios::trunc);
      if (!reports_file) throw fedrf::Error(fedrf::ErrorCode::Io, "cannot write " + reports_out);
    }
    std::ostream& reports = reports_out.empty() ? std::cout : reports_file;

    fedrf::coordinator::RunHooks hooks;
    hooks.on_round = [&](const fedrf::coordinator::RoundReport& r) { reports << r.to_json().dump() << std::endl; };
    hooks.log = [](const std::string& line) { std::cerr << line << '\n'; };

    auto result = fedrf::coordinator::run_federation(plan, fedrf::coordinator::tcp_factory(plan.timeout), hooks);

    const auto blob = fedrf::wire::encode_forest(result.forest);
    std::ofstream out(model_out, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw fedrf::Error(fedrf::ErrorCode::Io, "cannot write " + model_out);

    const auto& m = result.metrics;
    reports << nlohmann::json{{"event", "result"},
                              {"trees", result.forest.trees.size()},
                              {"accuracy", m.accuracy},
                              {"precision", m.precision},
                              {"recall", m.recall},
                              {"f1", m.f1},
                              {"tp", m.tp()},
                              {"fp", m.fp()},
                              {"fn", m.fn()},
                              {"tn", m.tn()},
                              {"model", model_out}}
                   .dump()
            << std::endl;
    return 0;
  } catch (const fedrf::Error& e) {
    std::cerr << nlohmann::json{{"event", "fatal"}, {"code", fedrf::to_string(e.code())}, {"error", e.detail()}}.dump()
              << '\n';
    return 1;
  }
}
