#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fedrf/error.hpp"
#include "fedrf/harness.hpp"
#include "fedrf/rng.hpp"

namespace fedrf::harness {

using nlohmann::json;

forest::Metrics centralized_run(const Dataset& train, const Dataset& test, const wire::ModelParams& params,
                                ClassId positive, unsigned threads) {
  params.validate();
  // Same per-round seed and row sample a lone train silo would receive.
  auto local_data = [&](std::uint64_t seed) {
    return params.sample_fraction < 1.0
               ? train.subsample(params.sample_fraction, derive_seed(seed, hash_label("subsample")))
               : train;
  };
  auto seed = coordinator::silo_seed(params.seed, 0, 0);
  auto model = forest::fit_forest(local_data(seed), params.forest_params(params.n_base_estimators, seed), threads);
  for (std::uint32_t round = 1; round <= params.incremental_rounds; ++round) {
    seed = coordinator::silo_seed(params.seed, round, 0);
    model.params = params.forest_params(static_cast<std::uint32_t>(model.trees.size()), seed);
    model = forest::warm_start_extend(model, local_data(seed), params.n_incremental_estimators, seed, threads);
  }
  return forest::evaluate(model, test, positive);
}

void ExperimentConfig::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "test_fraction must lie in (0, 1)");
  }
  if (silo_counts.empty()) throw Error(ErrorCode::InvalidArgument, "silo_counts must not be empty");
  for (auto n : silo_counts) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "silo counts must be at least 1");
  }
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "seeds must not be empty");
  if (target_column.empty()) throw Error(ErrorCode::InvalidArgument, "target column is required");
  if (multi_process && datasite_binary.empty()) {
    throw Error(ErrorCode::InvalidArgument, "multi-process mode needs datasite_binary");
  }
  model_params.validate();
}

ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir) {
  static const std::set<std::string> known = {"dataset",     "target",     "ignore",  "positive_label",
                                              "label_names", "silo_counts", "test_fraction", "seeds",
                                              "stratify",    "model",      "strategy", "mode",
                                              "datasite_binary", "output_dir", "threads"};
  for (const auto& [key, v] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::InvalidArgument, "unknown key '" + key + "' in experiment config");
  }
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  try {
    ExperimentConfig c;
    c.dataset = resolve(j.at("dataset").get<std::string>());
    c.target_column = j.at("target").get<std::string>();
    c.ignored_columns = j.value("ignore", std::vector<std::string>{});
    c.positive_label = j.at("positive_label").get<std::string>();
    c.label_names = j.value("label_names", std::vector<std::string>{});
    if (j.contains("silo_counts")) c.silo_counts = j.at("silo_counts").get<std::vector<std::size_t>>();
    c.test_fraction = j.value("test_fraction", 0.2);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.stratify = j.value("stratify", false);
    c.model_params = coordinator::parse_model_params(j.value("model", json::object()), 0);
    c.strategy = aggregation::parse_strategy(j.value("strategy", std::string("weighted")));
    const auto mode = j.value("mode", std::string("in-process"));
    if (mode == "multi-process") {
      c.multi_process = true;
    } else if (mode != "in-process") {
      throw Error(ErrorCode::InvalidArgument, "mode must be 'in-process' or 'multi-process'");
    }
    if (j.contains("datasite_binary")) c.datasite_binary = resolve(j.at("datasite_binary").get<std::string>());
    c.output_dir = resolve(j.value("output_dir", std::string("results")));
    c.threads = j.value("threads", 0u);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return parse_experiment(j, path.parent_path());
}

double acc_dev(double centralized, double mode) { return 100.0 * (centralized - mode) / centralized; }

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& runs) {
  std::map<std::size_t, std::vector<const ResultRow*>> groups;  // 0 = centralized
  for (const auto& r : runs) {
    if (r.error.empty()) groups[r.n_silos].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& [n, rows] : groups) {
    SummaryRow s;
    s.mode = rows.front()->mode;
    s.n_silos = n;
    s.runs = rows.size();
    for (const auto* r : rows) {
      s.accuracy += r->metrics.accuracy;
      s.precision += r->metrics.precision;
      s.recall += r->metrics.recall;
      s.f1 += r->metrics.f1;
    }
    const auto k = static_cast<double>(rows.size());
    s.accuracy /= k;
    s.precision /= k;
    s.recall /= k;
    s.f1 /= k;
    double ss = 0.0;
    for (const auto* r : rows) ss += (r->metrics.accuracy - s.accuracy) * (r->metrics.accuracy - s.accuracy);
    s.accuracy_sd = rows.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    out.push_back(s);
  }
  if (!out.empty() && out.front().n_silos == 0) {
    const double base = out.front().accuracy;
    for (auto& s : out) s.acc_dev = acc_dev(base, s.accuracy);
  }
  return out;
}

namespace {

json row_json(const ResultRow& r) {
  json j = {{"mode", r.mode},
            {"n_silos", r.n_silos},
            {"seed", r.seed},
            {"accuracy", r.metrics.accuracy},
            {"precision", r.metrics.precision},
            {"recall", r.metrics.recall},
            {"f1", r.metrics.f1},
            {"acc_dev", r.acc_dev},
            {"tp", r.metrics.tp()},
            {"fp", r.metrics.fp()},
            {"fn", r.metrics.fn()},
            {"tn", r.metrics.tn()},
            {"wall_seconds", r.wall_seconds}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

void write_summaries(const std::filesystem::path& dir, const std::vector<SummaryRow>& summary) {
  std::ofstream csv(dir / "summary.csv", std::ios::trunc);
  csv << "mode,n_silos,runs,accuracy,accuracy_sd,precision,recall,f1,acc_dev\n";
  for (const auto& s : summary) {
    csv << s.mode << ',' << s.n_silos << ',' << s.runs << ',' << fmt(s.accuracy, 9) << ','
        << fmt(s.accuracy_sd, 9) << ',' << fmt(s.precision, 9) << ',' << fmt(s.recall, 9) << ','
        << fmt(s.f1, 9) << ',' << fmt(s.acc_dev, 9) << '\n';
  }

  std::ofstream txt(dir / "summary.txt", std::ios::trunc);
  txt << std::left << std::setw(14) << "Mode" << std::right << std::setw(6) << "Runs" << std::setw(11)
      << "Accuracy" << std::setw(11) << "Precision" << std::setw(9) << "Recall" << std::setw(10) << "F1 Score"
      << std::setw(10) << "Acc Dev" << '\n';
  for (const auto& s : summary) {
    txt << std::left << std::setw(14) << s.mode << std::right << std::setw(6) << s.runs << std::setw(11)
        << fmt(s.accuracy, 4) << std::setw(11) << fmt(s.precision, 4) << std::setw(9) << fmt(s.recall, 4)
        << std::setw(10) << fmt(s.f1, 4) << std::setw(9)
        << (s.n_silos == 0 ? std::string("-") : fmt(s.acc_dev, 2)) << (s.n_silos == 0 ? " " : "%") << '\n';
  }

  std::ofstream dat(dir / "accuracy_vs_silos.dat", std::ios::trunc);
  dat << "# n_silos accuracy accuracy_sd acc_dev_percent\n";
  for (const auto& s : summary) {
    if (s.n_silos == 0) {
      dat << "# centralized " << fmt(s.accuracy, 9) << ' ' << fmt(s.accuracy_sd, 9) << '\n';
    }
  }
  for (const auto& s : summary) {
    if (s.n_silos == 0) continue;
    dat << s.n_silos << ' ' << fmt(s.accuracy, 9) << ' ' << fmt(s.accuracy_sd, 9) << ' ' << fmt(s.acc_dev, 9)
        << '\n';
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const std::function<void(const ResultRow&)>& progress) {
  config.validate();
  auto table = csv::read_table(config.dataset);
  wire::DataParams dp;
  dp.target_column = config.target_column;
  dp.ignored_columns = config.ignored_columns;
  dp.positive_label = config.positive_label;
  dp.label_names = config.label_names.empty() ? datasite::discover_labels(table, config.target_column)
                                              : config.label_names;
  const auto data = datasite::load_dataset(table, dp);
  const auto positive = dp.positive_class();

  // Downstream datasites see the already-filtered columns.
  wire::DataParams silo_dp = dp;
  silo_dp.ignored_columns.clear();

  std::filesystem::create_directories(config.output_dir);
  std::ofstream runs_csv(config.output_dir / "runs.csv", std::ios::trunc);
  std::ofstream runs_jsonl(config.output_dir / "runs.jsonl", std::ios::trunc);
  runs_csv << "mode,n_silos,seed,accuracy,precision,recall,f1,acc_dev,tp,fp,fn,tn,wall_seconds,error\n";

  ExperimentResult result;
  auto record = [&](ResultRow row) {
    if (!row.error.empty()) ++result.failures;
    auto err = row.error;
    for (auto& c : err) {
      if (c == ',' || c == '\n') c = ' ';
    }
    runs_csv << row.mode << ',' << row.n_silos << ',' << row.seed << ',' << fmt(row.metrics.accuracy, 9) << ','
             << fmt(row.metrics.precision, 9) << ',' << fmt(row.metrics.recall, 9) << ','
             << fmt(row.metrics.f1, 9) << ',' << fmt(row.acc_dev, 9) << ',' << row.metrics.tp() << ','
             << row.metrics.fp() << ',' << row.metrics.fn() << ',' << row.metrics.tn() << ','
             << fmt(row.wall_seconds, 3) << ',' << err << '\n';
    runs_csv.flush();
    runs_jsonl << row_json(row).dump() << '\n';
    runs_jsonl.flush();
    if (progress) progress(row);
    result.runs.push_back(std::move(row));
  };
  auto elapsed = [](std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  for (auto seed : config.seeds) {
    auto params = config.model_params;
    params.seed = seed;

    ResultRow central;
    central.mode = "centralized";
    central.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto split = partition(data, 1, config.test_fraction, seed, config.stratify);
      central.metrics = centralized_run(split.parts[0], split.test, params, positive, config.threads);
    } catch (const Error& e) {
      central.error = e.what();
    }
    central.wall_seconds = elapsed(t0);
    const bool have_central = central.error.empty();
    const double central_acc = central.metrics.accuracy;
    record(central);

    for (auto n : config.silo_counts) {
      ResultRow row;
      row.mode = std::to_string(n) + (n == 1 ? " silo" : " silos");
      row.n_silos = n;
      row.seed = seed;
      const auto t1 = std::chrono::steady_clock::now();
      try {
        auto split = partition(data, n, config.test_fraction, seed, config.stratify);
        LocalFederationConfig lc;
        lc.parts = std::move(split.parts);
        lc.test = std::move(split.test);
        lc.data_params = silo_dp;
        lc.multi_process = config.multi_process;
        lc.datasite_binary = config.datasite_binary;
        lc.work_dir = config.output_dir / "work" / ("seed" + std::to_string(seed) + "_n" + std::to_string(n));
        lc.threads = config.threads;
        auto fed = LocalFederation::start(lc);
        auto plan = make_plan(fed->silos(), params, silo_dp, config.strategy);
        row.metrics = coordinator::run_federation(plan, fed->factory(plan.timeout)).metrics;
        fed->shutdown();
        if (have_central) row.acc_dev = acc_dev(central_acc, row.metrics.accuracy);
      } catch (const Error& e) {
        row.error = e.what();
      }
      row.wall_seconds = elapsed(t1);
      record(std::move(row));
    }
  }

  result.summary = summarize(result.runs);
  write_summaries(config.output_dir, result.summary);
  return result;
}

}  // namespace fedrf::harness
