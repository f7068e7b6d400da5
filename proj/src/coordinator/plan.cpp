#include <cmath>
#include <fstream>
#include <set>

#include "fedrf/coordinator.hpp"
#include "fedrf/error.hpp"

namespace fedrf::coordinator {

using nlohmann::json;

void FederationPlan::validate() const {
  std::set<std::string> ids;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  for (const auto& s : silos) {
    if (s.id.empty()) throw Error(ErrorCode::InvalidArgument, "silo id must not be empty");
    if (!ids.insert(s.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate silo id '" + s.id + "'");
    if (s.role == SiloRole::Train) {
      ++n_train;
    } else {
      ++n_eval;
      if (s.weight) throw Error(ErrorCode::InvalidArgument, "eval silo '" + s.id + "' cannot carry a weight");
    }
    if (s.weight && !(*s.weight >= 0.0 && *s.weight <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "weight of silo '" + s.id + "' must lie in [0, 1]");
    }
  }
  if (n_train == 0) throw Error(ErrorCode::InvalidArgument, "plan needs at least one train silo");
  if (n_eval != 1) throw Error(ErrorCode::InvalidArgument, "plan needs exactly one eval silo");

  double sum = 0.0;
  bool all = true;
  for (const auto& s : train_silos()) {
    if (s.weight) {
      sum += *s.weight;
    } else {
      all = false;
    }
  }
  if (sum > 1.0 + aggregation::kWeightTolerance) {
    throw Error(ErrorCode::DeclaredWeightsExceedOne, "declared weights sum to " + std::to_string(sum));
  }
  if (all && std::abs(sum - 1.0) > aggregation::kWeightTolerance) {
    throw Error(ErrorCode::InvalidArgument, "declared weights sum to " + std::to_string(sum) + ", not 1");
  }
  if (timeout.count() <= 0) throw Error(ErrorCode::InvalidArgument, "timeout must be positive");
  model_params.validate();
  data_params.validate();
}

std::vector<SiloSpec> FederationPlan::train_silos() const {
  std::vector<SiloSpec> out;
  for (const auto& s : silos) {
    if (s.role == SiloRole::Train) out.push_back(s);
  }
  return out;
}

const SiloSpec& FederationPlan::eval_silo() const {
  for (const auto& s : silos) {
    if (s.role == SiloRole::Eval) return s;
  }
  throw Error(ErrorCode::InvalidArgument, "plan has no eval silo");
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorCode::InvalidArgument, "unknown key '" + key + "' in " + where);
  }
}

}  // namespace

wire::ModelParams parse_model_params(const json& model, std::uint64_t seed) {
  try {
    reject_unknown(model,
                   {"n_base_estimators", "n_incremental_estimators", "incremental_rounds", "sample_fraction",
                    "max_features", "max_depth", "min_samples_split", "bootstrap"},
                   "model");
    wire::ModelParams mp;
    mp.n_base_estimators = get_or<std::uint32_t>(model, "n_base_estimators", mp.n_base_estimators);
    mp.n_incremental_estimators = get_or<std::uint32_t>(model, "n_incremental_estimators", 0);
    mp.incremental_rounds = get_or<std::uint32_t>(model, "incremental_rounds", 0);
    mp.sample_fraction = get_or<double>(model, "sample_fraction", 1.0);
    if (model.contains("max_features")) {
      const auto& mf = model.at("max_features");
      mp.max_features = forest::MaxFeatures::parse(mf.is_number() ? std::to_string(mf.get<std::uint32_t>())
                                                                  : mf.get<std::string>());
    }
    if (model.contains("max_depth") && !model.at("max_depth").is_null()) {
      mp.max_depth = model.at("max_depth").get<std::uint32_t>();
    }
    mp.min_samples_split = get_or<std::uint32_t>(model, "min_samples_split", 2);
    mp.bootstrap = get_or<bool>(model, "bootstrap", true);
    mp.seed = seed;
    mp.validate();
    return mp;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("model: ") + e.what());
  }
}

json model_params_to_json(const wire::ModelParams& mp) {
  return {{"n_base_estimators", mp.n_base_estimators},
          {"n_incremental_estimators", mp.n_incremental_estimators},
          {"incremental_rounds", mp.incremental_rounds},
          {"sample_fraction", mp.sample_fraction},
          {"max_features", mp.max_features.to_string()},
          {"max_depth", mp.max_depth ? json(*mp.max_depth) : json(nullptr)},
          {"min_samples_split", mp.min_samples_split},
          {"bootstrap", mp.bootstrap}};
}

FederationPlan parse_plan(const json& j) {
  try {
    reject_unknown(j, {"seed", "strategy", "weight_fill", "concat", "timeout_seconds", "model", "data", "silos"},
                   "plan");
    FederationPlan plan;
    plan.strategy = aggregation::parse_strategy(get_or<std::string>(j, "strategy", "weighted"));
    plan.fill_mode = aggregation::parse_fill_mode(get_or<std::string>(j, "weight_fill", "equal"));
    plan.concat = get_or<bool>(j, "concat", false);
    plan.timeout = std::chrono::milliseconds(
        static_cast<std::int64_t>(get_or<double>(j, "timeout_seconds", 600.0) * 1000.0));

    plan.model_params = parse_model_params(j.value("model", json::object()), get_or<std::uint64_t>(j, "seed", 0));

    const json& data = j.at("data");
    reject_unknown(data, {"target_column", "ignored_columns", "positive_label", "label_names"}, "data");
    plan.data_params.target_column = data.at("target_column").get<std::string>();
    plan.data_params.ignored_columns = get_or<std::vector<std::string>>(data, "ignored_columns", {});
    plan.data_params.positive_label = data.at("positive_label").get<std::string>();
    plan.data_params.label_names = data.at("label_names").get<std::vector<std::string>>();

    for (const auto& s : j.at("silos")) {
      reject_unknown(s, {"id", "address", "weight", "role"}, "silo");
      SiloSpec spec;
      spec.id = s.at("id").get<std::string>();
      spec.address = get_or<std::string>(s, "address", "");
      if (s.contains("weight") && !s.at("weight").is_null()) spec.weight = s.at("weight").get<double>();
      const auto role = get_or<std::string>(s, "role", "train");
      if (role == "train") {
        spec.role = SiloRole::Train;
      } else if (role == "eval") {
        spec.role = SiloRole::Eval;
      } else {
        throw Error(ErrorCode::InvalidArgument, "silo role must be 'train' or 'eval', got '" + role + "'");
      }
      plan.silos.push_back(std::move(spec));
    }
    plan.validate();
    return plan;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("plan: ") + e.what());
  }
}

FederationPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open plan " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return parse_plan(j);
}

json plan_to_json(const FederationPlan& plan) {
  const auto& mp = plan.model_params;
  json model = model_params_to_json(mp);
  json data = {{"target_column", plan.data_params.target_column},
               {"ignored_columns", plan.data_params.ignored_columns},
               {"positive_label", plan.data_params.positive_label},
               {"label_names", plan.data_params.label_names}};
  json silos = json::array();
  for (const auto& s : plan.silos) {
    json js = {{"id", s.id}, {"address", s.address}, {"role", s.role == SiloRole::Train ? "train" : "eval"}};
    if (s.weight) js["weight"] = *s.weight;
    silos.push_back(std::move(js));
  }
  return {{"seed", mp.seed},
          {"strategy", aggregation::to_string(plan.strategy)},
          {"weight_fill", aggregation::to_string(plan.fill_mode)},
          {"concat", plan.concat},
          {"timeout_seconds", static_cast<double>(plan.timeout.count()) / 1000.0},
          {"model", std::move(model)},
          {"data", std::move(data)},
          {"silos", std::move(silos)}};
}

}  // namespace fedrf::coordinator
