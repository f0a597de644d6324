#include "boxemb/run_config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

namespace boxemb {

using json = nlohmann::json;

namespace {

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<int>();
}

std::int64_t as_int64(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t as_uint64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw ConfigError("config key '" + key + "' must be a nonnegative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0 && !v.is_number_unsigned())
    throw ConfigError("config key '" + key + "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

template <typename Enum>
Enum as_enum(const json& v, const std::string& key,
             std::optional<Enum> (*from)(std::string_view)) {
  const std::string s = as_string(v, key);
  const auto e = from(s);
  if (!e) throw ConfigError("config key '" + key + "' has unknown value '" + s + "'");
  return *e;
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dim", [](RunConfig& c, const json& v, const std::string& k) { c.dim = as_int64(v, k); }},
      {"param_kind",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.param_kind = as_enum<ParamKind>(v, k, param_kind_from);
       }},
      {"intersection",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.intersection = as_enum<IntersectionKind>(v, k, intersection_kind_from);
       }},
      {"intersection_beta",
       [](RunConfig& c, const json& v, const std::string& k) { c.intersection_beta = as_double(v, k); }},
      {"volume",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.volume = as_enum<VolumeKind>(v, k, volume_kind_from);
       }},
      {"volume_temperature",
       [](RunConfig& c, const json& v, const std::string& k) { c.volume_temperature = as_double(v, k); }},
      {"optimizer",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.optimizer = as_enum<OptimizerKind>(v, k, optimizer_kind_from);
       }},
      {"lr", [](RunConfig& c, const json& v, const std::string& k) { c.lr = as_double(v, k); }},
      {"adam_beta1",
       [](RunConfig& c, const json& v, const std::string& k) { c.adam_beta1 = as_double(v, k); }},
      {"adam_beta2",
       [](RunConfig& c, const json& v, const std::string& k) { c.adam_beta2 = as_double(v, k); }},
      {"adam_eps",
       [](RunConfig& c, const json& v, const std::string& k) { c.adam_eps = as_double(v, k); }},
      {"epochs", [](RunConfig& c, const json& v, const std::string& k) { c.epochs = as_int(v, k); }},
      {"batch_size",
       [](RunConfig& c, const json& v, const std::string& k) { c.batch_size = as_int(v, k); }},
      {"neg_ratio",
       [](RunConfig& c, const json& v, const std::string& k) { c.neg_ratio = as_int(v, k); }},
      {"regularizer",
       [](RunConfig& c, const json& v, const std::string& k) {
         c.regularizer = as_enum<RegularizerKind>(v, k, regularizer_kind_from);
       }},
      {"reg_weight",
       [](RunConfig& c, const json& v, const std::string& k) { c.reg_weight = as_double(v, k); }},
      {"reg_threshold",
       [](RunConfig& c, const json& v, const std::string& k) { c.reg_threshold = as_double(v, k); }},
      {"reg_log_scale",
       [](RunConfig& c, const json& v, const std::string& k) { c.reg_log_scale = as_bool(v, k); }},
      {"seed", [](RunConfig& c, const json& v, const std::string& k) { c.seed = as_uint64(v, k); }},
      {"init_min_lo",
       [](RunConfig& c, const json& v, const std::string& k) { c.init_min_lo = as_double(v, k); }},
      {"init_min_hi",
       [](RunConfig& c, const json& v, const std::string& k) { c.init_min_hi = as_double(v, k); }},
      {"init_side_lo",
       [](RunConfig& c, const json& v, const std::string& k) { c.init_side_lo = as_double(v, k); }},
      {"init_side_hi",
       [](RunConfig& c, const json& v, const std::string& k) { c.init_side_hi = as_double(v, k); }},
      {"val_threshold",
       [](RunConfig& c, const json& v, const std::string& k) { c.val_threshold = as_double(v, k); }},
      {"edges", [](RunConfig& c, const json& v, const std::string& k) { c.edges = as_string(v, k); }},
      {"closure_pct",
       [](RunConfig& c, const json& v, const std::string& k) { c.closure_pct = as_int(v, k); }},
      {"table", [](RunConfig& c, const json& v, const std::string& k) { c.table = as_string(v, k); }},
      {"split", [](RunConfig& c, const json& v, const std::string& k) { c.split = as_string(v, k); }},
      {"split_name",
       [](RunConfig& c, const json& v, const std::string& k) { c.split_name = as_string(v, k); }},
      {"out", [](RunConfig& c, const json& v, const std::string& k) { c.out = as_string(v, k); }},
      {"tree_branching",
       [](RunConfig& c, const json& v, const std::string& k) { c.tree_branching = as_int64(v, k); }},
      {"tree_depth",
       [](RunConfig& c, const json& v, const std::string& k) { c.tree_depth = as_int(v, k); }},
  };
  return table;
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key: " + key);
    it->second(cfg, value, key);
  }
  return cfg;
}

RunConfig run_config_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return run_config_from_json_text(text);
}

std::string run_config_to_json_text(const RunConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["param_kind"] = to_string(c.param_kind);
  j["intersection"] = to_string(c.intersection);
  j["intersection_beta"] = c.intersection_beta;
  j["volume"] = to_string(c.volume);
  j["volume_temperature"] = c.volume_temperature;
  j["optimizer"] = to_string(c.optimizer);
  j["lr"] = c.lr;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["neg_ratio"] = c.neg_ratio;
  j["regularizer"] = to_string(c.regularizer);
  j["reg_weight"] = c.reg_weight;
  j["reg_threshold"] = c.reg_threshold;
  j["reg_log_scale"] = c.reg_log_scale;
  j["seed"] = c.seed;
  j["init_min_lo"] = c.init_min_lo;
  j["init_min_hi"] = c.init_min_hi;
  j["init_side_lo"] = c.init_side_lo;
  j["init_side_hi"] = c.init_side_hi;
  j["val_threshold"] = c.val_threshold;
  j["edges"] = c.edges;
  j["closure_pct"] = c.closure_pct;
  j["table"] = c.table;
  j["split"] = c.split;
  j["split_name"] = c.split_name;
  j["out"] = c.out;
  j["tree_branching"] = c.tree_branching;
  j["tree_depth"] = c.tree_depth;
  return j.dump(2) + "\n";
}

TrainConfig to_train_config(const RunConfig& c) {
  TrainConfig t;
  t.n = c.dim;
  t.param_kind = c.param_kind;
  t.ops.intersection = c.intersection;
  t.ops.beta = c.intersection_beta;
  t.ops.volume = c.volume;
  t.ops.temperature = c.volume_temperature;
  t.optimizer.kind = c.optimizer;
  t.optimizer.lr = c.lr;
  t.optimizer.beta1 = c.adam_beta1;
  t.optimizer.beta2 = c.adam_beta2;
  t.optimizer.eps = c.adam_eps;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.neg_ratio = c.neg_ratio;
  t.regularizer.kind = c.regularizer;
  t.regularizer.weight = c.reg_weight;
  t.regularizer.threshold = c.reg_threshold;
  t.regularizer.log_scale = c.reg_log_scale;
  t.seed = c.seed;
  t.init.min_lo = c.init_min_lo;
  t.init.min_hi = c.init_min_hi;
  t.init.side_lo = c.init_side_lo;
  t.init.side_hi = c.init_side_hi;
  t.val_threshold = c.val_threshold;
  return t;
}

}  // namespace boxemb
