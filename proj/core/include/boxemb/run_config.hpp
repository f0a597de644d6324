#pragma once

#include <stdexcept>
#include <string>

#include "boxemb/training.hpp"

namespace boxemb {

// A problem with the run configuration (bad JSON, unknown key, invalid value,
// missing input path). The CLI maps this to exit status 1; everything else
// that escapes is a runtime error (exit status 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a command needs, in one flat, strictly-parsed record. Every
// field has a default; unknown JSON keys are fatal.
struct RunConfig {
  // model geometry
  std::int64_t dim = 8;
  ParamKind param_kind = ParamKind::MinDelta;
  IntersectionKind intersection = IntersectionKind::Hard;
  double intersection_beta = 1.0;
  VolumeKind volume = VolumeKind::Soft;
  double volume_temperature = 1.0;
  // optimization
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 100;
  int batch_size = 128;
  int neg_ratio = 10;
  // regularization
  RegularizerKind regularizer = RegularizerKind::L2Side;
  double reg_weight = 1e-3;
  double reg_threshold = 0.0;
  bool reg_log_scale = true;
  // reproducibility
  std::uint64_t seed = 42;
  double init_min_lo = 0.0;
  double init_min_hi = 0.9;
  double init_side_lo = 0.1;
  double init_side_hi = 0.5;
  double val_threshold = 0.5;
  // data and IO
  std::string edges;             // input edge-list TSV
  int closure_pct = 0;
  std::string table;             // saved boxes.tsv (eval)
  std::string split;             // saved split.tsv (eval)
  std::string split_name = "test";
  std::string out = "out";
  std::int64_t tree_branching = 2;
  int tree_depth = 3;

  bool operator==(const RunConfig&) const = default;
};

RunConfig run_config_from_json_text(const std::string& text);
RunConfig run_config_from_json_file(const std::string& path);
std::string run_config_to_json_text(const RunConfig& cfg);

TrainConfig to_train_config(const RunConfig& cfg);

// Command implementations behind the CLI. Each creates cfg.out and writes its
// artifacts there, including the effective config as config.json.
void cmd_demo_toy(const RunConfig& cfg);
void cmd_gen_tree(const RunConfig& cfg);
void cmd_split(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_dump_boxes(const RunConfig& cfg);

}  // namespace boxemb
