// boxemb command line: toy containment demo, synthetic hierarchy generation,
// split construction, training, evaluation and box-coordinate export.

#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "boxemb/run_config.hpp"

namespace {

using boxemb::RunConfig;

// Flags mirror config keys; values given on the command line override the
// config file. --seed is the documented shorthand override.
struct Cli {
  std::string config_path;
  RunConfig cfg;

  void add_common(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file (strict keys)");
    app.add_option("--out", cfg.out, "output directory");
    app.add_option("--seed", cfg.seed, "seed override");
  }

  void add_model(CLI::App& app) {
    app.add_option("--dim", cfg.dim, "box dimension n");
    app.add_option_function<std::string>(
        "--param-kind",
        [this](const std::string& s) {
          const auto k = boxemb::param_kind_from(s);
          if (!k) throw CLI::ValidationError("--param-kind", "unknown kind '" + s + "'");
          cfg.param_kind = *k;
        },
        "raw | min_delta | sigmoid | tanh");
    app.add_option_function<std::string>(
        "--intersection",
        [this](const std::string& s) {
          const auto k = boxemb::intersection_kind_from(s);
          if (!k) throw CLI::ValidationError("--intersection", "unknown kind '" + s + "'");
          cfg.intersection = *k;
        },
        "hard | gumbel");
    app.add_option("--intersection-beta", cfg.intersection_beta, "gumbel temperature");
    app.add_option_function<std::string>(
        "--volume",
        [this](const std::string& s) {
          const auto k = boxemb::volume_kind_from(s);
          if (!k) throw CLI::ValidationError("--volume", "unknown kind '" + s + "'");
          cfg.volume = *k;
        },
        "hard | soft | bessel_approx");
    app.add_option("--volume-temperature", cfg.volume_temperature, "volume temperature");
  }

  void add_training(CLI::App& app) {
    app.add_option_function<std::string>(
        "--optimizer",
        [this](const std::string& s) {
          const auto k = boxemb::optimizer_kind_from(s);
          if (!k) throw CLI::ValidationError("--optimizer", "unknown kind '" + s + "'");
          cfg.optimizer = *k;
        },
        "sgd | adam");
    app.add_option("--lr", cfg.lr, "learning rate");
    app.add_option("--epochs", cfg.epochs, "training epochs");
    app.add_option("--batch-size", cfg.batch_size, "mini-batch size");
    app.add_option("--neg-ratio", cfg.neg_ratio, "negatives per positive");
    app.add_option_function<std::string>(
        "--regularizer",
        [this](const std::string& s) {
          const auto k = boxemb::regularizer_kind_from(s);
          if (!k) throw CLI::ValidationError("--regularizer", "unknown kind '" + s + "'");
          cfg.regularizer = *k;
        },
        "none | l2_side | volume_threshold");
    app.add_option("--reg-weight", cfg.reg_weight, "regularizer weight");
    app.add_option("--reg-threshold", cfg.reg_threshold, "volume threshold tau");
    app.add_option("--val-threshold", cfg.val_threshold, "classification threshold");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic box embeddings: train and evaluate hierarchy models"};
  app.require_subcommand(1);

  Cli cli;
  std::function<void(const RunConfig&)> action;

  CLI::App* demo = app.add_subcommand("demo-toy", "two-box containment training demo");
  cli.add_common(*demo);
  demo->callback([&] { action = boxemb::cmd_demo_toy; });

  CLI::App* gen = app.add_subcommand("gen-tree", "write a balanced-tree edge list");
  cli.add_common(*gen);
  gen->add_option("--branching", cli.cfg.tree_branching, "children per node");
  gen->add_option("--depth", cli.cfg.tree_depth, "tree depth");
  gen->callback([&] { action = boxemb::cmd_gen_tree; });

  CLI::App* split = app.add_subcommand("split", "build train/validation/test pairs");
  cli.add_common(*split);
  split->add_option("--edges", cli.cfg.edges, "edge-list TSV");
  split->add_option("--closure-pct", cli.cfg.closure_pct, "percent of extra closure edges");
  split->add_option("--neg-ratio", cli.cfg.neg_ratio, "negatives per positive");
  split->callback([&] { action = boxemb::cmd_split; });

  CLI::App* tr = app.add_subcommand("train", "train box embeddings on an edge list");
  cli.add_common(*tr);
  cli.add_model(*tr);
  cli.add_training(*tr);
  tr->add_option("--edges", cli.cfg.edges, "edge-list TSV");
  tr->add_option("--closure-pct", cli.cfg.closure_pct, "percent of extra closure edges");
  tr->callback([&] { action = boxemb::cmd_train; });

  CLI::App* ev = app.add_subcommand("eval", "score a saved split with a saved table");
  cli.add_common(*ev);
  cli.add_model(*ev);
  ev->add_option("--table", cli.cfg.table, "boxes.tsv from train/dump-boxes");
  ev->add_option("--split", cli.cfg.split, "split.tsv from split");
  ev->add_option("--split-name", cli.cfg.split_name, "train | validation | test");
  ev->add_option("--val-threshold", cli.cfg.val_threshold, "classification threshold");
  ev->callback([&] { action = boxemb::cmd_eval; });

  CLI::App* dump = app.add_subcommand("dump-boxes", "export initialized box coordinates");
  cli.add_common(*dump);
  cli.add_model(*dump);
  dump->add_option("--edges", cli.cfg.edges, "edge-list TSV naming the entities");
  dump->callback([&] { action = boxemb::cmd_dump_boxes; });

  // Load the config file first so explicit flags override it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        cli.cfg = boxemb::run_config_from_json_file(argv[i + 1]);
      } catch (const boxemb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
      }
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    action(cli.cfg);
  } catch (const boxemb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
