#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "boxemb/run_config.hpp"

namespace boxemb {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path out(cfg.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out.string());
  write_text(out / "config.json", run_config_to_json_text(cfg));
  return out;
}

void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is required in the config");
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

void append_double(std::string& s, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, res.ptr);
}

void append_box_row(std::string& s, std::int64_t id, std::span<const double> z,
                    std::span<const double> Z) {
  s += std::to_string(id);
  s += '\t';
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i) s += ' ';
    append_double(s, z[i]);
  }
  s += '\t';
  for (std::size_t i = 0; i < Z.size(); ++i) {
    if (i) s += ' ';
    append_double(s, Z[i]);
  }
  s += '\n';
}

json metrics_line(const EpochMetrics& m) {
  json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["val_f1"] = m.val_f1;
  j["val_precision"] = m.val_precision;
  j["val_recall"] = m.val_recall;
  return j;
}

}  // namespace

void cmd_demo_toy(const RunConfig& cfg) {
  const fs::path out = prepare_out(cfg);
  // Hyperparameters pinned to the published demo: 15 dims, SGD lr 0.1,
  // 50 epochs, soft volume T = 0.1, gumbel intersection beta = 1e-4.
  const ToyDemoResult res = run_toy_demo();

  std::string before, after;
  append_box_row(before, 0, res.x_z_before, res.x_Z_before);
  append_box_row(before, 1, res.y_z_before, res.y_Z_before);
  append_box_row(after, 0, res.x_z_after, res.x_Z_after);
  append_box_row(after, 1, res.y_z_after, res.y_Z_after);
  write_text(out / "boxes_before.tsv", before);
  write_text(out / "boxes_after.tsv", after);

  std::string lines;
  for (std::size_t i = 0; i < res.loss.size(); ++i) {
    json j;
    j["epoch"] = i;
    j["loss"] = res.loss[i];
    lines += j.dump();
    lines += '\n';
  }
  write_text(out / "loss.jsonl", lines);

  json f;
  f["initial_loss"] = res.loss.front();
  f["final_loss"] = res.loss.back();
  f["final_containment_prob"] = std::exp(res.final_logp);
  write_text(out / "final.json", f.dump(2) + "\n");
}

void cmd_gen_tree(const RunConfig& cfg) {
  const fs::path out = prepare_out(cfg);
  const Hierarchy h = gen_tree(cfg.tree_branching, cfg.tree_depth);
  std::ofstream es(out / "edges.tsv", std::ios::binary);
  write_edges(h, es);
  std::ofstream vs(out / "vocab.tsv", std::ios::binary);
  write_vocab(h, vs);
}

void cmd_split(const RunConfig& cfg) {
  require_input(cfg.edges, "edge list");
  const fs::path out = prepare_out(cfg);
  const Hierarchy h = load_edges_file(cfg.edges);
  HierarchyDataset ds;
  try {
    ds = make_split(h, cfg.closure_pct, cfg.neg_ratio, cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::ofstream ss(out / "split.tsv", std::ios::binary);
  write_split(ds, ss);
  std::ofstream vs(out / "vocab.tsv", std::ios::binary);
  write_vocab(h, vs);
  json s;
  s["num_entities"] = ds.num_entities;
  s["train_pairs"] = ds.train.size();
  s["validation_pairs"] = ds.validation.size();
  s["test_pairs"] = ds.test.size();
  write_text(out / "split.json", s.dump(2) + "\n");
}

void cmd_train(const RunConfig& cfg) {
  require_input(cfg.edges, "edge list");
  const fs::path out = prepare_out(cfg);
  const Hierarchy h = load_edges_file(cfg.edges);
  const TrainConfig tc = to_train_config(cfg);
  HierarchyDataset ds;
  try {
    tc.validate();
    ds = make_split(h, cfg.closure_pct, cfg.neg_ratio, cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const TrainResult res = train(tc, ds);

  std::string lines;
  for (const auto& m : res.history) {
    lines += metrics_line(m).dump();
    lines += '\n';
  }
  write_text(out / "metrics.jsonl", lines);

  const auto test_metrics = f1_score(score_pairs(res.table, ds.test, tc.ops), tc.val_threshold);
  json f;
  f["epochs"] = cfg.epochs;
  f["final_train_loss"] = res.history.empty() ? 0.0 : res.history.back().train_loss;
  f["val_f1"] = res.history.empty() ? 0.0 : res.history.back().val_f1;
  f["val_precision"] = res.history.empty() ? 0.0 : res.history.back().val_precision;
  f["val_recall"] = res.history.empty() ? 0.0 : res.history.back().val_recall;
  f["test_f1"] = test_metrics.f1;
  f["test_precision"] = test_metrics.precision;
  f["test_recall"] = test_metrics.recall;
  write_text(out / "final.json", f.dump(2) + "\n");

  std::ofstream bos(out / "boxes.tsv", std::ios::binary);
  dump_boxes_tsv(res.table, bos);
  std::ofstream vs(out / "vocab.tsv", std::ios::binary);
  write_vocab(h, vs);
}

void cmd_eval(const RunConfig& cfg) {
  require_input(cfg.table, "box table");
  require_input(cfg.split, "split file");
  const fs::path out = prepare_out(cfg);

  std::ifstream ts(cfg.table);
  const RealizedBoxes boxes = load_boxes_tsv(ts);
  std::ifstream ss(cfg.split);
  const HierarchyDataset ds = load_split(ss);

  const std::vector<LabeledPair>* pairs = nullptr;
  if (cfg.split_name == "train")
    pairs = &ds.train;
  else if (cfg.split_name == "validation")
    pairs = &ds.validation;
  else if (cfg.split_name == "test")
    pairs = &ds.test;
  else
    throw ConfigError("split_name must be train, validation or test; got '" + cfg.split_name +
                      "'");

  const TrainConfig tc = to_train_config(cfg);
  const auto metrics = f1_score(score_pairs(boxes, *pairs, tc.ops), cfg.val_threshold);
  json e;
  e["split"] = cfg.split_name;
  e["threshold"] = cfg.val_threshold;
  e["num_pairs"] = pairs->size();
  e["precision"] = metrics.precision;
  e["recall"] = metrics.recall;
  e["f1"] = metrics.f1;
  write_text(out / "eval.json", e.dump(2) + "\n");
}

void cmd_dump_boxes(const RunConfig& cfg) {
  require_input(cfg.edges, "edge list");
  const fs::path out = prepare_out(cfg);
  const Hierarchy h = load_edges_file(cfg.edges);
  const EmbeddingTable table = init_for_config(to_train_config(cfg), h.num_entities());
  std::ofstream bos(out / "boxes.tsv", std::ios::binary);
  dump_boxes_tsv(table, bos);
  std::ofstream vs(out / "vocab.tsv", std::ios::binary);
  write_vocab(h, vs);
}

}  // namespace boxemb
