#pragma once

#include "boxemb/embedding.hpp"
#include "boxemb/graph.hpp"
#include "boxemb/ops.hpp"

namespace boxemb {

// Binary cross-entropy from a log-probability (logp <= 0, enforced).
// label 1: -logp. label 0: -log(1 - e^{logp}), capped at kBceCap nats with
// zero gradient beyond the cap so that an exactly-contained negative pair
// (P = 1) keeps the loss finite.
inline constexpr double kBceCap = 80.0;

Var bce_from_logp(Var logp, int label);

// Batched form: logp has shape (B,), one label per element. Returns the mean.
Var bce_mean(Var logp, std::span<const int> labels);

// -log [vol(B(theta_x) ∩ B(theta_y)) / vol(B(theta_y))]; minimizing drives
// box_y inside box_x. Thetas are realized with `kind`.
Var toy_containment_loss(Var theta_x, Var theta_y, ParamKind kind, const OpsConfig& ops);

// For each positive (h, t), emit `ratio` corrupted pairs: a fair coin picks
// head or tail, replaced by a uniform entity; self-loops and pairs in
// `forbidden` (default: the positives themselves) are rejected. Returns the
// positives (label 1) interleaved with their negatives (label 0).
// More than 1000 rejections for one slot is a hard error.
std::vector<LabeledPair> sample_negatives(std::span<const Edge> positives,
                                          std::int64_t num_entities, int ratio,
                                          std::uint64_t seed,
                                          const EdgeSet* forbidden = nullptr);

enum class OptimizerKind { Sgd, Adam };
const char* to_string(OptimizerKind k);
std::optional<OptimizerKind> optimizer_kind_from(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Sparse-row optimizer over an embedding table. SGD: p -= lr * g. Adam keeps
// per-row moments and applies bias correction with the global step count;
// only rows present in the gradient are touched (lazy/sparse Adam).
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, std::int64_t rows, std::int64_t cols);

  // Applies one update; increments the step count. Non-finite gradients are
  // a hard error naming the row.
  void step(EmbeddingTable& table, const SparseGrad& grads);

  std::int64_t step_count() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t cols_ = 0;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;  // Adam moments, zero-initialized
};

struct TrainConfig {
  std::int64_t n = 8;
  ParamKind param_kind = ParamKind::MinDelta;
  OpsConfig ops;
  OptimizerConfig optimizer;
  int epochs = 100;
  int batch_size = 128;
  int neg_ratio = 10;
  RegularizerConfig regularizer;
  std::uint64_t seed = 42;
  InitSpec init;
  double val_threshold = 0.5;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
  double val_precision = 0.0;
  double val_recall = 0.0;
};

struct TrainResult {
  EmbeddingTable table;
  std::vector<EpochMetrics> history;
};

// Mini-batch training loop: per epoch, seeded shuffle of the train pairs;
// per batch, mean BCE over the pairs plus the regularizer over the batch's
// unique entities, backward, sparse optimizer step. Single-threaded and
// bit-deterministic for a fixed config.
TrainResult train(const TrainConfig& config, const HierarchyDataset& dataset);

// The exact table train() starts from for this config (used to dump
// pre-training boxes).
EmbeddingTable init_for_config(const TrainConfig& config, std::int64_t num_entities);

// Score pairs against a table (or raw realized coordinates) with the
// configured geometry; forward only.
std::vector<ScoredPair> score_pairs(const EmbeddingTable& table,
                                    std::span<const LabeledPair> pairs, const OpsConfig& ops);
std::vector<ScoredPair> score_pairs(const RealizedBoxes& boxes,
                                    std::span<const LabeledPair> pairs, const OpsConfig& ops);

// The two fixed 15-dimensional boxes of the containment demo, trained with
// SGD on the raw parameterization.
struct ToyDemoResult {
  std::vector<double> loss;  // epochs + 1 entries, loss[0] is pre-training
  double final_logp = 0.0;
  std::vector<double> x_z_before, x_Z_before, y_z_before, y_Z_before;
  std::vector<double> x_z_after, x_Z_after, y_z_after, y_Z_after;
};

ToyDemoResult run_toy_demo(int epochs = 50, double lr = 0.1,
                           double volume_temperature = 0.1,
                           double intersection_beta = 1e-4);

}  // namespace boxemb
