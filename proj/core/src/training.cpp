#include "boxemb/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "boxemb/rng.hpp"

namespace boxemb {

namespace {
// logp at which -log(1 - e^logp) reaches the cap.
const double kCapBoundary = stable_log1mexp(-kBceCap);

constexpr std::uint64_t kSeedInitTag = 0x10;
constexpr std::uint64_t kSeedEpochTag = 0x1000;

void check_logp_nonpositive(const Array& v) {
  for (std::int64_t i = 0; i < v.numel(); ++i)
    if (v[i] > 0.0)
      throw std::invalid_argument("bce_from_logp: logp " + std::to_string(v[i]) +
                                  " > 0 violates the clamp contract upstream");
}
}  // namespace

Var bce_from_logp(Var logp, int label) {
  if (logp.value().numel() != 1)
    throw std::invalid_argument("bce_from_logp: logp must be scalar; use bce_mean for batches");
  check_logp_nonpositive(logp.value());
  if (label == 1) return neg(logp);
  if (logp.value()[0] >= kCapBoundary) return logp.tape->constant(kBceCap);
  return neg(log1mexp(logp));
}

Var bce_mean(Var logp, std::span<const int> labels) {
  const Shape& s = logp.shape();
  if (s.rank() != 1 || s[0] != static_cast<std::int64_t>(labels.size()))
    throw std::invalid_argument("bce_mean: logp shape " + s.str() + " vs " +
                                std::to_string(labels.size()) + " labels");
  check_logp_nonpositive(logp.value());
  Tape& t = *logp.tape;
  const std::int64_t b = s[0];
  if (b == 0) return t.constant(0.0);

  std::vector<std::int64_t> pos, neg_live;
  std::int64_t capped = 0;
  for (std::int64_t i = 0; i < b; ++i) {
    if (labels[static_cast<std::size_t>(i)] == 1) {
      pos.push_back(i);
    } else if (logp.value()[i] >= kCapBoundary) {
      ++capped;  // P = 1 exactly (or within the cap): constant loss, no gradient
    } else {
      neg_live.push_back(i);
    }
  }
  Var total = t.constant(static_cast<double>(capped) * kBceCap);
  if (!pos.empty())
    total = add(total, sum_axis(neg(index_select(logp, 0, pos)), 0));
  if (!neg_live.empty())
    total = add(total, sum_axis(neg(log1mexp(index_select(logp, 0, neg_live))), 0));
  return scale(total, 1.0 / static_cast<double>(b));
}

Var toy_containment_loss(Var theta_x, Var theta_y, ParamKind kind, const OpsConfig& ops) {
  Box bx = realize(kind, theta_x);
  Box by = realize(kind, theta_y);
  return neg(log_containment_prob(bx, by, ops));
}

std::vector<LabeledPair> sample_negatives(std::span<const Edge> positives,
                                          std::int64_t num_entities, int ratio,
                                          std::uint64_t seed, const EdgeSet* forbidden) {
  if (ratio < 0) throw std::invalid_argument("sample_negatives: ratio must be >= 0");
  EdgeSet own;
  if (forbidden == nullptr) {
    own.insert(positives.begin(), positives.end());
    forbidden = &own;
  }
  Xoshiro256ss rng(seed);
  std::vector<LabeledPair> out;
  out.reserve(positives.size() * static_cast<std::size_t>(1 + ratio));
  for (const Edge& e : positives) {
    out.push_back({e.first, e.second, 1});
    for (int j = 0; j < ratio; ++j) {
      bool found = false;
      for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
        const bool corrupt_head = rng.coin();
        const auto r = static_cast<std::int64_t>(rng.bounded(static_cast<std::uint64_t>(num_entities)));
        const Edge cand = corrupt_head ? Edge{r, e.second} : Edge{e.first, r};
        if (cand.first == cand.second) continue;  // no self-loops
        if (forbidden->count(cand)) continue;
        out.push_back({cand.first, cand.second, 0});
        found = true;
      }
      if (!found)
        throw std::runtime_error(
            "sample_negatives: no negative found after 1000 rejections for positive (" +
            std::to_string(e.first) + ", " + std::to_string(e.second) + ")");
    }
  }
  return out;
}

const char* to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

std::optional<OptimizerKind> optimizer_kind_from(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  return std::nullopt;
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("optimizer: lr must be positive");
  if (kind == OptimizerKind::Adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("optimizer: adam betas must be in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("optimizer: adam eps must be positive");
  }
}

Optimizer::Optimizer(const OptimizerConfig& cfg, std::int64_t rows, std::int64_t cols)
    : cfg_(cfg), cols_(cols) {
  cfg_.validate();
  if (cfg_.kind == OptimizerKind::Adam) {
    m_.assign(static_cast<std::size_t>(rows * cols), 0.0);
    v_.assign(static_cast<std::size_t>(rows * cols), 0.0);
  }
}

void Optimizer::step(EmbeddingTable& table, const SparseGrad& grads) {
  ++t_;
  for (const auto& [row, g] : grads) {
    if (row < 0 || row >= table.num_entities)
      throw std::invalid_argument("optimizer: gradient row " + std::to_string(row) +
                                  " out of range");
    if (static_cast<std::int64_t>(g.size()) != cols_)
      throw std::invalid_argument("optimizer: gradient width mismatch at row " +
                                  std::to_string(row));
    for (double gv : g)
      if (!std::isfinite(gv))
        throw std::runtime_error("optimizer: non-finite gradient at parameter row " +
                                 std::to_string(row));
    double* p = table.row(row);
    if (cfg_.kind == OptimizerKind::Sgd) {
      for (std::int64_t c = 0; c < cols_; ++c) p[c] -= cfg_.lr * g[static_cast<std::size_t>(c)];
    } else {
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      double* m = m_.data() + row * cols_;
      double* v = v_.data() + row * cols_;
      for (std::int64_t c = 0; c < cols_; ++c) {
        const double gv = g[static_cast<std::size_t>(c)];
        m[c] = cfg_.beta1 * m[c] + (1.0 - cfg_.beta1) * gv;
        v[c] = cfg_.beta2 * v[c] + (1.0 - cfg_.beta2) * gv * gv;
        const double mhat = m[c] / bc1;
        const double vhat = v[c] / bc2;
        p[c] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }
}

void TrainConfig::validate() const {
  if (n < 1) throw std::invalid_argument("train: box dimension must be >= 1");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (neg_ratio < 0) throw std::invalid_argument("train: neg_ratio must be >= 0");
  if (!(val_threshold > 0.0 && val_threshold < 1.0))
    throw std::invalid_argument("train: val_threshold must be in (0, 1)");
  ops.validate();
  optimizer.validate();
  init.validate();
}

namespace {

// Gather positions of pair endpoints within the sorted unique-id list.
std::vector<std::int64_t> positions_of(const std::vector<std::int64_t>& sorted_ids,
                                       std::span<const LabeledPair> pairs, bool heads) {
  std::vector<std::int64_t> pos;
  pos.reserve(pairs.size());
  for (const auto& p : pairs) {
    const std::int64_t id = heads ? p.head : p.tail;
    const auto it = std::lower_bound(sorted_ids.begin(), sorted_ids.end(), id);
    pos.push_back(it - sorted_ids.begin());
  }
  return pos;
}

std::vector<std::int64_t> unique_ids(std::span<const LabeledPair> pairs) {
  std::vector<std::int64_t> ids;
  ids.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    ids.push_back(p.head);
    ids.push_back(p.tail);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

std::vector<ScoredPair> score_pairs(const RealizedBoxes& boxes,
                                    std::span<const LabeledPair> pairs, const OpsConfig& ops) {
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  constexpr std::size_t kChunk = 1024;
  for (std::size_t start = 0; start < pairs.size(); start += kChunk) {
    const auto chunk = pairs.subspan(start, std::min(kChunk, pairs.size() - start));
    const std::int64_t b = static_cast<std::int64_t>(chunk.size());
    Array hz(Shape{b, boxes.n}), hZ(Shape{b, boxes.n}), tz(Shape{b, boxes.n}), tZ(Shape{b, boxes.n});
    for (std::int64_t i = 0; i < b; ++i) {
      const auto& p = chunk[static_cast<std::size_t>(i)];
      if (p.head < 0 || p.head >= boxes.num_entities || p.tail < 0 ||
          p.tail >= boxes.num_entities)
        throw std::invalid_argument("score_pairs: entity id out of range");
      for (std::int64_t c = 0; c < boxes.n; ++c) {
        hz[i * boxes.n + c] = boxes.z[static_cast<std::size_t>(p.head * boxes.n + c)];
        hZ[i * boxes.n + c] = boxes.Z[static_cast<std::size_t>(p.head * boxes.n + c)];
        tz[i * boxes.n + c] = boxes.z[static_cast<std::size_t>(p.tail * boxes.n + c)];
        tZ[i * boxes.n + c] = boxes.Z[static_cast<std::size_t>(p.tail * boxes.n + c)];
      }
    }
    Tape t;
    Box head = make_box(t.leaf(std::move(hz)), t.leaf(std::move(hZ)));
    Box tail = make_box(t.leaf(std::move(tz)), t.leaf(std::move(tZ)));
    const Array& logp = log_containment_prob(head, tail, ops).value();
    for (std::int64_t i = 0; i < b; ++i)
      out.push_back({logp[i], chunk[static_cast<std::size_t>(i)].label});
  }
  return out;
}

std::vector<ScoredPair> score_pairs(const EmbeddingTable& table,
                                    std::span<const LabeledPair> pairs, const OpsConfig& ops) {
  return score_pairs(realize_all(table), pairs, ops);
}

EmbeddingTable init_for_config(const TrainConfig& config, std::int64_t num_entities) {
  return init_uniform(num_entities, config.n, config.param_kind, config.init,
                      mix_seed(config.seed, kSeedInitTag));
}

TrainResult train(const TrainConfig& config, const HierarchyDataset& dataset) {
  config.validate();
  if (dataset.num_entities < 1)
    throw std::invalid_argument("train: dataset has no entities");
  const auto check_range = [&](std::span<const LabeledPair> pairs) {
    for (const auto& p : pairs)
      if (p.head < 0 || p.head >= dataset.num_entities || p.tail < 0 ||
          p.tail >= dataset.num_entities)
        throw std::invalid_argument("train: pair (" + std::to_string(p.head) + ", " +
                                    std::to_string(p.tail) + ") outside entity range");
  };
  check_range(dataset.train);
  check_range(dataset.validation);
  check_range(dataset.test);

  TrainResult result;
  result.table = init_for_config(config, dataset.num_entities);
  Optimizer opt(config.optimizer, dataset.num_entities, 2 * config.n);

  std::vector<LabeledPair> pairs = dataset.train;
  const auto bsz = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Xoshiro256ss erng(mix_seed(config.seed, kSeedEpochTag + static_cast<std::uint64_t>(epoch)));
    shuffle(pairs, erng);

    double loss_sum = 0.0;
    std::int64_t seen = 0;
    for (std::size_t start = 0; start < pairs.size(); start += bsz) {
      const std::size_t count = std::min(bsz, pairs.size() - start);
      const std::span<const LabeledPair> batch(pairs.data() + start, count);
      const std::vector<std::int64_t> ids = unique_ids(batch);

      Tape tape;
      LookupResult lut = lookup(tape, result.table, ids);
      const auto hpos = positions_of(ids, batch, true);
      const auto tpos = positions_of(ids, batch, false);
      Box heads = make_box(index_select(lut.box.z, 0, hpos), index_select(lut.box.Z, 0, hpos));
      Box tails = make_box(index_select(lut.box.z, 0, tpos), index_select(lut.box.Z, 0, tpos));

      Var logp = log_containment_prob(heads, tails, config.ops);
      std::vector<int> labels(count);
      for (std::size_t i = 0; i < count; ++i) labels[i] = batch[i].label;
      Var loss = bce_mean(logp, labels);
      if (config.regularizer.kind != RegularizerKind::None && config.regularizer.weight != 0.0)
        loss = add(loss, regularize(config.regularizer, lut.box, config.ops));

      const double lv = loss.item();
      if (!std::isfinite(lv))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch starting at pair " + std::to_string(start) +
                                 " (batch size " + std::to_string(count) + ")");
      tape.backward(loss);
      opt.step(result.table, accumulate_sparse_grad(lut.ids, lut.theta.grad()));

      loss_sum += lv * static_cast<double>(count);
      seen += static_cast<std::int64_t>(count);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    if (!dataset.validation.empty()) {
      const auto scored = score_pairs(result.table, dataset.validation, config.ops);
      const auto cm = f1_score(scored, config.val_threshold);
      m.val_f1 = cm.f1;
      m.val_precision = cm.precision;
      m.val_recall = cm.recall;
    }
    result.history.push_back(m);
  }
  return result;
}

ToyDemoResult run_toy_demo(int epochs, double lr, double volume_temperature,
                           double intersection_beta) {
  if (epochs < 0) throw std::invalid_argument("toy demo: epochs must be >= 0");
  constexpr std::int64_t kDim = 15;
  OpsConfig ops;
  ops.intersection = IntersectionKind::Gumbel;
  ops.beta = intersection_beta;
  ops.volume = VolumeKind::Soft;
  ops.temperature = volume_temperature;
  ops.validate();

  // Box X = [-2, 0]^15; box Y_i = [1/i, 1 + 1/(16 - i)], disjoint from X.
  std::vector<double> theta_x(2 * kDim), theta_y(2 * kDim);
  for (std::int64_t i = 0; i < kDim; ++i) {
    theta_x[static_cast<std::size_t>(i)] = -2.0;
    theta_x[static_cast<std::size_t>(kDim + i)] = 0.0;
    theta_y[static_cast<std::size_t>(i)] = 1.0 / static_cast<double>(i + 1);
    theta_y[static_cast<std::size_t>(kDim + i)] = 1.0 + 1.0 / static_cast<double>(kDim - i);
  }

  ToyDemoResult res;
  const auto split_coords = [&](const std::vector<double>& th, std::vector<double>& z,
                                std::vector<double>& Z) {
    z.assign(th.begin(), th.begin() + kDim);
    Z.assign(th.begin() + kDim, th.end());
  };
  split_coords(theta_x, res.x_z_before, res.x_Z_before);
  split_coords(theta_y, res.y_z_before, res.y_Z_before);

  const auto eval_step = [&](bool do_step) {
    Tape t;
    Var tx = t.leaf(Array(Shape{2 * kDim}, theta_x), true);
    Var ty = t.leaf(Array(Shape{2 * kDim}, theta_y), true);
    Var loss = toy_containment_loss(tx, ty, ParamKind::Raw, ops);
    const double lv = loss.item();
    if (do_step) {
      t.backward(loss);
      for (std::int64_t c = 0; c < 2 * kDim; ++c) {
        theta_x[static_cast<std::size_t>(c)] -= lr * tx.grad()[c];
        theta_y[static_cast<std::size_t>(c)] -= lr * ty.grad()[c];
      }
    }
    return lv;
  };

  for (int e = 0; e < epochs; ++e) res.loss.push_back(eval_step(true));
  res.loss.push_back(eval_step(false));
  res.final_logp = -res.loss.back();

  split_coords(theta_x, res.x_z_after, res.x_Z_after);
  split_coords(theta_y, res.y_z_after, res.y_Z_after);
  return res;
}

}  // namespace boxemb
