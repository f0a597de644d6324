#pragma once

#include <iosfwd>
#include <map>

#include "boxemb/box.hpp"

namespace boxemb {

// Ranges for uniformly random min coordinates and side lengths.
struct InitSpec {
  double min_lo = 0.0;
  double min_hi = 0.9;
  double side_lo = 0.1;
  double side_hi = 0.5;

  void validate() const;
};

// Learnable theta matrix, one row of 2n parameters per entity, plus the
// parameterization that turns rows into boxes.
struct EmbeddingTable {
  std::int64_t num_entities = 0;
  std::int64_t n = 0;
  ParamKind kind = ParamKind::MinDelta;
  std::vector<double> params;  // row-major (num_entities, 2n)

  std::int64_t row_width() const { return 2 * n; }
  double* row(std::int64_t e) { return params.data() + e * row_width(); }
  const double* row(std::int64_t e) const { return params.data() + e * row_width(); }
};

// Draw min ~ U[min_lo, min_hi]^n and side ~ U[side_lo, side_hi]^n per entity
// (row-major entity order, xoshiro256** stream), then invert the
// parameterization so realize(kind, theta) reproduces (min, min + side).
// Entities whose draw is not invertible under `kind` (e.g. Sigmoid with
// min + side >= 1) are resampled, up to 100 attempts each.
EmbeddingTable init_uniform(std::int64_t num_entities, std::int64_t n, ParamKind kind,
                            const InitSpec& spec, std::uint64_t seed);

// Invert one (min, side) pair into (theta1, theta2) under `kind`; nullopt if
// infeasible. Exposed for tests.
std::optional<std::pair<double, double>> invert_param(ParamKind kind, double min, double side);

// Gathered rows realized as boxes. `theta` is the differentiable leaf holding
// the gathered rows; after backward, theta.grad() holds one gradient row per
// looked-up index.
struct LookupResult {
  Var theta;
  Box box;
  std::vector<std::int64_t> ids;
};

LookupResult lookup(Tape& tape, const EmbeddingTable& table,
                    std::span<const std::int64_t> ids);

// index -> summed gradient row. Duplicate indices are summed; rows that were
// not looked up are absent.
using SparseGrad = std::map<std::int64_t, std::vector<double>>;

SparseGrad accumulate_sparse_grad(std::span<const std::int64_t> indices, const Array& row_grads);

// TSV dump of realized coordinates: entity<TAB>z_1..z_n<TAB>Z_1..Z_n with
// space-separated coordinates inside each field, shortest round-trip floats.
void dump_boxes_tsv(const EmbeddingTable& table, std::ostream& os);

// Realized coordinates read back from a dump: (z rows, Z rows), each
// (num_entities x n) row-major.
struct RealizedBoxes {
  std::int64_t num_entities = 0;
  std::int64_t n = 0;
  std::vector<double> z, Z;
};
RealizedBoxes load_boxes_tsv(std::istream& is);

// Realize every row of the table (no tape needed downstream of dump paths).
RealizedBoxes realize_all(const EmbeddingTable& table);

}  // namespace boxemb
