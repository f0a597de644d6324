#include "boxemb/embedding.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "boxemb/rng.hpp"

namespace boxemb {

void InitSpec::validate() const {
  if (min_lo > min_hi)
    throw std::invalid_argument("init: min_lo must be <= min_hi");
  if (!(side_lo > 0.0) || side_lo > side_hi)
    throw std::invalid_argument("init: need 0 < side_lo <= side_hi");
}

std::optional<std::pair<double, double>> invert_param(ParamKind kind, double min, double side) {
  switch (kind) {
    case ParamKind::Raw:
      return std::make_pair(min, min + side);
    case ParamKind::MinDelta: {
      if (!(side > 0.0)) return std::nullopt;
      // softplus^{-1}(s) = log(e^s - 1), large-s branch avoids overflow
      const double th2 = side > 30.0 ? side : std::log(std::expm1(side));
      return std::make_pair(min, th2);
    }
    case ParamKind::Sigmoid: {
      if (!(min > 0.0 && min < 1.0)) return std::nullopt;
      const double f = side / (1.0 - min);
      if (!(f > 0.0 && f < 1.0)) return std::nullopt;
      const auto logit = [](double p) { return std::log(p / (1.0 - p)); };
      return std::make_pair(logit(min), logit(f));
    }
    case ParamKind::Tanh: {
      if (!(min > 0.0 && min < 1.0)) return std::nullopt;
      const double a = 2.0 * min - 1.0;
      const double b = 2.0 * side / (1.0 - min);
      if (!(a > -1.0 && a < 1.0 && b > -1.0 && b < 1.0)) return std::nullopt;
      return std::make_pair(std::atanh(a), std::atanh(b));
    }
  }
  return std::nullopt;
}

EmbeddingTable init_uniform(std::int64_t num_entities, std::int64_t n, ParamKind kind,
                            const InitSpec& spec, std::uint64_t seed) {
  if (num_entities < 1) throw std::invalid_argument("init: num_entities must be >= 1");
  if (n < 1) throw std::invalid_argument("init: box dimension must be >= 1");
  spec.validate();

  EmbeddingTable table;
  table.num_entities = num_entities;
  table.n = n;
  table.kind = kind;
  table.params.assign(static_cast<std::size_t>(num_entities * 2 * n), 0.0);

  Xoshiro256ss rng(seed);
  std::vector<double> mins(static_cast<std::size_t>(n)), sides(static_cast<std::size_t>(n));
  for (std::int64_t e = 0; e < num_entities; ++e) {
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      for (std::int64_t i = 0; i < n; ++i) mins[static_cast<std::size_t>(i)] = rng.uniform(spec.min_lo, spec.min_hi);
      for (std::int64_t i = 0; i < n; ++i) sides[static_cast<std::size_t>(i)] = rng.uniform(spec.side_lo, spec.side_hi);
      ok = true;
      double* r = table.row(e);
      for (std::int64_t i = 0; i < n; ++i) {
        const auto th = invert_param(kind, mins[static_cast<std::size_t>(i)], sides[static_cast<std::size_t>(i)]);
        if (!th) {
          ok = false;
          break;
        }
        r[i] = th->first;
        r[n + i] = th->second;
      }
    }
    if (!ok)
      throw std::runtime_error("init: entity " + std::to_string(e) +
                               ": (min, side) ranges not invertible under " +
                               std::string(to_string(kind)) + " after 100 attempts");
  }
  return table;
}

LookupResult lookup(Tape& tape, const EmbeddingTable& table,
                    std::span<const std::int64_t> ids) {
  for (auto id : ids)
    if (id < 0 || id >= table.num_entities)
      throw std::invalid_argument("lookup: index " + std::to_string(id) +
                                  " out of range for table of " +
                                  std::to_string(table.num_entities) + " entities");
  const std::int64_t w = table.row_width();
  Array gathered(Shape{static_cast<std::int64_t>(ids.size()), w});
  for (std::size_t j = 0; j < ids.size(); ++j)
    for (std::int64_t c = 0; c < w; ++c)
      gathered[static_cast<std::int64_t>(j) * w + c] = table.row(ids[j])[c];
  Var theta = tape.leaf(std::move(gathered), true);
  Box box = realize(table.kind, theta);
  return LookupResult{theta, box, std::vector<std::int64_t>(ids.begin(), ids.end())};
}

SparseGrad accumulate_sparse_grad(std::span<const std::int64_t> indices, const Array& row_grads) {
  if (row_grads.shape.rank() != 2)
    throw std::invalid_argument("accumulate_sparse_grad: row_grads must be 2-d, got " +
                                row_grads.shape.str());
  if (row_grads.shape[0] != static_cast<std::int64_t>(indices.size()))
    throw std::invalid_argument("accumulate_sparse_grad: " + std::to_string(indices.size()) +
                                " indices vs " + std::to_string(row_grads.shape[0]) +
                                " gradient rows");
  const std::int64_t w = row_grads.shape[1];
  SparseGrad out;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    auto& row = out[indices[j]];
    if (row.empty()) row.assign(static_cast<std::size_t>(w), 0.0);
    for (std::int64_t c = 0; c < w; ++c)
      row[static_cast<std::size_t>(c)] += row_grads[static_cast<std::int64_t>(j) * w + c];
  }
  return out;
}

RealizedBoxes realize_all(const EmbeddingTable& table) {
  Tape t;
  std::vector<std::int64_t> all(static_cast<std::size_t>(table.num_entities));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int64_t>(i);
  LookupResult lr = lookup(t, table, all);
  RealizedBoxes out;
  out.num_entities = table.num_entities;
  out.n = table.n;
  out.z = lr.box.z.value().data;
  out.Z = lr.box.Z.value().data;
  return out;
}

static void append_double(std::string& s, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, res.ptr);
}

void dump_boxes_tsv(const EmbeddingTable& table, std::ostream& os) {
  const RealizedBoxes rb = realize_all(table);
  std::string line;
  for (std::int64_t e = 0; e < rb.num_entities; ++e) {
    line.clear();
    line += std::to_string(e);
    line += '\t';
    for (std::int64_t i = 0; i < rb.n; ++i) {
      if (i) line += ' ';
      append_double(line, rb.z[static_cast<std::size_t>(e * rb.n + i)]);
    }
    line += '\t';
    for (std::int64_t i = 0; i < rb.n; ++i) {
      if (i) line += ' ';
      append_double(line, rb.Z[static_cast<std::size_t>(e * rb.n + i)]);
    }
    line += '\n';
    os << line;
  }
}

static std::vector<double> parse_coords(const std::string& field, int line_no) {
  std::vector<double> out;
  std::istringstream is(field);
  double v;
  while (is >> v) out.push_back(v);
  if (out.empty())
    throw std::runtime_error("boxes tsv: no coordinates on line " + std::to_string(line_no));
  return out;
}

RealizedBoxes load_boxes_tsv(std::istream& is) {
  RealizedBoxes rb;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw std::runtime_error("boxes tsv: expected 3 tab-separated fields on line " +
                               std::to_string(line_no));
    const std::int64_t id = std::stoll(line.substr(0, t1));
    if (id != rb.num_entities)
      throw std::runtime_error("boxes tsv: non-contiguous entity id " + std::to_string(id) +
                               " on line " + std::to_string(line_no));
    const auto z = parse_coords(line.substr(t1 + 1, t2 - t1 - 1), line_no);
    const auto Z = parse_coords(line.substr(t2 + 1), line_no);
    if (rb.num_entities == 0) rb.n = static_cast<std::int64_t>(z.size());
    if (static_cast<std::int64_t>(z.size()) != rb.n ||
        static_cast<std::int64_t>(Z.size()) != rb.n)
      throw std::runtime_error("boxes tsv: inconsistent dimension on line " +
                               std::to_string(line_no));
    rb.z.insert(rb.z.end(), z.begin(), z.end());
    rb.Z.insert(rb.Z.end(), Z.begin(), Z.end());
    ++rb.num_entities;
  }
  return rb;
}

}  // namespace boxemb
