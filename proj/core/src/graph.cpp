#include "boxemb/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "boxemb/rng.hpp"
#include "boxemb/training.hpp"

namespace boxemb {

std::int64_t Hierarchy::add_node(const std::string& name) {
  const auto it = vocab.find(name);
  if (it != vocab.end()) return it->second;
  const std::int64_t id = num_entities();
  vocab.emplace(name, id);
  names.push_back(name);
  return id;
}

Hierarchy load_edges(std::istream& is) {
  Hierarchy h;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos)
      throw std::runtime_error("edge list: malformed line " + std::to_string(line_no) +
                               " (want head<TAB>tail)");
    const std::int64_t u = h.add_node(line.substr(0, tab));
    const std::int64_t v = h.add_node(line.substr(tab + 1));
    h.edges.emplace(u, v);
  }
  return h;
}

Hierarchy load_edges_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open edge list: " + path);
  return load_edges(is);
}

void write_edges(const Hierarchy& h, std::ostream& os) {
  for (const auto& [u, v] : h.edges)
    os << h.names[static_cast<std::size_t>(u)] << '\t' << h.names[static_cast<std::size_t>(v)]
       << '\n';
}

namespace {

std::vector<std::vector<std::int64_t>> adjacency(const Hierarchy& h) {
  std::vector<std::vector<std::int64_t>> adj(static_cast<std::size_t>(h.num_entities()));
  for (const auto& [u, v] : h.edges) adj[static_cast<std::size_t>(u)].push_back(v);
  return adj;
}

void require_dag(const Hierarchy& h, const std::vector<std::vector<std::int64_t>>& adj) {
  // iterative three-color DFS
  const std::int64_t n = h.num_entities();
  std::vector<char> color(static_cast<std::size_t>(n), 0);
  std::vector<std::pair<std::int64_t, std::size_t>> stack;
  for (std::int64_t s = 0; s < n; ++s) {
    if (color[static_cast<std::size_t>(s)]) continue;
    stack.push_back({s, 0});
    color[static_cast<std::size_t>(s)] = 1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < adj[static_cast<std::size_t>(u)].size()) {
        const std::int64_t v = adj[static_cast<std::size_t>(u)][next++];
        if (color[static_cast<std::size_t>(v)] == 1)
          throw std::runtime_error("hierarchy contains a cycle through node '" +
                                   h.names[static_cast<std::size_t>(v)] + "'");
        if (color[static_cast<std::size_t>(v)] == 0) {
          color[static_cast<std::size_t>(v)] = 1;
          stack.push_back({v, 0});
        }
      } else {
        color[static_cast<std::size_t>(u)] = 2;
        stack.pop_back();
      }
    }
  }
}

// Descendant sets via per-node DFS; fine at desk scale.
std::vector<std::vector<char>> descendants(const Hierarchy& h,
                                           const std::vector<std::vector<std::int64_t>>& adj) {
  const std::int64_t n = h.num_entities();
  std::vector<std::vector<char>> desc(static_cast<std::size_t>(n));
  std::vector<std::int64_t> stack;
  for (std::int64_t s = 0; s < n; ++s) {
    auto& seen = desc[static_cast<std::size_t>(s)];
    seen.assign(static_cast<std::size_t>(n), 0);
    stack.assign(adj[static_cast<std::size_t>(s)].begin(), adj[static_cast<std::size_t>(s)].end());
    while (!stack.empty()) {
      const std::int64_t u = stack.back();
      stack.pop_back();
      if (seen[static_cast<std::size_t>(u)]) continue;
      seen[static_cast<std::size_t>(u)] = 1;
      for (const std::int64_t v : adj[static_cast<std::size_t>(u)]) stack.push_back(v);
    }
  }
  return desc;
}

}  // namespace

EdgeSet transitive_closure(const Hierarchy& h) {
  const auto adj = adjacency(h);
  require_dag(h, adj);
  const auto desc = descendants(h, adj);
  EdgeSet out;
  for (std::int64_t u = 0; u < h.num_entities(); ++u)
    for (std::int64_t v = 0; v < h.num_entities(); ++v)
      if (desc[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]) out.emplace(u, v);
  return out;
}

EdgeSet transitive_reduction(const Hierarchy& h) {
  const auto adj = adjacency(h);
  require_dag(h, adj);
  const auto desc = descendants(h, adj);
  EdgeSet out;
  for (const auto& [u, v] : h.edges) {
    bool redundant = false;
    for (const std::int64_t w : adj[static_cast<std::size_t>(u)]) {
      if (w == v) continue;
      if (desc[static_cast<std::size_t>(w)][static_cast<std::size_t>(v)]) {
        redundant = true;
        break;
      }
    }
    if (!redundant) out.emplace(u, v);
  }
  return out;
}

HierarchyDataset make_split(const Hierarchy& h, int closure_pct, int neg_ratio,
                            std::uint64_t seed) {
  if (closure_pct < 0 || closure_pct > 100)
    throw std::invalid_argument("make_split: closure_pct must be in [0, 100]");
  if (neg_ratio < 0) throw std::invalid_argument("make_split: neg_ratio must be >= 0");
  const EdgeSet closure = transitive_closure(h);
  const EdgeSet reduction = transitive_reduction(h);

  std::vector<Edge> extra;
  for (const Edge& e : closure)
    if (!reduction.count(e)) extra.push_back(e);
  if (closure_pct > 0 && extra.empty())
    throw std::invalid_argument(
        "make_split: closure equals reduction, no extra edges to sample from");

  Xoshiro256ss rng(mix_seed(seed, 0));
  shuffle(extra, rng);
  const auto k = static_cast<std::size_t>(
      std::llround(static_cast<double>(closure_pct) / 100.0 * static_cast<double>(extra.size())));
  std::vector<Edge> train_pos(reduction.begin(), reduction.end());
  train_pos.insert(train_pos.end(), extra.begin(), extra.begin() + static_cast<std::ptrdiff_t>(k));

  std::vector<Edge> held(extra.begin() + static_cast<std::ptrdiff_t>(k), extra.end());
  if (held.empty() && !extra.empty())
    throw std::invalid_argument("make_split: closure_pct " + std::to_string(closure_pct) +
                                " consumes every extra closure edge, nothing left to test");
  const std::size_t half = held.size() / 2;
  std::vector<Edge> val_pos(held.begin(), held.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<Edge> test_pos(held.begin() + static_cast<std::ptrdiff_t>(half), held.end());

  HierarchyDataset ds;
  ds.num_entities = h.num_entities();
  ds.train = sample_negatives(train_pos, ds.num_entities, neg_ratio, mix_seed(seed, 1), &closure);
  ds.validation =
      sample_negatives(val_pos, ds.num_entities, neg_ratio, mix_seed(seed, 2), &closure);
  ds.test = sample_negatives(test_pos, ds.num_entities, neg_ratio, mix_seed(seed, 3), &closure);
  return ds;
}

Hierarchy gen_tree(std::int64_t branching, int depth) {
  if (branching < 1) throw std::invalid_argument("gen_tree: branching must be >= 1");
  if (depth < 0) throw std::invalid_argument("gen_tree: depth must be >= 0");
  Hierarchy h;
  h.add_node("n0");
  std::vector<std::int64_t> frontier{0};
  for (int d = 0; d < depth; ++d) {
    std::vector<std::int64_t> next;
    for (const std::int64_t parent : frontier)
      for (std::int64_t c = 0; c < branching; ++c) {
        const std::int64_t id = h.add_node("n" + std::to_string(h.num_entities()));
        h.edges.emplace(parent, id);
        next.push_back(id);
      }
    frontier = std::move(next);
  }
  return h;
}

ClassificationMetrics f1_score(std::span<const ScoredPair> scored, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("f1_score: threshold must be in (0, 1)");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& s : scored) {
    const bool pred = std::exp(s.logp) >= threshold;
    if (pred && s.label == 1)
      ++tp;
    else if (pred && s.label == 0)
      ++fp;
    else if (!pred && s.label == 1)
      ++fn;
  }
  ClassificationMetrics m;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
  return m;
}

void write_split(const HierarchyDataset& ds, std::ostream& os) {
  const auto dump = [&](const std::vector<LabeledPair>& pairs, const char* name) {
    for (const auto& p : pairs)
      os << p.head << '\t' << p.tail << '\t' << p.label << '\t' << name << '\n';
  };
  dump(ds.train, "train");
  dump(ds.validation, "validation");
  dump(ds.test, "test");
}

HierarchyDataset load_split(std::istream& is) {
  HierarchyDataset ds;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    LabeledPair p;
    std::string split;
    std::istringstream ls(line);
    if (!(ls >> p.head >> p.tail >> p.label >> split))
      throw std::runtime_error("split tsv: malformed line " + std::to_string(line_no));
    ds.num_entities = std::max({ds.num_entities, p.head + 1, p.tail + 1});
    if (split == "train")
      ds.train.push_back(p);
    else if (split == "validation")
      ds.validation.push_back(p);
    else if (split == "test")
      ds.test.push_back(p);
    else
      throw std::runtime_error("split tsv: unknown split '" + split + "' on line " +
                               std::to_string(line_no));
  }
  return ds;
}

void write_vocab(const Hierarchy& h, std::ostream& os) {
  for (std::int64_t i = 0; i < h.num_entities(); ++i)
    os << i << '\t' << h.names[static_cast<std::size_t>(i)] << '\n';
}

}  // namespace boxemb
