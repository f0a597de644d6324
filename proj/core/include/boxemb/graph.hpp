#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace boxemb {

using Edge = std::pair<std::int64_t, std::int64_t>;  // head -> tail
using EdgeSet = std::set<Edge>;

// Directed hierarchy: head is the broader concept, tail the more specific
// one, so training pushes box_tail inside box_head.
struct Hierarchy {
  std::vector<std::string> names;  // dense id -> name, first-appearance order
  std::unordered_map<std::string, std::int64_t> vocab;
  EdgeSet edges;

  std::int64_t num_entities() const { return static_cast<std::int64_t>(names.size()); }
  std::int64_t add_node(const std::string& name);
};

struct LabeledPair {
  std::int64_t head = 0;
  std::int64_t tail = 0;
  int label = 0;  // 1 = edge exists
};

struct HierarchyDataset {
  std::int64_t num_entities = 0;
  std::vector<LabeledPair> train, validation, test;
};

// Parse `head<TAB>tail` lines; '#'-prefixed and blank lines are skipped,
// duplicate edges collapse. Malformed lines are rejected with their number.
Hierarchy load_edges(std::istream& is);
Hierarchy load_edges_file(const std::string& path);
void write_edges(const Hierarchy& h, std::ostream& os);

// All (u, w) with a directed path of length >= 1. Rejects cycles.
EdgeSet transitive_closure(const Hierarchy& h);

// Minimal edge subset with the same closure: (u, v) kept iff no alternative
// path u -> v of length >= 2. Rejects cycles.
EdgeSet transitive_reduction(const Hierarchy& h);

// Train positives = reduction plus a seeded closure_pct% sample of
// closure \ reduction; the remaining extra closure edges split 50/50 into
// validation/test positives. Negatives are sampled per split at neg_ratio,
// never colliding with any closure edge.
HierarchyDataset make_split(const Hierarchy& h, int closure_pct, int neg_ratio,
                            std::uint64_t seed);

// Rooted balanced tree with edges parent -> child; (b^{d+1}-1)/(b-1) nodes
// named n0, n1, ... in breadth-first order.
Hierarchy gen_tree(std::int64_t branching, int depth);

struct ScoredPair {
  double logp = 0.0;
  int label = 0;
};

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Predict positive iff exp(logp) >= threshold; P or R with an empty
// denominator is 0, as is F1 when P + R = 0.
ClassificationMetrics f1_score(std::span<const ScoredPair> scored, double threshold);

// Split dump: head_id<TAB>tail_id<TAB>label<TAB>split.
void write_split(const HierarchyDataset& ds, std::ostream& os);
HierarchyDataset load_split(std::istream& is);

void write_vocab(const Hierarchy& h, std::ostream& os);

}  // namespace boxemb
