#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "agglomg/common.hpp"
#include "agglomg/topology.hpp"

namespace agglomg {

/// Graph with positive integer vertex and edge weights (symmetric adjacency).
struct WeightedGraph {
  Csr adjacency;
  std::vector<std::int64_t> edge_weight;  // aligned with adjacency values
  std::vector<std::int64_t> vertex_weight;

  Index num_vertices() const { return adjacency.size(); }
  std::int64_t total_vertex_weight() const;
  std::int64_t max_vertex_weight() const;
};

struct Partition {
  std::vector<Index> part;
  Index k = 0;
};

/// Integer weights max(1, round(1000 w / w_max)), vertex and edge weights
/// scaled independently.
WeightedGraph scale_weights(const DualGraph& dual);

/// Sum of weights of edges whose endpoints lie in different parts.
std::int64_t edge_cut(const WeightedGraph& graph, const Partition& partition);
std::int64_t edge_cut(const WeightedGraph& graph, std::span<const Index> part);

/// Largest admissible part weight for a part with the given target weight:
/// 5% above target, or one heaviest vertex above target when that is larger.
std::int64_t max_part_weight(const WeightedGraph& graph, double target, double imbalance = 0.05);

/// Multilevel k-way partition: heavy-edge matching, region growing (k > 8) or
/// recursive bisection (k <= 8), greedy boundary refinement and an optional
/// contiguity pass.  Always returns exactly k nonempty parts.
Partition partition_kway(const WeightedGraph& graph, Index k, bool contiguous,
                         std::uint64_t seed = 0);

/// One run of boundary refinement: moves that strictly reduce the cut (or keep
/// it and relieve an overweight part) subject to the part weight caps.
/// Returns the cut after refinement; never larger than before.
std::int64_t refine_partition(const WeightedGraph& graph, std::vector<Index>& part, Index k,
                              std::span<const std::int64_t> max_weight, int passes);

/// Reassigns every disconnected fragment of a part to the adjacent part with
/// which it shares the largest edge weight.  Returns number of fragments moved.
Index enforce_contiguity(const WeightedGraph& graph, std::vector<Index>& part, Index k);

/// Subgraph induced by `vertices` (renumbered in the given order).
WeightedGraph induced_subgraph(const WeightedGraph& graph, std::span<const Index> vertices);

bool is_connected(const WeightedGraph& graph);

}  // namespace agglomg
