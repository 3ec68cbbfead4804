#include "doctest.h"

#include <set>

#include "agglomg/partitioner.hpp"
#include "agglomg/topology.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace agglomg;

namespace {

WeightedGraph path_graph(Index n) {
  WeightedGraph g;
  std::vector<std::pair<Index, Index>> pairs;
  for (Index v = 0; v + 1 < n; ++v) {
    pairs.emplace_back(v, v + 1);
    pairs.emplace_back(v + 1, v);
  }
  g.adjacency = Csr::from_pairs(n, pairs);
  g.edge_weight.assign(g.adjacency.values().size(), 1);
  g.vertex_weight.assign(static_cast<std::size_t>(n), 1);
  return g;
}

}  // namespace

TEST_CASE("weight scaling maps the maximum to 1000 and keeps positives") {
  const Topology t = build_topology(testing::square(6, 0.2, 1));
  const WeightedGraph g = scale_weights(t.dual);
  CHECK(g.max_vertex_weight() == 1000);
  for (auto w : g.vertex_weight) CHECK(w >= 1);
  std::int64_t emax = 0;
  for (auto w : g.edge_weight) {
    CHECK(w >= 1);
    emax = std::max(emax, w);
  }
  CHECK(emax == 1000);
}

TEST_CASE("edge cut of a path") {
  const WeightedGraph g = path_graph(6);
  const std::vector<Index> part{0, 0, 1, 1, 0, 0};
  CHECK(edge_cut(g, part) == 2);
  const std::vector<Index> one(6, 0);
  CHECK(edge_cut(g, one) == 0);
}

TEST_CASE("bisection of a path cuts one edge") {
  const WeightedGraph g = path_graph(10);
  const Partition p = partition_kway(g, 2, true, 3);
  CHECK(p.k == 2);
  CHECK(edge_cut(g, p) == 1);
  CHECK(testing::brute_force_bisection(g, max_part_weight(g, 5.0)) == 1);
}

TEST_CASE("k-way partition: k nonempty parts within the weight cap") {
  const Topology t = build_topology(testing::square(24, 0.2, 2));
  const WeightedGraph g = scale_weights(t.dual);
  for (Index k : {2, 5, 8, 9, 48}) {
    const Partition p = partition_kway(g, k, true, 11);
    REQUIRE(p.part.size() == static_cast<std::size_t>(g.num_vertices()));
    std::vector<std::int64_t> weight(static_cast<std::size_t>(k), 0);
    for (Index v = 0; v < g.num_vertices(); ++v) {
      REQUIRE(p.part[v] >= 0);
      REQUIRE(p.part[v] < k);
      weight[p.part[v]] += g.vertex_weight[v];
    }
    for (auto w : weight) CHECK(w > 0);
    for (Index q = 0; q < k; ++q) {
      std::vector<Index> members;
      for (Index v = 0; v < g.num_vertices(); ++v) {
        if (p.part[v] == q) members.push_back(v);
      }
      CHECK(is_connected(induced_subgraph(g, members)));
    }
  }
}

TEST_CASE("partition is deterministic per seed") {
  const Topology t = build_topology(testing::square(16, 0.2, 2));
  const WeightedGraph g = scale_weights(t.dual);
  CHECK(partition_kway(g, 7, true, 4).part == partition_kway(g, 7, true, 4).part);
}

TEST_CASE("refinement never increases the cut") {
  const Topology t = build_topology(testing::square(12, 0.2, 9));
  const WeightedGraph g = scale_weights(t.dual);
  CounterRng rng(42);
  std::vector<Index> part(static_cast<std::size_t>(g.num_vertices()));
  for (auto& p : part) p = static_cast<Index>(rng.below(3));
  const std::int64_t before = edge_cut(g, part);
  const std::int64_t cap = g.total_vertex_weight();
  const std::vector<std::int64_t> caps(3, cap);
  const std::int64_t after = refine_partition(g, part, 3, caps, 4);
  CHECK(after <= before);
  CHECK(after == edge_cut(g, part));
}

TEST_CASE("contiguity pass reattaches fragments") {
  const WeightedGraph g = path_graph(6);
  std::vector<Index> part{0, 0, 1, 1, 0, 1};
  CHECK(enforce_contiguity(g, part, 2) >= 1);
  std::set<Index> seen;
  for (Index q = 0; q < 2; ++q) {
    std::vector<Index> members;
    for (Index v = 0; v < 6; ++v) {
      if (part[v] == q) members.push_back(v);
    }
    if (!members.empty()) CHECK(is_connected(induced_subgraph(g, members)));
  }
}

TEST_CASE("bisection within twice the exhaustive optimum on small patches") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Topology t = build_topology(testing::square(8, 0.2, seed));
    const WeightedGraph g = scale_weights(t.dual);
    CounterRng rng(seed, 7);
    const auto patch = testing::bfs_patch(g, 12, rng);
    const WeightedGraph sub = induced_subgraph(g, patch);
    REQUIRE(is_connected(sub));
    const std::int64_t cap = max_part_weight(sub, sub.total_vertex_weight() / 2.0);
    const Partition p = partition_kway(sub, 2, false, seed);
    const std::int64_t opt = testing::brute_force_bisection(sub, cap);
    CHECK(edge_cut(sub, p) <= 2 * opt);
  }
}
