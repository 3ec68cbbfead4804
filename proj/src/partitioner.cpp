#include "agglomg/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "agglomg/rng.hpp"

namespace agglomg {

std::int64_t WeightedGraph::total_vertex_weight() const {
  return std::accumulate(vertex_weight.begin(), vertex_weight.end(), std::int64_t{0});
}

std::int64_t WeightedGraph::max_vertex_weight() const {
  return vertex_weight.empty() ? 0 : *std::max_element(vertex_weight.begin(), vertex_weight.end());
}

WeightedGraph scale_weights(const DualGraph& dual) {
  auto scale = [](const std::vector<double>& w) {
    std::vector<std::int64_t> out(w.size(), 1);
    const double wmax = w.empty() ? 0.0 : *std::max_element(w.begin(), w.end());
    if (wmax <= 0.0) return out;
    for (std::size_t i = 0; i < w.size(); ++i) {
      out[i] = std::max<std::int64_t>(1, std::llround(1000.0 * w[i] / wmax));
    }
    return out;
  };
  WeightedGraph g;
  g.adjacency = dual.adjacency;
  g.vertex_weight = scale(dual.vertex_weight);
  g.edge_weight = scale(dual.edge_weight);
  return g;
}

std::int64_t edge_cut(const WeightedGraph& graph, std::span<const Index> part) {
  std::int64_t cut = 0;
  const auto& off = graph.adjacency.offsets();
  const auto& adj = graph.adjacency.values();
  for (Index v = 0; v < graph.num_vertices(); ++v) {
    for (Index i = off[v]; i < off[v + 1]; ++i) {
      if (adj[i] > v && part[adj[i]] != part[v]) cut += graph.edge_weight[i];
    }
  }
  return cut;
}

std::int64_t edge_cut(const WeightedGraph& graph, const Partition& partition) {
  return edge_cut(graph, partition.part);
}

std::int64_t max_part_weight(const WeightedGraph& graph, double target, double imbalance) {
  const auto by_ratio = static_cast<std::int64_t>(std::floor((1.0 + imbalance) * target));
  const auto by_vertex = static_cast<std::int64_t>(std::ceil(target)) + graph.max_vertex_weight();
  return std::max(by_ratio, by_vertex);
}

WeightedGraph induced_subgraph(const WeightedGraph& graph, std::span<const Index> vertices) {
  std::vector<Index> local(static_cast<std::size_t>(graph.num_vertices()), -1);
  for (std::size_t i = 0; i < vertices.size(); ++i) local[vertices[i]] = static_cast<Index>(i);
  WeightedGraph sub;
  const auto& off = graph.adjacency.offsets();
  const auto& adj = graph.adjacency.values();
  std::vector<Index> row;
  for (Index v : vertices) {
    row.clear();
    for (Index i = off[v]; i < off[v + 1]; ++i) {
      if (local[adj[i]] >= 0) {
        row.push_back(local[adj[i]]);
        sub.edge_weight.push_back(graph.edge_weight[i]);
      }
    }
    sub.adjacency.push_row(row);
    sub.vertex_weight.push_back(graph.vertex_weight[v]);
  }
  return sub;
}

bool is_connected(const WeightedGraph& graph) {
  const Index n = graph.num_vertices();
  if (n == 0) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<Index> stack{0};
  seen[0] = 1;
  Index count = 1;
  while (!stack.empty()) {
    const Index v = stack.back();
    stack.pop_back();
    for (Index u : graph.adjacency[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count == n;
}

namespace {

struct CoarseLevel {
  WeightedGraph graph;
  std::vector<Index> map;  // finer vertex -> vertex of `graph`
};

// Heavy-edge matching: random visit order, heaviest edge first, lowest id on ties.
CoarseLevel coarsen_once(const WeightedGraph& g, std::int64_t max_vwgt, CounterRng& rng) {
  const Index n = g.num_vertices();
  const auto& off = g.adjacency.offsets();
  const auto& adj = g.adjacency.values();
  std::vector<Index> match(static_cast<std::size_t>(n), -1);
  for (Index v : rng.permutation(n)) {
    if (match[v] >= 0) continue;
    Index best = -1;
    std::int64_t best_w = -1;
    for (Index i = off[v]; i < off[v + 1]; ++i) {
      const Index u = adj[i];
      if (match[u] >= 0 || u == v) continue;
      if (g.vertex_weight[v] + g.vertex_weight[u] > max_vwgt) continue;
      const std::int64_t w = g.edge_weight[i];
      if (w > best_w || (w == best_w && u < best)) {
        best = u;
        best_w = w;
      }
    }
    if (best >= 0) {
      match[v] = best;
      match[best] = v;
    } else {
      match[v] = v;
    }
  }

  CoarseLevel out;
  out.map.assign(static_cast<std::size_t>(n), -1);
  Index nc = 0;
  for (Index v = 0; v < n; ++v) {
    if (out.map[v] >= 0) continue;
    out.map[v] = nc;
    out.map[match[v]] = nc;
    ++nc;
  }
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(nc));
  for (Index v = 0; v < n; ++v) members[out.map[v]].push_back(v);

  std::vector<std::int64_t> acc(static_cast<std::size_t>(nc), 0);
  std::vector<Index> touched;
  std::vector<Index> row;
  out.graph.vertex_weight.assign(static_cast<std::size_t>(nc), 0);
  for (Index c = 0; c < nc; ++c) {
    touched.clear();
    for (Index v : members[c]) {
      out.graph.vertex_weight[c] += g.vertex_weight[v];
      for (Index i = off[v]; i < off[v + 1]; ++i) {
        const Index cu = out.map[adj[i]];
        if (cu == c) continue;
        if (acc[cu] == 0) touched.push_back(cu);
        acc[cu] += g.edge_weight[i];
      }
    }
    std::sort(touched.begin(), touched.end());
    row.assign(touched.begin(), touched.end());
    for (Index cu : touched) {
      out.graph.edge_weight.push_back(acc[cu]);
      acc[cu] = 0;
    }
    out.graph.adjacency.push_row(row);
  }
  return out;
}

// Seeds by farthest-point sampling on hop distance, first seed random.
std::vector<Index> spread_seeds(const WeightedGraph& g, Index k, CounterRng& rng) {
  const Index n = g.num_vertices();
  constexpr Index kInf = std::numeric_limits<Index>::max();
  std::vector<Index> dist(static_cast<std::size_t>(n), kInf);
  std::vector<char> is_seed(static_cast<std::size_t>(n), 0);
  using Entry = std::pair<Index, Index>;  // (dist, -vertex): max dist, then lowest id
  std::priority_queue<Entry> heap;
  for (Index v = 0; v < n; ++v) heap.emplace(kInf, -v);

  std::vector<Index> seeds;
  std::vector<Index> frontier, next;
  auto add_seed = [&](Index s) {
    seeds.push_back(s);
    is_seed[s] = 1;
    dist[s] = 0;
    frontier.assign(1, s);
    Index d = 0;
    while (!frontier.empty()) {
      ++d;
      next.clear();
      for (Index v : frontier) {
        for (Index u : g.adjacency[v]) {
          if (dist[u] > d) {
            dist[u] = d;
            heap.emplace(d, -u);
            next.push_back(u);
          }
        }
      }
      frontier.swap(next);
    }
  };
  add_seed(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  while (static_cast<Index>(seeds.size()) < k) {
    while (true) {
      const auto [d, negv] = heap.top();
      heap.pop();
      const Index v = -negv;
      if (!is_seed[v] && dist[v] == d) {
        add_seed(v);
        break;
      }
    }
  }
  return seeds;
}

// Concurrent region growing: the least-filled part absorbs its next frontier vertex.
std::vector<Index> grow_regions(const WeightedGraph& g, std::span<const double> target,
                                std::span<const Index> seeds) {
  const Index n = g.num_vertices();
  const Index k = static_cast<Index>(target.size());
  std::vector<Index> part(static_cast<std::size_t>(n), -1);
  std::vector<std::int64_t> pw(static_cast<std::size_t>(k), 0);
  std::vector<std::vector<Index>> queue(static_cast<std::size_t>(k));
  std::vector<std::size_t> head(static_cast<std::size_t>(k), 0);
  using Entry = std::pair<double, Index>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  auto absorb = [&](Index p, Index v) {
    part[v] = p;
    pw[p] += g.vertex_weight[v];
    for (Index u : g.adjacency[v]) {
      if (part[u] < 0) queue[p].push_back(u);
    }
  };
  for (Index p = 0; p < k; ++p) {
    absorb(p, seeds[p]);
    heap.emplace(static_cast<double>(pw[p]) / target[p], p);
  }
  while (!heap.empty()) {
    const Index p = heap.top().second;
    heap.pop();
    Index v = -1;
    while (head[p] < queue[p].size()) {
      const Index cand = queue[p][head[p]++];
      if (part[cand] < 0) {
        v = cand;
        break;
      }
    }
    if (v < 0) continue;
    absorb(p, v);
    heap.emplace(static_cast<double>(pw[p]) / target[p], p);
  }
  // Vertices unreachable from every seed (disconnected input).
  for (Index v = 0; v < n; ++v) {
    if (part[v] >= 0) continue;
    Index best = 0;
    for (Index p = 1; p < k; ++p) {
      if (pw[p] / target[p] < pw[best] / target[best]) best = p;
    }
    part[v] = best;
    pw[best] += g.vertex_weight[v];
  }
  return part;
}

struct PartState {
  std::vector<std::int64_t> weight;
  std::vector<Index> count;
};

PartState part_state(const WeightedGraph& g, std::span<const Index> part, Index k) {
  PartState s;
  s.weight.assign(static_cast<std::size_t>(k), 0);
  s.count.assign(static_cast<std::size_t>(k), 0);
  for (Index v = 0; v < g.num_vertices(); ++v) {
    s.weight[part[v]] += g.vertex_weight[v];
    ++s.count[part[v]];
  }
  return s;
}

// Edge weight from v to each adjacent part, gathered into a small list.
struct Connectivity {
  std::vector<std::pair<Index, std::int64_t>> parts;
  std::int64_t to(Index p) const {
    for (const auto& [q, w] : parts) {
      if (q == p) return w;
    }
    return 0;
  }
};

void connectivity(const WeightedGraph& g, std::span<const Index> part, Index v, Connectivity& c) {
  c.parts.clear();
  const auto& off = g.adjacency.offsets();
  const auto& adj = g.adjacency.values();
  for (Index i = off[v]; i < off[v + 1]; ++i) {
    const Index p = part[adj[i]];
    auto it = std::find_if(c.parts.begin(), c.parts.end(), [p](const auto& e) { return e.first == p; });
    if (it == c.parts.end()) {
      c.parts.emplace_back(p, g.edge_weight[i]);
    } else {
      it->second += g.edge_weight[i];
    }
  }
}

// Pushes vertices out of overweight parts, best gain first; may raise the cut.
void rebalance(const WeightedGraph& g, std::vector<Index>& part, Index k,
               std::span<const std::int64_t> max_weight, int passes) {
  PartState s = part_state(g, part, k);
  Connectivity c;
  for (int pass = 0; pass < passes; ++pass) {
    bool over = false;
    for (Index p = 0; p < k; ++p) over = over || s.weight[p] > max_weight[p];
    if (!over) return;
    bool moved = false;
    for (Index v = 0; v < g.num_vertices(); ++v) {
      const Index a = part[v];
      if (s.weight[a] <= max_weight[a] || s.count[a] <= 1) continue;
      connectivity(g, part, v, c);
      const std::int64_t internal = c.to(a);
      Index best = -1;
      std::int64_t best_gain = std::numeric_limits<std::int64_t>::min();
      for (const auto& [b, w] : c.parts) {
        if (b == a || s.weight[b] + g.vertex_weight[v] > max_weight[b]) continue;
        const std::int64_t gain = w - internal;
        if (gain > best_gain || (gain == best_gain && b < best)) {
          best = b;
          best_gain = gain;
        }
      }
      if (best < 0) continue;
      part[v] = best;
      s.weight[a] -= g.vertex_weight[v];
      s.weight[best] += g.vertex_weight[v];
      --s.count[a];
      ++s.count[best];
      moved = true;
    }
    if (!moved) return;
  }
}

std::vector<Index> project(std::span<const Index> coarse_part, std::span<const Index> map) {
  std::vector<Index> fine(map.size());
  for (std::size_t v = 0; v < map.size(); ++v) fine[v] = coarse_part[map[v]];
  return fine;
}

std::vector<std::int64_t> caps(const WeightedGraph& g, std::span<const double> target) {
  std::vector<std::int64_t> out(target.size());
  for (std::size_t p = 0; p < target.size(); ++p) out[p] = max_part_weight(g, target[p]);
  return out;
}

constexpr int kRefinePasses = 8;

// Multilevel partition into target.size() parts with the given target weights.
std::vector<Index> multilevel(const WeightedGraph& graph, std::span<const double> target,
                              CounterRng& rng) {
  const Index k = static_cast<Index>(target.size());
  const Index coarsen_to = std::max<Index>(4 * k, 64);
  const std::int64_t total = graph.total_vertex_weight();
  const std::int64_t max_vwgt =
      std::max<std::int64_t>(graph.max_vertex_weight(), (3 * total) / (2 * coarsen_to));

  std::vector<CoarseLevel> levels;
  const WeightedGraph* current = &graph;
  while (current->num_vertices() > coarsen_to) {
    CoarseLevel next = coarsen_once(*current, max_vwgt, rng);
    if (next.graph.num_vertices() > 0.9 * current->num_vertices()) break;
    levels.push_back(std::move(next));
    current = &levels.back().graph;
  }

  std::vector<Index> part;
  if (k == 2) {
    // Bisection: several growing trials, keep the best refined cut.
    std::int64_t best_cut = std::numeric_limits<std::int64_t>::max();
    const auto cap = caps(*current, target);
    for (int trial = 0; trial < 6; ++trial) {
      std::vector<Index> seeds = spread_seeds(*current, 2, rng);
      std::vector<Index> cand = grow_regions(*current, target, seeds);
      rebalance(*current, cand, k, cap, kRefinePasses);
      const std::int64_t cut = refine_partition(*current, cand, k, cap, kRefinePasses);
      if (cut < best_cut) {
        best_cut = cut;
        part = std::move(cand);
      }
    }
  } else {
    const std::vector<Index> seeds = spread_seeds(*current, k, rng);
    part = grow_regions(*current, target, seeds);
    const auto cap = caps(*current, target);
    rebalance(*current, part, k, cap, kRefinePasses);
    refine_partition(*current, part, k, cap, kRefinePasses);
  }

  for (std::size_t l = levels.size(); l-- > 0;) {
    part = project(part, levels[l].map);
    const WeightedGraph& finer = l == 0 ? graph : levels[l - 1].graph;
    const auto cap = caps(finer, target);
    rebalance(finer, part, k, cap, kRefinePasses);
    refine_partition(finer, part, k, cap, kRefinePasses);
  }
  return part;
}

void recursive_bisection(const WeightedGraph& graph, std::span<const Index> vertices, Index k,
                         Index first_part, std::vector<Index>& out, CounterRng& rng) {
  if (k == 1) {
    for (Index v : vertices) out[v] = first_part;
    return;
  }
  const Index k1 = k / 2;
  const Index k2 = k - k1;
  if (static_cast<Index>(vertices.size()) == k) {
    for (Index i = 0; i < k; ++i) out[vertices[i]] = first_part + i;
    return;
  }
  const WeightedGraph sub = induced_subgraph(graph, vertices);
  const double total = static_cast<double>(sub.total_vertex_weight());
  const std::vector<double> target{total * k1 / k, total * k2 / k};
  std::vector<Index> side = multilevel(sub, target, rng);

  std::vector<Index> left, right;
  for (std::size_t i = 0; i < vertices.size(); ++i) (side[i] == 0 ? left : right).push_back(vertices[i]);
  // Each side must hold at least as many vertices as the parts it will host.
  while (static_cast<Index>(left.size()) < k1) {
    left.push_back(right.back());
    right.pop_back();
  }
  while (static_cast<Index>(right.size()) < k2) {
    right.push_back(left.back());
    left.pop_back();
  }
  recursive_bisection(graph, left, k1, first_part, out, rng);
  recursive_bisection(graph, right, k2, first_part + k1, out, rng);
}

// Gives every empty part one vertex from the part with the most vertices.
void fill_empty_parts(const WeightedGraph& g, std::vector<Index>& part, Index k) {
  PartState s = part_state(g, part, k);
  Connectivity c;
  for (Index p = 0; p < k; ++p) {
    if (s.count[p] > 0) continue;
    const Index donor = static_cast<Index>(
        std::max_element(s.count.begin(), s.count.end()) - s.count.begin());
    Index pick = -1;
    std::int64_t pick_internal = std::numeric_limits<std::int64_t>::max();
    for (Index v = 0; v < g.num_vertices(); ++v) {
      if (part[v] != donor) continue;
      connectivity(g, part, v, c);
      const std::int64_t internal = c.to(donor);
      if (internal < pick_internal) {
        pick = v;
        pick_internal = internal;
      }
    }
    part[pick] = p;
    --s.count[donor];
    ++s.count[p];
  }
}

}  // namespace

std::int64_t refine_partition(const WeightedGraph& g, std::vector<Index>& part, Index k,
                              std::span<const std::int64_t> max_weight, int passes) {
  PartState s = part_state(g, part, k);
  Connectivity c;
  const auto& off = g.adjacency.offsets();
  const auto& adj = g.adjacency.values();
  for (int pass = 0; pass < passes; ++pass) {
    bool moved = false;
    for (Index v = 0; v < g.num_vertices(); ++v) {
      const Index a = part[v];
      bool boundary = false;
      for (Index i = off[v]; i < off[v + 1] && !boundary; ++i) boundary = part[adj[i]] != a;
      if (!boundary || s.count[a] <= 1) continue;
      connectivity(g, part, v, c);
      const std::int64_t internal = c.to(a);
      const std::int64_t wv = g.vertex_weight[v];
      Index best = -1;
      std::int64_t best_gain = 0;
      for (const auto& [b, w] : c.parts) {
        if (b == a || s.weight[b] + wv > max_weight[b]) continue;
        const std::int64_t gain = w - internal;
        const bool relieves = s.weight[a] > max_weight[a] || s.weight[a] - wv > s.weight[b] + wv;
        const bool better = gain > best_gain || (gain == best_gain && best >= 0 && b < best);
        if (gain > 0 && better) {
          best = b;
          best_gain = gain;
        } else if (gain == 0 && best < 0 && relieves) {
          best = b;
          best_gain = 0;
        }
      }
      if (best < 0) continue;
      part[v] = best;
      s.weight[a] -= wv;
      s.weight[best] += wv;
      --s.count[a];
      ++s.count[best];
      moved = true;
    }
    if (!moved) break;
  }
  return edge_cut(g, part);
}

Index enforce_contiguity(const WeightedGraph& g, std::vector<Index>& part, Index k) {
  const Index n = g.num_vertices();
  const auto& off = g.adjacency.offsets();
  const auto& adj = g.adjacency.values();
  Index moved_total = 0;
  for (int round = 0; round < 16; ++round) {
    // Label connected components within parts.
    std::vector<Index> comp(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> comp_weight;
    std::vector<Index> comp_part, comp_first;
    std::vector<Index> stack;
    for (Index v = 0; v < n; ++v) {
      if (comp[v] >= 0) continue;
      const Index c = static_cast<Index>(comp_weight.size());
      comp_weight.push_back(0);
      comp_part.push_back(part[v]);
      comp_first.push_back(v);
      comp[v] = c;
      stack.assign(1, v);
      while (!stack.empty()) {
        const Index x = stack.back();
        stack.pop_back();
        comp_weight[c] += g.vertex_weight[x];
        for (Index i = off[x]; i < off[x + 1]; ++i) {
          const Index y = adj[i];
          if (comp[y] < 0 && part[y] == part[x]) {
            comp[y] = c;
            stack.push_back(y);
          }
        }
      }
    }
    const Index nc = static_cast<Index>(comp_weight.size());
    std::vector<Index> keep(static_cast<std::size_t>(k), -1);
    for (Index c = 0; c < nc; ++c) {
      Index& kp = keep[comp_part[c]];
      if (kp < 0 || comp_weight[c] > comp_weight[kp]) kp = c;
    }
    std::vector<Index> fragments;
    for (Index c = 0; c < nc; ++c) {
      if (keep[comp_part[c]] != c) fragments.push_back(c);
    }
    if (fragments.empty()) break;
    std::stable_sort(fragments.begin(), fragments.end(),
                     [&](Index a, Index b) { return comp_weight[a] < comp_weight[b]; });
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(nc));
    for (Index v = 0; v < n; ++v) members[comp[v]].push_back(v);

    Index moved = 0;
    for (Index c : fragments) {
      const Index own = part[members[c].front()];
      std::vector<std::pair<Index, std::int64_t>> shared;
      for (Index x : members[c]) {
        for (Index i = off[x]; i < off[x + 1]; ++i) {
          const Index q = part[adj[i]];
          if (q == own) continue;
          auto it = std::find_if(shared.begin(), shared.end(),
                                 [q](const auto& e) { return e.first == q; });
          if (it == shared.end()) {
            shared.emplace_back(q, g.edge_weight[i]);
          } else {
            it->second += g.edge_weight[i];
          }
        }
      }
      if (shared.empty()) continue;
      auto best = std::max_element(shared.begin(), shared.end(), [](const auto& a, const auto& b) {
        return a.second < b.second || (a.second == b.second && a.first > b.first);
      });
      for (Index x : members[c]) part[x] = best->first;
      ++moved;
    }
    moved_total += moved;
    if (moved == 0) break;
  }
  return moved_total;
}

Partition partition_kway(const WeightedGraph& graph, Index k, bool contiguous, std::uint64_t seed) {
  const Index n = graph.num_vertices();
  if (k < 1) throw ConfigError("partition_kway: k must be >= 1");
  if (k > n) {
    throw ConfigError("partition_kway: k = " + std::to_string(k) + " exceeds vertex count " +
                      std::to_string(n));
  }
  Partition out;
  out.k = k;
  if (k == 1) {
    out.part.assign(static_cast<std::size_t>(n), 0);
    return out;
  }
  if (k == n) {
    out.part.resize(static_cast<std::size_t>(n));
    std::iota(out.part.begin(), out.part.end(), Index{0});
    return out;
  }
  CounterRng rng(seed, 0x5eed);
  if (k <= 8) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    out.part.assign(static_cast<std::size_t>(n), 0);
    recursive_bisection(graph, all, k, 0, out.part, rng);
  } else {
    const double target = static_cast<double>(graph.total_vertex_weight()) / k;
    const std::vector<double> targets(static_cast<std::size_t>(k), target);
    out.part = multilevel(graph, targets, rng);
  }
  if (contiguous) enforce_contiguity(graph, out.part, k);
  fill_empty_parts(graph, out.part, k);
  return out;
}

}  // namespace agglomg
