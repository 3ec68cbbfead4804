#include "agglomg/agglomerate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <string>

#include "agglomg/partitioner.hpp"
#include "agglomg/rng.hpp"

namespace agglomg {

Csr Agglomeration::members() const {
  std::vector<std::pair<Index, Index>> pairs;
  pairs.reserve(element_to_agg.size());
  for (Index e = 0; e < num_elements(); ++e) {
    if (element_to_agg[e] >= 0) pairs.emplace_back(element_to_agg[e], e);
  }
  return Csr::from_pairs(num_aggregates, pairs);
}

std::vector<Index> Agglomeration::sizes() const {
  std::vector<Index> out(static_cast<std::size_t>(num_aggregates), 0);
  for (Index a : element_to_agg) {
    if (a >= 0) ++out[a];
  }
  return out;
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::jones: return "jones";
    case Algorithm::kraus: return "kraus";
    case Algorithm::rgb: return "rgb";
    case Algorithm::node: return "node";
    case Algorithm::greedy: return "greedy";
    case Algorithm::sizebased: return "sizebased";
    case Algorithm::aspect: return "aspect";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (Algorithm a : kAllAlgorithms) {
    if (to_string(a) == name) return a;
  }
  if (name == "metis") return Algorithm::sizebased;
  if (name == "mgridgen") return Algorithm::aspect;
  throw ConfigError("unknown algorithm '" + std::string(name) +
                    "' (expected jones, kraus, rgb, node, greedy, sizebased or aspect)");
}

bool uses_size(Algorithm a) {
  return a == Algorithm::greedy || a == Algorithm::sizebased || a == Algorithm::aspect;
}

namespace {

// Max-heap over (weight, -index): maximal weight, lowest index on ties.
class WeightHeap {
 public:
  void push(int w, Index i) { heap_.emplace(w, -i); }

  // Pops until an entry matches the live weight; -1 when exhausted.
  Index pop_valid(const std::vector<int>& weight) {
    while (!heap_.empty()) {
      const auto [w, negi] = heap_.top();
      heap_.pop();
      if (weight[-negi] == w && w >= 0) return -negi;
    }
    return -1;
  }

 private:
  std::priority_queue<std::pair<int, Index>> heap_;
};

bool share_element(const Face& a, const Face& b) {
  auto has = [](const Face& f, Index e) { return e != kBoundary && (f.left == e || f.right == e); };
  return has(b, a.left) || has(b, a.right);
}

// Highest-weight live candidate, lowest index on ties.
template <class Range, class Pred>
Index argmax_weight(const Range& candidates, const std::vector<int>& weight, Pred admissible) {
  Index best = -1;
  for (Index g : candidates) {
    if (weight[g] < 0 || !admissible(g)) continue;
    if (best < 0 || weight[g] > weight[best] || (weight[g] == weight[best] && g < best)) best = g;
  }
  return best;
}

struct Growth {
  Agglomeration agg;
  std::vector<Index> current;  // elements of the agglomerate being built

  explicit Growth(Index ne) {
    agg.element_to_agg.assign(static_cast<std::size_t>(ne), -1);
  }
  Index open() {
    current.clear();
    return agg.num_aggregates++;
  }
  void add(Index e) {
    if (e == kBoundary || agg.element_to_agg[e] >= 0) return;
    agg.element_to_agg[e] = agg.num_aggregates - 1;
    current.push_back(e);
  }
};

std::vector<int> initial_face_weights(const Topology& topo) {
  std::vector<int> w(static_cast<std::size_t>(topo.num_faces()), 0);
  for (Index f = 0; f < topo.num_faces(); ++f) {
    if (topo.faces[f].is_boundary()) w[f] = -1;
  }
  return w;
}

// Face phase shared by Jones (unrestricted g) and Kraus (g shares an element with f).
void face_phase(const Topology& topo, std::vector<int>& wf, Growth& grow, bool restrict_g,
                const std::vector<int>* we_consume, std::vector<int>* we) {
  WeightHeap heap;
  for (Index f = 0; f < topo.num_faces(); ++f) {
    if (wf[f] >= 0) heap.push(wf[f], f);
  }
  auto bump = [&](Index g) {
    if (wf[g] == -1) return;
    ++wf[g];
    heap.push(wf[g], g);
  };
  while (true) {
    Index f = heap.pop_valid(wf);
    if (f < 0) break;
    grow.open();
    while (true) {
      const Face& face = topo.faces[f];
      grow.add(face.left);
      grow.add(face.right);
      const int wmax = wf[f];
      wf[f] = -1;
      const auto nbrs = topo.face_neighbors[f];
      for (Index g : nbrs) bump(g);
      for (Index g : nbrs) {
        if (share_element(face, topo.faces[g])) bump(g);
      }
      const Index g = argmax_weight(nbrs, wf, [&](Index c) {
        return !restrict_g || share_element(face, topo.faces[c]);
      });
      if (g >= 0 && wf[g] >= wmax) {
        f = g;
        continue;
      }
      for (Index e : grow.current) {
        for (Index h : topo.element_faces[e]) wf[h] = -1;
        if (we != nullptr) {
          for (Index d : topo.element_edges[e]) (*we)[d] = -1;
        }
      }
      break;
    }
  }
  (void)we_consume;
}

}  // namespace

Agglomeration jones_coarsen(const Topology& topo, WeightState* final_state) {
  Growth grow(topo.num_elements);
  std::vector<int> wf = initial_face_weights(topo);
  face_phase(topo, wf, grow, false, nullptr, nullptr);
  if (final_state != nullptr) final_state->face = wf;
  return std::move(grow.agg);
}

Agglomeration kraus_coarsen(const Topology& topo, WeightState* final_state) {
  Growth grow(topo.num_elements);
  std::vector<int> wf = initial_face_weights(topo);
  std::vector<int> we;

  if (topo.dim == 3 && topo.has_edges) {
    const Index nedge = topo.num_edges();
    we.assign(static_cast<std::size_t>(nedge), 0);
    WeightHeap heap;
    for (Index e = 0; e < nedge; ++e) heap.push(0, e);
    std::vector<Index> mark(static_cast<std::size_t>(std::max(nedge, topo.num_faces())), -1);
    Index stamp = 0;
    std::vector<Index> e2, f3;

    while (true) {
      Index e = heap.pop_valid(we);
      if (e < 0) break;
      grow.open();
      while (true) {
        for (Index el : topo.edge_elements[e]) grow.add(el);
        const int wmax = we[e];
        we[e] = -1;

        // e1: edges sharing a node with e.
        ++stamp;
        for (Index v : topo.edge_nodes[e]) {
          for (Index d : topo.node_edges[v]) {
            if (d == e || mark[d] == stamp) continue;
            mark[d] = stamp;
            if (we[d] != -1) {
              ++we[d];
              heap.push(we[d], d);
            }
          }
        }
        // e2: edges sharing a face with e.
        ++stamp;
        e2.clear();
        for (Index f : topo.edge_faces[e]) {
          for (Index d : topo.face_edges[f]) {
            if (d == e || mark[d] == stamp) continue;
            mark[d] = stamp;
            e2.push_back(d);
            if (we[d] != -1) {
              ++we[d];
              heap.push(we[d], d);
            }
          }
        }
        // f3: faces neighbouring any face that carries e.
        ++stamp;
        f3.clear();
        for (Index f : topo.edge_faces[e]) {
          for (Index g : topo.face_neighbors[f]) {
            if (mark[g] == stamp) continue;
            mark[g] = stamp;
            if (wf[g] != -1) ++wf[g];
          }
        }
        std::sort(e2.begin(), e2.end());
        const Index d = argmax_weight(e2, we, [](Index) { return true; });
        if (d >= 0 && we[d] >= wmax) {
          e = d;
          continue;
        }
        for (Index el : grow.current) {
          for (Index h : topo.element_faces[el]) wf[h] = -1;
          for (Index h : topo.element_edges[el]) we[h] = -1;
        }
        break;
      }
    }
  }
  face_phase(topo, wf, grow, true, nullptr, we.empty() ? nullptr : &we);
  if (final_state != nullptr) {
    final_state->face = wf;
    final_state->edge = we;
  }
  return std::move(grow.agg);
}

Agglomeration rgb_coarsen(const Topology& topo, std::uint64_t seed) {
  enum Colour : char { kNone, kBlack, kRed, kGrey };
  const Index ne = topo.num_elements;
  std::vector<char> colour(static_cast<std::size_t>(ne), kNone);
  Growth grow(ne);
  CounterRng rng(seed, 0x6762);
  std::vector<Index> reds;
  for (Index e : rng.permutation(ne)) {
    if (colour[e] != kNone) continue;
    grow.open();
    colour[e] = kBlack;
    grow.add(e);
    reds.clear();
    for (Index n : topo.dual.adjacency[e]) {
      if (colour[n] == kNone || colour[n] == kGrey) {
        colour[n] = kRed;
        grow.add(n);
        reds.push_back(n);
      }
    }
    for (Index r : reds) {
      for (Index m : topo.dual.adjacency[r]) {
        if (colour[m] == kNone) colour[m] = kGrey;
      }
    }
  }

  // Greys join the neighbouring agglomerate sharing the most faces, then the
  // smaller one, then the lower id.
  Agglomeration& agg = grow.agg;
  std::vector<Index> size = agg.sizes();
  const auto& off = topo.dual.adjacency.offsets();
  const auto& adj = topo.dual.adjacency.values();
  std::vector<std::pair<Index, Index>> shared;
  for (Index e = 0; e < ne; ++e) {
    if (agg.element_to_agg[e] >= 0) continue;
    shared.clear();
    for (Index i = off[e]; i < off[e + 1]; ++i) {
      const Index a = agg.element_to_agg[adj[i]];
      if (a < 0) continue;
      auto it = std::find_if(shared.begin(), shared.end(), [a](const auto& s) { return s.first == a; });
      if (it == shared.end()) {
        shared.emplace_back(a, topo.dual.edge_faces[i]);
      } else {
        it->second += topo.dual.edge_faces[i];
      }
    }
    if (shared.empty()) continue;
    auto best = shared.front();
    for (const auto& s : shared) {
      if (s.second > best.second ||
          (s.second == best.second && (size[s.first] < size[best.first] ||
                                       (size[s.first] == size[best.first] && s.first < best.first)))) {
        best = s;
      }
    }
    agg.element_to_agg[e] = best.first;
    ++size[best.first];
  }
  return std::move(agg);
}

Agglomeration node_coarsen(const Topology& topo, std::uint64_t seed) {
  CounterRng rng(seed, 0x6e6f);
  std::vector<Index> interior, boundary;
  for (Index v = 0; v < topo.num_nodes; ++v) (topo.node_on_boundary[v] ? boundary : interior).push_back(v);
  rng.shuffle(interior);
  rng.shuffle(boundary);

  Growth grow(topo.num_elements);
  std::vector<char> used(static_cast<std::size_t>(topo.num_nodes), 0);
  for (const auto* list : {&interior, &boundary}) {
    for (Index v : *list) {
      if (used[v]) continue;
      grow.open();
      for (Index e : topo.node_elements[v]) grow.add(e);
      used[v] = 1;
      for (Index e : grow.current) {
        for (Index u : topo.element_nodes[e]) used[u] = 1;
      }
      if (grow.current.empty()) --grow.agg.num_aggregates;
    }
  }
  return std::move(grow.agg);
}

Agglomeration greedy_coarsen(const Topology& topo, Index desired_size, std::uint64_t seed) {
  if (desired_size < 2) throw ConfigError("greedy: desired agglomerate size must be >= 2");
  const Index ne = topo.num_elements;
  CounterRng rng(seed, 0x6772);
  Growth grow(ne);
  std::vector<char> queued(static_cast<std::size_t>(ne), 0);
  std::deque<Index> frontier;
  auto insert_unused = [&](Index e) {
    for (Index n : topo.dual.adjacency[e]) {
      if (grow.agg.element_to_agg[n] < 0 && !queued[n]) {
        queued[n] = 1;
        frontier.push_back(n);
      }
    }
  };
  for (Index e : rng.permutation(ne)) {
    if (grow.agg.element_to_agg[e] >= 0) continue;
    grow.open();
    grow.add(e);
    insert_unused(e);
    while (!frontier.empty()) {
      const Index en = frontier.front();
      frontier.pop_front();
      queued[en] = 0;
      grow.add(en);
      if (static_cast<Index>(grow.current.size()) == desired_size) {
        for (Index q : frontier) queued[q] = 0;
        frontier.clear();
        break;
      }
      insert_unused(en);
    }
  }
  return std::move(grow.agg);
}

Index sizebased_parts(Index num_elements, Index desired_size) {
  if (desired_size < 2) throw ConfigError("sizebased: desired agglomerate size must be >= 2");
  const Index k = num_elements / desired_size;
  if (k == 0) {
    throw ConfigError("sizebased: desired size " + std::to_string(desired_size) + " exceeds the " +
                      std::to_string(num_elements) + " elements available; use a smaller size");
  }
  return k;
}

Agglomeration sizebased_coarsen(const Topology& topo, Index desired_size, bool contiguous,
                                std::uint64_t seed) {
  const Index k = sizebased_parts(topo.num_elements, desired_size);
  const WeightedGraph graph = scale_weights(topo.dual);
  Partition p = partition_kway(graph, k, contiguous, seed);
  Agglomeration agg;
  agg.element_to_agg = std::move(p.part);
  agg.num_aggregates = k;
  return agg;
}

double aspect_objective(const Topology& topo, std::span<const Index> element_to_agg,
                        Index num_aggregates) {
  std::vector<double> surface(static_cast<std::size_t>(num_aggregates), 0.0);
  std::vector<double> volume(static_cast<std::size_t>(num_aggregates), 0.0);
  for (Index e = 0; e < topo.num_elements; ++e) volume[element_to_agg[e]] += topo.element_volume[e];
  for (const Face& f : topo.faces) {
    const Index a = element_to_agg[f.left];
    if (f.is_boundary()) {
      surface[a] += f.area;
    } else if (const Index b = element_to_agg[f.right]; a != b) {
      surface[a] += f.area;
      surface[b] += f.area;
    }
  }
  double total = 0.0;
  for (Index a = 0; a < num_aggregates; ++a) total += surface[a] * surface[a] / volume[a];
  return total;
}

Agglomeration aspect_ratio_coarsen(const Topology& topo, Index desired_size, std::uint64_t seed,
                                   std::vector<double>* objective_history) {
  Agglomeration agg = greedy_coarsen(topo, desired_size, seed);
  const Index na = agg.num_aggregates;
  const Index lo = std::max<Index>(2, desired_size / 2);
  const Index hi = 2 * desired_size;
  auto& owner = agg.element_to_agg;

  std::vector<double> surface(static_cast<std::size_t>(na), 0.0);
  std::vector<double> volume(static_cast<std::size_t>(na), 0.0);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(na));
  for (Index e = 0; e < topo.num_elements; ++e) {
    volume[owner[e]] += topo.element_volume[e];
    members[owner[e]].push_back(e);
  }
  for (const Face& f : topo.faces) {
    const Index a = owner[f.left];
    if (f.is_boundary()) {
      surface[a] += f.area;
    } else if (const Index b = owner[f.right]; a != b) {
      surface[a] += f.area;
      surface[b] += f.area;
    }
  }
  double objective = 0.0;
  for (Index a = 0; a < na; ++a) objective += surface[a] * surface[a] / volume[a];
  if (objective_history != nullptr) objective_history->assign(1, objective);

  std::vector<Index> stamp(static_cast<std::size_t>(topo.num_elements), -1);
  Index tick = 0;
  auto stays_connected = [&](Index a, Index removed) {
    const auto& m = members[a];
    if (m.size() <= 2) return true;
    ++tick;
    const Index start = m.front() == removed ? m[1] : m.front();
    std::vector<Index> stack{start};
    stamp[start] = tick;
    std::size_t seen = 1;
    while (!stack.empty()) {
      const Index x = stack.back();
      stack.pop_back();
      for (Index y : topo.dual.adjacency[x]) {
        if (y == removed || owner[y] != a || stamp[y] == tick) continue;
        stamp[y] = tick;
        ++seen;
        stack.push_back(y);
      }
    }
    return seen == m.size() - 1;
  };

  for (int pass = 0; pass < 10; ++pass) {
    Index moves = 0;
    for (Index e = 0; e < topo.num_elements; ++e) {
      const Index a = owner[e];
      if (static_cast<Index>(members[a].size()) - 1 < lo) continue;
      const double ve = topo.element_volume[e];
      Index best = -1;
      double best_delta = 0.0;
      double best_sa = 0.0, best_sb = 0.0;
      for (Index f : topo.element_faces[e]) {
        const Face& face = topo.faces[f];
        if (face.is_boundary()) continue;
        const Index b = owner[face.other(e)];
        if (b == a || b == best || static_cast<Index>(members[b].size()) + 1 > hi) continue;
        double sa = surface[a], sb = surface[b];
        for (Index g : topo.element_faces[e]) {
          const Face& fg = topo.faces[g];
          const Index other = fg.is_boundary() ? -1 : owner[fg.other(e)];
          if (other == a) {
            sa += fg.area;
            sb += fg.area;
          } else if (other == b) {
            sa -= fg.area;
            sb -= fg.area;
          } else {
            sa -= fg.area;
            sb += fg.area;
          }
        }
        const double delta = sa * sa / (volume[a] - ve) + sb * sb / (volume[b] + ve) -
                             surface[a] * surface[a] / volume[a] - surface[b] * surface[b] / volume[b];
        if (delta < best_delta - 1e-12 * std::abs(objective)) {
          best = b;
          best_delta = delta;
          best_sa = sa;
          best_sb = sb;
        }
      }
      if (best < 0 || !stays_connected(a, e)) continue;
      surface[a] = best_sa;
      surface[best] = best_sb;
      volume[a] -= ve;
      volume[best] += ve;
      auto& ma = members[a];
      ma.erase(std::find(ma.begin(), ma.end(), e));
      members[best].push_back(e);
      owner[e] = best;
      objective += best_delta;
      ++moves;
    }
    if (objective_history != nullptr) objective_history->push_back(objective);
    if (moves == 0) break;
  }
  return agg;
}

Agglomeration coarsen(const Topology& topo, const CoarsenConfig& config, CleanupReport* report) {
  Agglomeration agg;
  switch (config.algorithm) {
    case Algorithm::jones: agg = jones_coarsen(topo); break;
    case Algorithm::kraus: agg = kraus_coarsen(topo); break;
    case Algorithm::rgb: agg = rgb_coarsen(topo, config.seed); break;
    case Algorithm::node: agg = node_coarsen(topo, config.seed); break;
    case Algorithm::greedy: agg = greedy_coarsen(topo, config.desired_size, config.seed); break;
    case Algorithm::sizebased:
      agg = sizebased_coarsen(topo, config.desired_size, config.contiguous, config.seed);
      break;
    case Algorithm::aspect: agg = aspect_ratio_coarsen(topo, config.desired_size, config.seed); break;
  }
  const CleanupReport r = cleanup(topo, agg);
  if (report != nullptr) *report = r;
  return agg;
}

AgglomerateStats agglomerate_stats(const Topology& topo, const Agglomeration& agg) {
  AgglomerateStats s;
  if (agg.num_aggregates == 0) return s;
  s.average_size = static_cast<double>(agg.num_elements()) / agg.num_aggregates;
  for (Index size : agg.sizes()) ++s.size_histogram[size];
  s.mean_aspect = aspect_objective(topo, agg.element_to_agg, agg.num_aggregates) / agg.num_aggregates;
  const auto& adj = topo.dual.adjacency;
  for (Index e = 0; e < adj.size(); ++e) {
    for (Index n : adj[e]) {
      if (n > e && agg.element_to_agg[n] != agg.element_to_agg[e]) ++s.edge_cut;
    }
  }
  return s;
}

bool is_total(const Agglomeration& agg) {
  return std::all_of(agg.element_to_agg.begin(), agg.element_to_agg.end(),
                     [&](Index a) { return a >= 0 && a < agg.num_aggregates; });
}

bool is_dense(const Agglomeration& agg) {
  std::vector<char> seen(static_cast<std::size_t>(agg.num_aggregates), 0);
  for (Index a : agg.element_to_agg) {
    if (a < 0 || a >= agg.num_aggregates) return false;
    seen[a] = 1;
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

bool is_contiguous(const Topology& topo, const Agglomeration& agg) {
  if (!is_total(agg)) return false;
  const Csr members = agg.members();
  std::vector<char> seen(static_cast<std::size_t>(agg.num_elements()), 0);
  std::vector<Index> stack;
  for (Index a = 0; a < agg.num_aggregates; ++a) {
    const auto m = members[a];
    if (m.empty()) continue;
    stack.assign(1, m.front());
    seen[m.front()] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const Index x = stack.back();
      stack.pop_back();
      for (Index y : topo.dual.adjacency[x]) {
        if (!seen[y] && agg.element_to_agg[y] == a) {
          seen[y] = 1;
          ++count;
          stack.push_back(y);
        }
      }
    }
    if (count != m.size()) return false;
  }
  return true;
}

}  // namespace agglomg
