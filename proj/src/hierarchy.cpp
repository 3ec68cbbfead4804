#include "agglomg/hierarchy.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <tuple>

namespace agglomg {

namespace {

void sorted_unique(std::vector<Index>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

Index find_root(std::vector<Index>& parent, Index x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::vector<CoarseFace> select_coarse_faces(const Topology& topo, const Agglomeration& agg) {
  struct Entry {
    Index owner;
    int kind;  // 0 neighbour, 1 boundary tag
    Index other;
    Index face;
    auto key() const { return std::tie(owner, kind, other, face); }
  };
  const auto& owner = agg.element_to_agg;
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(topo.num_faces()));
  for (Index f = 0; f < topo.num_faces(); ++f) {
    const Face& face = topo.faces[f];
    const Index a = owner[face.left];
    if (face.is_boundary()) {
      entries.push_back({a, 1, face.tag, f});
    } else if (const Index b = owner[face.right]; a != b) {
      entries.push_back({a, 0, b, f});
      entries.push_back({b, 0, a, f});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& x, const Entry& y) { return x.key() < y.key(); });

  std::vector<CoarseFace> out;
  std::vector<Index> ridge_stamp(static_cast<std::size_t>(topo.num_ridges), -1);
  std::vector<Index> ridge_first(static_cast<std::size_t>(topo.num_ridges), -1);
  std::vector<Index> parent, label;
  Index group = 0;
  for (std::size_t i = 0; i < entries.size(); ++group) {
    std::size_t j = i;
    while (j < entries.size() && entries[j].owner == entries[i].owner &&
           entries[j].kind == entries[i].kind && entries[j].other == entries[i].other) {
      ++j;
    }
    const Index n = static_cast<Index>(j - i);
    parent.resize(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), Index{0});
    for (Index k = 0; k < n; ++k) {
      for (Index r : topo.face_ridges[entries[i + k].face]) {
        if (ridge_stamp[r] != group) {
          ridge_stamp[r] = group;
          ridge_first[r] = k;
        } else {
          const Index x = find_root(parent, k), y = find_root(parent, ridge_first[r]);
          if (x != y) parent[std::max(x, y)] = std::min(x, y);
        }
      }
    }
    label.assign(static_cast<std::size_t>(n), -1);
    const std::size_t first = out.size();
    for (Index k = 0; k < n; ++k) {
      const Index root = find_root(parent, k);
      if (label[root] < 0) {
        label[root] = static_cast<Index>(out.size() - first);
        CoarseFace cf;
        cf.owner = entries[i].owner;
        cf.component = label[root];
        if (entries[i].kind == 0) {
          cf.neighbour = entries[i].other;
        } else {
          cf.tag = static_cast<int>(entries[i].other);
        }
        out.push_back(std::move(cf));
      }
      out[first + label[root]].faces.push_back(entries[i + k].face);
    }
    i = j;
  }
  return out;
}

std::vector<std::vector<Index>> coarse_face_nodes(const Topology& topo,
                                                  std::span<const CoarseFace> faces) {
  std::vector<std::vector<Index>> out(faces.size());
  for (std::size_t c = 0; c < faces.size(); ++c) {
    auto& nodes = out[c];
    for (Index f : faces[c].faces) {
      const auto fn = topo.face_nodes[f];
      nodes.insert(nodes.end(), fn.begin(), fn.end());
    }
    sorted_unique(nodes);
  }
  return out;
}

namespace {

std::vector<Index> aggregates_per_node(const Topology& topo, const Agglomeration& agg) {
  std::vector<Index> count(static_cast<std::size_t>(topo.num_nodes), 0);
  std::vector<Index> seen;
  for (Index v = 0; v < topo.num_nodes; ++v) {
    seen.clear();
    for (Index e : topo.node_elements[v]) seen.push_back(agg.element_to_agg[e]);
    sorted_unique(seen);
    count[v] = static_cast<Index>(seen.size());
  }
  return count;
}

std::vector<Index> face_count_rule(const Topology& topo, const Agglomeration& agg,
                                   const std::vector<std::vector<Index>>& cf_nodes) {
  std::vector<Index> faces_at(static_cast<std::size_t>(topo.num_nodes), 0);
  for (const auto& nodes : cf_nodes) {
    for (Index v : nodes) ++faces_at[v];
  }
  const std::vector<Index> aggs_at = aggregates_per_node(topo, agg);
  const Index factor = topo.dim == 2 ? 1 : 2;
  std::vector<Index> coarse;
  for (Index v = 0; v < topo.num_nodes; ++v) {
    if (faces_at[v] > factor * aggs_at[v]) coarse.push_back(v);
  }
  return coarse;
}

}  // namespace

std::vector<Index> select_coarse_nodes(const Topology& topo, const Agglomeration& agg,
                                       std::span<const CoarseFace> faces) {
  return face_count_rule(topo, agg, coarse_face_nodes(topo, faces));
}

Index merge_coarse_faces(const Topology& topo, std::span<const CoarseFace> faces,
                         std::vector<Index>& face_to_merged) {
  face_to_merged.assign(static_cast<std::size_t>(topo.num_faces()), -1);
  Index id = 0;
  for (const CoarseFace& cf : faces) {
    if (!cf.is_boundary() && cf.owner > cf.neighbour) continue;
    for (Index f : cf.faces) face_to_merged[f] = id;
    ++id;
  }
  return id;
}

CoarseEdgeSet select_coarse_edges(const Topology& topo, std::span<const CoarseFace> faces,
                                  std::span<const Index> face_to_merged) {
  (void)faces;
  CoarseEdgeSet out;
  if (!topo.has_edges) return out;

  std::vector<std::pair<std::vector<Index>, Index>> keyed;
  std::vector<Index> key;
  for (Index d = 0; d < topo.num_edges(); ++d) {
    key.clear();
    for (Index f : topo.edge_faces[d]) {
      if (face_to_merged[f] >= 0) key.push_back(face_to_merged[f]);
    }
    sorted_unique(key);
    if (key.size() >= 2) keyed.emplace_back(key, d);
  }
  std::sort(keyed.begin(), keyed.end());

  std::vector<std::pair<Index, Index>> incid;  // (node, local edge)
  std::vector<Index> edges;
  for (std::size_t i = 0; i < keyed.size();) {
    std::size_t j = i;
    edges.clear();
    while (j < keyed.size() && keyed[j].first == keyed[i].first) edges.push_back(keyed[j++].second);
    const std::vector<Index>& merged = keyed[i].first;
    i = j;

    const Index ne = static_cast<Index>(edges.size());
    incid.clear();
    for (Index k = 0; k < ne; ++k) {
      for (Index v : topo.edge_nodes[edges[k]]) incid.emplace_back(v, k);
    }
    std::sort(incid.begin(), incid.end());
    auto incident = [&](Index v) {
      auto lo = std::lower_bound(incid.begin(), incid.end(), std::pair<Index, Index>{v, -1});
      auto hi = std::lower_bound(lo, incid.end(), std::pair<Index, Index>{v + 1, -1});
      return std::span<const std::pair<Index, Index>>(incid.data() + (lo - incid.begin()),
                                                     static_cast<std::size_t>(hi - lo));
    };
    auto other_end = [&](Index k, Index v) {
      const auto en = topo.edge_nodes[edges[k]];
      return en[0] == v ? en[1] : en[0];
    };
    std::vector<char> used(static_cast<std::size_t>(ne), 0);
    auto emit = [&](std::vector<Index> chain, std::vector<Index> nodes) {
      out.chains.push_back(std::move(chain));
      out.chain_nodes.push_back(std::move(nodes));
      out.merged_faces.push_back(merged);
    };

    // Open chains between branch or end points.
    for (std::size_t p = 0; p < incid.size(); ++p) {
      const Index v = incid[p].first;
      if (p > 0 && incid[p - 1].first == v) continue;
      const auto around = incident(v);
      if (around.size() == 2) continue;
      for (const auto& [node, k0] : around) {
        if (used[k0]) continue;
        std::vector<Index> chain, nodes{v};
        Index k = k0, at = v;
        while (true) {
          used[k] = 1;
          chain.push_back(edges[k]);
          at = other_end(k, at);
          nodes.push_back(at);
          const auto next = incident(at);
          if (next.size() != 2) break;
          const Index nk = next[0].second == k ? next[1].second : next[0].second;
          if (used[nk]) break;
          k = nk;
        }
        emit(std::move(chain), std::move(nodes));
      }
    }
    // Closed loops: cut at the smallest node and its antipode.
    for (Index k0 = 0; k0 < ne; ++k0) {
      if (used[k0]) continue;
      std::vector<Index> loop_edges, loop_nodes;
      Index k = k0, at = topo.edge_nodes[edges[k0]][0];
      const Index start = at;
      while (true) {
        used[k] = 1;
        loop_edges.push_back(k);
        loop_nodes.push_back(at);
        at = other_end(k, at);
        if (at == start) break;
        const auto next = incident(at);
        const Index nk = next[0].second == k ? next[1].second : next[0].second;
        if (used[nk]) break;
        k = nk;
      }
      const std::size_t len = loop_edges.size();
      const std::size_t m = static_cast<std::size_t>(
          std::min_element(loop_nodes.begin(), loop_nodes.end()) - loop_nodes.begin());
      std::rotate(loop_edges.begin(), loop_edges.begin() + static_cast<std::ptrdiff_t>(m),
                  loop_edges.end());
      std::rotate(loop_nodes.begin(), loop_nodes.begin() + static_cast<std::ptrdiff_t>(m),
                  loop_nodes.end());
      loop_nodes.push_back(loop_nodes.front());
      const std::size_t half = std::max<std::size_t>(1, len / 2);
      for (auto [b, e] : {std::pair{std::size_t{0}, half}, std::pair{half, len}}) {
        if (b == e) continue;
        std::vector<Index> chain, nodes;
        for (std::size_t q = b; q < e; ++q) chain.push_back(edges[loop_edges[q]]);
        nodes.assign(loop_nodes.begin() + static_cast<std::ptrdiff_t>(b),
                     loop_nodes.begin() + static_cast<std::ptrdiff_t>(e) + 1);
        emit(std::move(chain), std::move(nodes));
      }
    }
  }
  return out;
}

SparseMatrix build_prolongation(const Topology& topo, const Agglomeration& agg,
                                std::span<const CoarseFace> faces,
                                std::span<const Index> coarse_nodes) {
  const Index n = topo.num_nodes;
  std::vector<Index> col(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < coarse_nodes.size(); ++i) col[coarse_nodes[i]] = static_cast<Index>(i);

  const auto cf_nodes = coarse_face_nodes(topo, faces);
  std::vector<std::vector<Index>> cf_coarse(cf_nodes.size());
  std::vector<std::pair<Index, Index>> node_cf;
  for (std::size_t c = 0; c < cf_nodes.size(); ++c) {
    for (Index v : cf_nodes[c]) {
      node_cf.emplace_back(v, static_cast<Index>(c));
      if (col[v] >= 0) cf_coarse[c].push_back(col[v]);
    }
  }
  const Csr node_faces = Csr::from_pairs(n, node_cf);

  std::vector<std::vector<Index>> agg_coarse(static_cast<std::size_t>(agg.num_aggregates));
  for (Index e = 0; e < topo.num_elements; ++e) {
    for (Index v : topo.element_nodes[e]) {
      if (col[v] >= 0) agg_coarse[agg.element_to_agg[e]].push_back(col[v]);
    }
  }
  for (auto& list : agg_coarse) sorted_unique(list);
  for (Index a = 0; a < agg.num_aggregates; ++a) {
    if (agg_coarse[a].empty()) {
      throw TopologyError("prolongation: agglomerate " + std::to_string(a) + " has no coarse node");
    }
  }

  std::vector<Eigen::Triplet<double, Index>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 3);
  std::vector<Index> targets, ring, next_ring, allowed;
  std::vector<Index> stamp(static_cast<std::size_t>(topo.num_elements), -1);
  auto average = [&](Index v, const std::vector<Index>& cols) {
    const double w = 1.0 / static_cast<double>(cols.size());
    for (Index c : cols) trip.emplace_back(v, c, w);
  };
  for (Index v = 0; v < n; ++v) {
    if (col[v] >= 0) {
      trip.emplace_back(v, col[v], 1.0);
      continue;
    }
    targets.clear();
    for (Index c : node_faces[v]) targets.insert(targets.end(), cf_coarse[c].begin(), cf_coarse[c].end());
    sorted_unique(targets);
    if (!targets.empty()) {
      average(v, targets);
      continue;
    }
    // Interior rule: coarse nodes of incident elements, widening one ring at a time.
    allowed.clear();
    ring.clear();
    for (Index e : topo.node_elements[v]) {
      allowed.push_back(agg.element_to_agg[e]);
      ring.push_back(e);
      stamp[e] = v;
    }
    sorted_unique(allowed);
    for (int expansion = 0; expansion <= 20; ++expansion) {
      for (Index e : ring) {
        for (Index u : topo.element_nodes[e]) {
          if (col[u] >= 0) targets.push_back(col[u]);
        }
      }
      if (!targets.empty() || expansion == 20) break;
      next_ring.clear();
      for (Index e : ring) {
        for (Index u : topo.element_nodes[e]) {
          for (Index e2 : topo.node_elements[u]) {
            if (stamp[e2] == v) continue;
            if (!std::binary_search(allowed.begin(), allowed.end(), agg.element_to_agg[e2])) continue;
            stamp[e2] = v;
            next_ring.push_back(e2);
          }
        }
      }
      ring.swap(next_ring);
      if (ring.empty()) break;
    }
    if (targets.empty()) {
      for (Index a : allowed) targets.insert(targets.end(), agg_coarse[a].begin(), agg_coarse[a].end());
    }
    sorted_unique(targets);
    average(v, targets);
  }
  SparseMatrix p(n, static_cast<Index>(coarse_nodes.size()));
  p.setFromTriplets(trip.begin(), trip.end());
  p.makeCompressed();
  return p;
}

SparseMatrix restriction(const SparseMatrix& prolongation) {
  SparseMatrix r = prolongation.transpose();
  r.makeCompressed();
  return r;
}

std::vector<Material> project_materials(std::span<const Material> element_materials,
                                        const Agglomeration& agg,
                                        std::span<const double> element_volume) {
  std::vector<Material> out(static_cast<std::size_t>(agg.num_aggregates));
  std::vector<double> volume(static_cast<std::size_t>(agg.num_aggregates), 0.0);
  for (Index e = 0; e < agg.num_elements(); ++e) {
    const Index a = agg.element_to_agg[e];
    const double w = element_volume[e];
    out[a].source += w * element_materials[e].source;
    out[a].sigma_t += w * element_materials[e].sigma_t;
    out[a].sigma_s += w * element_materials[e].sigma_s;
    volume[a] += w;
  }
  for (Index a = 0; a < agg.num_aggregates; ++a) {
    out[a].source /= volume[a];
    out[a].sigma_t /= volume[a];
    out[a].sigma_s /= volume[a];
  }
  return out;
}

SparseMatrix galerkin_operator(const SparseMatrix& fine, const SparseMatrix& prolongation) {
  if (fine.rows() != fine.cols() || fine.cols() != prolongation.rows()) {
    throw Error("galerkin_operator: operator is " + std::to_string(fine.rows()) + "x" +
                std::to_string(fine.cols()) + ", prolongation is " +
                std::to_string(prolongation.rows()) + "x" + std::to_string(prolongation.cols()));
  }
  const SparseMatrix ap = fine * prolongation;
  SparseMatrix coarse = SparseMatrix(prolongation.transpose()) * ap;
  coarse.prune([](Index, Index, double v) { return v != 0.0; });
  coarse.makeCompressed();
  return coarse;
}

Index LevelSchedule::size_for(int level, Index num_elements) const {
  if (level == 0) return top;
  if (dim == 3 && num_elements < small_level_elements) return small_level_size;
  return lower;
}

LevelSchedule level_schedule(int dim, const ScheduleConfig& config) {
  if (dim != 2 && dim != 3) throw ConfigError("level_schedule: dimension must be 2 or 3");
  LevelSchedule s;
  s.dim = dim;
  s.top = config.top.value_or(dim == 2 ? 24 : 168);
  s.lower = config.lower.value_or(dim == 2 ? 4 : 8);
  s.small_level_size = config.small_level_size;
  s.small_level_elements = config.small_level_elements;
  return s;
}

namespace {

struct Selection {
  std::vector<CoarseFace> faces;
  std::vector<Index> face_to_merged;
  Index num_merged = 0;
  std::vector<Index> coarse_nodes;
  CoarseEdgeSet edges;
};

Selection select_all(const Topology& topo, const Agglomeration& agg, bool edge_path) {
  Selection s;
  s.faces = select_coarse_faces(topo, agg);
  s.num_merged = merge_coarse_faces(topo, s.faces, s.face_to_merged);
  const auto cf_nodes = coarse_face_nodes(topo, s.faces);
  std::vector<Index> by_rule = face_count_rule(topo, agg, cf_nodes);
  if (!edge_path) {
    s.coarse_nodes = std::move(by_rule);
    return s;
  }
  s.edges = select_coarse_edges(topo, s.faces, s.face_to_merged);
  std::vector<char> coarse(static_cast<std::size_t>(topo.num_nodes), 0);
  for (const auto& nodes : s.edges.chain_nodes) {
    coarse[nodes.front()] = 1;
    coarse[nodes.back()] = 1;
  }
  // Agglomerates without a chain end take the face-count nodes.
  std::vector<char> has(static_cast<std::size_t>(agg.num_aggregates), 0);
  for (Index e = 0; e < topo.num_elements; ++e) {
    for (Index v : topo.element_nodes[e]) {
      if (coarse[v]) has[agg.element_to_agg[e]] = 1;
    }
  }
  for (Index v : by_rule) {
    for (Index e : topo.node_elements[v]) {
      if (!has[agg.element_to_agg[e]]) coarse[v] = 1;
    }
  }
  for (Index v = 0; v < topo.num_nodes; ++v) {
    if (coarse[v]) s.coarse_nodes.push_back(v);
  }
  return s;
}

// Merges agglomerates owning no coarse node into the neighbour sharing the
// most faces.  Returns the number merged.
Index merge_nodeless(const Topology& topo, Agglomeration& agg,
                     std::span<const Index> coarse_nodes) {
  std::vector<char> has(static_cast<std::size_t>(agg.num_aggregates), 0);
  std::vector<char> is_coarse(static_cast<std::size_t>(topo.num_nodes), 0);
  for (Index v : coarse_nodes) is_coarse[v] = 1;
  for (Index e = 0; e < topo.num_elements; ++e) {
    for (Index v : topo.element_nodes[e]) {
      if (is_coarse[v]) has[agg.element_to_agg[e]] = 1;
    }
  }
  auto& owner = agg.element_to_agg;
  const Csr members = agg.members();
  std::vector<Index> size = agg.sizes();
  std::vector<Index> redirect(static_cast<std::size_t>(agg.num_aggregates));
  std::iota(redirect.begin(), redirect.end(), Index{0});
  Index merged = 0;
  const auto& off = topo.dual.adjacency.offsets();
  const auto& adj = topo.dual.adjacency.values();
  std::vector<std::pair<Index, Index>> shared;
  for (Index a = 0; a < agg.num_aggregates; ++a) {
    if (has[a]) continue;
    shared.clear();
    for (Index e : members[a]) {
      for (Index i = off[e]; i < off[e + 1]; ++i) {
        const Index b = owner[adj[i]];
        if (b == a) continue;
        auto it = std::find_if(shared.begin(), shared.end(), [b](const auto& p) { return p.first == b; });
        if (it == shared.end()) {
          shared.emplace_back(b, topo.dual.edge_faces[i]);
        } else {
          it->second += topo.dual.edge_faces[i];
        }
      }
    }
    if (shared.empty()) {
      throw TopologyError("agglomerate " + std::to_string(a) +
                          " has no coarse node and no neighbour to merge with");
    }
    auto best = shared.front();
    for (const auto& p : shared) {
      if (p.second > best.second ||
          (p.second == best.second &&
           (size[p.first] < size[best.first] || (size[p.first] == size[best.first] && p.first < best.first)))) {
        best = p;
      }
    }
    for (Index e : members[a]) owner[e] = best.first;
    size[best.first] += size[a];
    size[a] = 0;
    ++merged;
  }
  if (merged > 0) {
    std::vector<Index> remap(static_cast<std::size_t>(agg.num_aggregates), -1);
    for (Index x : owner) remap[x] = 0;
    Index next = 0;
    for (Index& r : remap) {
      if (r == 0) r = next++;
    }
    for (Index& x : owner) x = remap[x];
    agg.num_aggregates = next;
  }
  return merged;
}

Topology coarse_topology(const Topology& fine, const Agglomeration& agg, const Selection& sel,
                         bool with_edges) {
  Topology ct;
  ct.dim = fine.dim;
  ct.num_elements = agg.num_aggregates;
  ct.num_nodes = static_cast<Index>(sel.coarse_nodes.size());
  ct.element_volume.assign(static_cast<std::size_t>(ct.num_elements), 0.0);
  for (Index e = 0; e < fine.num_elements; ++e) {
    ct.element_volume[agg.element_to_agg[e]] += fine.element_volume[e];
  }

  std::vector<Index> cid(static_cast<std::size_t>(fine.num_nodes), -1);
  for (Index i = 0; i < ct.num_nodes; ++i) {
    const Index v = sel.coarse_nodes[i];
    cid[v] = i;
    ct.node_fine_id.push_back(fine.node_fine_id[v]);
    ct.node_on_boundary.push_back(fine.node_on_boundary[v]);
  }

  std::vector<std::pair<Index, Index>> pairs;
  for (Index e = 0; e < fine.num_elements; ++e) {
    for (Index v : fine.element_nodes[e]) {
      if (cid[v] >= 0) pairs.emplace_back(agg.element_to_agg[e], cid[v]);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  ct.element_nodes = Csr::from_pairs(ct.num_elements, pairs);
  ct.node_elements = ct.element_nodes.transpose(ct.num_nodes);

  // Merged faces with their coarse nodes and level ridges.
  std::vector<std::pair<Index, Index>> ridge_face;
  std::vector<Index> nodes;
  Index m = 0;
  for (const CoarseFace& cf : sel.faces) {
    if (!cf.is_boundary() && cf.owner > cf.neighbour) continue;
    Face face;
    face.left = cf.owner;
    face.right = cf.neighbour;
    face.tag = cf.tag;
    nodes.clear();
    for (Index f : cf.faces) {
      face.area += fine.faces[f].area;
      for (Index v : fine.face_nodes[f]) {
        if (cid[v] >= 0) nodes.push_back(cid[v]);
      }
      for (Index r : fine.face_ridges[f]) ridge_face.emplace_back(r, m);
    }
    sorted_unique(nodes);
    ct.faces.push_back(face);
    ct.face_nodes.push_row(nodes);
    ++m;
  }
  std::sort(ridge_face.begin(), ridge_face.end());
  ridge_face.erase(std::unique(ridge_face.begin(), ridge_face.end()), ridge_face.end());
  std::vector<std::pair<Index, Index>> face_ridge;
  Index nr = 0;
  for (std::size_t i = 0; i < ridge_face.size();) {
    std::size_t j = i;
    while (j < ridge_face.size() && ridge_face[j].first == ridge_face[i].first) ++j;
    if (j - i >= 2) {
      for (std::size_t q = i; q < j; ++q) face_ridge.emplace_back(ridge_face[q].second, nr);
      ++nr;
    }
    i = j;
  }
  std::sort(face_ridge.begin(), face_ridge.end());
  ct.face_ridges = Csr::from_pairs(m, face_ridge);
  ct.num_ridges = nr;

  if (with_edges) {
    ct.has_edges = true;
    const Index nce = sel.edges.size();
    std::vector<std::pair<Index, Index>> edge_elem;
    for (Index c = 0; c < nce; ++c) {
      const auto& cn = sel.edges.chain_nodes[c];
      ct.edge_nodes.push_row({cid[cn.front()], cid[cn.back()]});
      ct.edge_faces.push_row(sel.edges.merged_faces[c]);
      nodes.clear();
      for (Index f : sel.edges.merged_faces[c]) {
        nodes.push_back(ct.faces[f].left);
        if (!ct.faces[f].is_boundary()) nodes.push_back(ct.faces[f].right);
      }
      sorted_unique(nodes);
      for (Index a : nodes) edge_elem.emplace_back(c, a);
    }
    ct.edge_elements = Csr::from_pairs(nce, edge_elem);
    ct.face_edges = ct.edge_faces.transpose(m);
    ct.element_edges = ct.edge_elements.transpose(ct.num_elements);
    ct.node_edges = ct.edge_nodes.transpose(ct.num_nodes);
  }

  finalize_topology(ct);
  return ct;
}

}  // namespace

GridLevel coarsen_level(const Topology& fine, std::span<const Material> fine_materials,
                        const CoarsenConfig& config) {
  GridLevel level;
  level.desired_size = config.desired_size;
  level.agg = coarsen(fine, config, &level.cleanup);
  const bool edge_path = fine.dim == 3 && fine.has_edges && config.algorithm == Algorithm::kraus;
  Selection sel;
  while (true) {
    sel = select_all(fine, level.agg, edge_path);
    const Index merged = merge_nodeless(fine, level.agg, sel.coarse_nodes);
    if (merged == 0) break;
    level.repair_merges += merged;
  }
  level.num_coarse_faces = static_cast<Index>(sel.faces.size());
  level.prolongation = build_prolongation(fine, level.agg, sel.faces, sel.coarse_nodes);
  level.restriction = restriction(level.prolongation);
  level.topo = coarse_topology(fine, level.agg, sel, edge_path);
  level.materials = project_materials(fine_materials, level.agg, fine.element_volume);
  return level;
}

std::vector<Index> Hierarchy::node_counts() const {
  std::vector<Index> out;
  for (const GridLevel& l : levels) out.push_back(l.topo.num_nodes);
  return out;
}

std::vector<Index> Hierarchy::fine_element_map(int level) const {
  std::vector<Index> map(static_cast<std::size_t>(levels.front().topo.num_elements));
  std::iota(map.begin(), map.end(), Index{0});
  for (int l = 1; l <= level; ++l) {
    for (Index& x : map) x = levels[l].agg.element_to_agg[x];
  }
  return map;
}

Hierarchy build_hierarchy(Topology fine, std::vector<Material> fine_materials,
                          const HierarchyConfig& config, const SparseMatrix* fine_operator) {
  Hierarchy h;
  h.schedule = level_schedule(fine.dim, config.schedule);
  GridLevel top;
  top.topo = std::move(fine);
  top.materials = std::move(fine_materials);
  if (fine_operator != nullptr) {
    if (fine_operator->rows() != top.topo.num_nodes) {
      throw Error("build_hierarchy: operator has " + std::to_string(fine_operator->rows()) +
                  " rows, mesh has " + std::to_string(top.topo.num_nodes) + " nodes");
    }
    top.op = *fine_operator;
  }
  h.levels.push_back(std::move(top));

  while (h.num_levels() < config.stop.max_levels) {
    const GridLevel& cur = h.levels.back();
    const Index nodes = cur.topo.num_nodes;
    const Index n = cur.topo.num_elements;
    if (nodes <= config.stop.max_coarse_nodes || n < 2) break;
    CoarsenConfig cfg = config.coarsen;
    const int depth = h.num_levels() - 1;
    cfg.desired_size = std::clamp<Index>(h.schedule.size_for(depth, n), 2, n);
    cfg.seed = config.coarsen.seed + static_cast<std::uint64_t>(depth);
    GridLevel next = coarsen_level(cur.topo, cur.materials, cfg);
    const Index cn = next.topo.num_nodes;
    const bool nodes_stalled = static_cast<double>(cn) > (1.0 - config.stop.min_reduction) * nodes;
    const bool elements_stalled = static_cast<double>(next.topo.num_elements) >
                                  (1.0 - config.stop.min_element_reduction) * n;
    if (cn >= nodes || (nodes_stalled && elements_stalled)) break;
    next.agg.level = depth;
    if (cur.op.rows() > 0) next.op = galerkin_operator(cur.op, next.prolongation);
    h.levels.push_back(std::move(next));
  }
  return h;
}

Hierarchy build_hierarchy(const Mesh& mesh, const MaterialTable& materials,
                          const HierarchyConfig& config, const SparseMatrix* fine_operator) {
  std::vector<Material> per_element(static_cast<std::size_t>(mesh.num_elements()));
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    auto it = materials.find(mesh.material_id[e]);
    if (it == materials.end()) {
      throw ConfigError("no material for region " + std::to_string(mesh.material_id[e]));
    }
    per_element[e] = it->second;
  }
  return build_hierarchy(build_topology(mesh), std::move(per_element), config, fine_operator);
}

double grid_complexity(std::span<const Index> node_counts) {
  if (node_counts.empty() || node_counts.front() <= 0) throw Error("grid_complexity: empty hierarchy");
  double sum = 0.0;
  for (Index c : node_counts) sum += c;
  return sum / node_counts.front();
}

double grid_complexity(const Hierarchy& h) {
  const auto counts = h.node_counts();
  return grid_complexity(std::span<const Index>(counts));
}

double operator_complexity(const Hierarchy& h) {
  if (h.levels.empty() || h.levels.front().op.nonZeros() == 0) {
    throw Error("operator_complexity: hierarchy has no operators");
  }
  double sum = 0.0;
  for (const GridLevel& l : h.levels) sum += static_cast<double>(l.op.nonZeros());
  return sum / static_cast<double>(h.levels.front().op.nonZeros());
}

}  // namespace agglomg
