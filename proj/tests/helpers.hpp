#pragma once

#include <cmath>

#include "agglomg/agglomerate.hpp"
#include "agglomg/mesh.hpp"
#include "agglomg/topology.hpp"

namespace agglomg::testing {

inline Mesh square(Index n, double jitter = 0.0, std::uint64_t seed = 0, double extent = 10.0) {
  GenerateSpec gs;
  gs.dim = 2;
  gs.subdivisions = n;
  gs.jitter = jitter;
  gs.seed = seed;
  gs.extent = extent;
  gs.source_extent = extent / 5.0;
  return generate_mesh(gs);
}

inline Mesh cube(Index n, double jitter = 0.0, std::uint64_t seed = 0, double extent = 10.0) {
  GenerateSpec gs;
  gs.dim = 3;
  gs.subdivisions = n;
  gs.jitter = jitter;
  gs.seed = seed;
  gs.extent = extent;
  gs.source_extent = extent / 5.0;
  return generate_mesh(gs);
}

inline Eigen::Vector3d centroid(const Mesh& mesh, Index e) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (Index v : mesh.element_nodes(e)) c += mesh.nodes[v];
  return c / (mesh.dim + 1);
}

/// Agglomeration by blocks of `block` x `block` cells of an unjittered grid.
inline Agglomeration block_agglomeration(const Mesh& mesh, Index n, Index block, double extent) {
  const double h = extent / n;
  const Index nb = (n + block - 1) / block;
  Agglomeration agg;
  agg.num_aggregates = mesh.dim == 2 ? nb * nb : nb * nb * nb;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const Eigen::Vector3d c = centroid(mesh, e);
    Index id = 0, stride = 1;
    for (int d = 0; d < mesh.dim; ++d) {
      id += static_cast<Index>(std::floor(c[d] / h)) / block * stride;
      stride *= nb;
    }
    agg.element_to_agg.push_back(id);
  }
  return agg;
}

}  // namespace agglomg::testing

namespace agglomg::testing {

/// Row of `cells` unit squares split into triangles; the dual graph is a path.
inline Mesh strip(Index cells) {
  Mesh m;
  m.dim = 2;
  for (Index i = 0; i <= cells; ++i) {
    m.nodes.emplace_back(i, 0, 0);
    m.nodes.emplace_back(i, 1, 0);
  }
  for (Index i = 0; i < cells; ++i) {
    const Index b0 = 2 * i, t0 = 2 * i + 1, b1 = 2 * i + 2, t1 = 2 * i + 3;
    m.elements.push_back({b0, b1, t1, -1});
    m.elements.push_back({b0, t1, t0, -1});
    m.material_id.insert(m.material_id.end(), {1, 1});
  }
  return m;
}

/// Elements of a path-shaped dual graph in walk order.
inline std::vector<Index> path_order(const Topology& topo) {
  Index start = 0;
  while (topo.dual.adjacency.degree(start) != 1) ++start;
  std::vector<Index> order{start};
  Index prev = -1, cur = start;
  while (true) {
    Index next = -1;
    for (Index v : topo.dual.adjacency[cur]) {
      if (v != prev) next = v;
    }
    if (next < 0) break;
    order.push_back(next);
    prev = cur;
    cur = next;
  }
  return order;
}

}  // namespace agglomg::testing
