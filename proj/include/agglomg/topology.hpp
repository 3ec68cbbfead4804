#pragma once

#include <vector>

#include "agglomg/common.hpp"
#include "agglomg/mesh.hpp"

namespace agglomg {

struct Face {
  Index left = kBoundary;
  Index right = kBoundary;  // kBoundary on the domain boundary
  double area = 0.0;
  int tag = -1;             // boundary tag, -1 for interior faces

  bool is_boundary() const { return right == kBoundary; }
  Index other(Index element) const { return element == left ? right : left; }
};

/// Weighted face-adjacency graph of elements.
struct DualGraph {
  Csr adjacency;
  std::vector<double> edge_weight;    // shared interface area, aligned with adjacency values
  std::vector<Index> edge_faces;      // number of faces shared, aligned with adjacency values
  std::vector<double> vertex_weight;  // element volume

  Index num_vertices() const { return adjacency.size(); }
  Index num_edges() const { return adjacency.total() / 2; }
};

/// Topology of one multigrid level.  On the finest level the entities are the
/// mesh simplices; on coarser levels elements are agglomerates, faces are
/// merged coarse faces and nodes are coarse nodes.  Face adjacency is carried
/// by "ridges": fine nodes in 2D and fine edges in 3D, shared by two or more
/// faces of the level.
struct Topology {
  int dim = 2;

  Index num_elements = 0;
  Index num_nodes = 0;

  std::vector<double> element_volume;
  Csr element_nodes;
  Csr node_elements;
  Csr element_faces;

  std::vector<Index> node_fine_id;   // index into the fine mesh node list
  std::vector<char> node_on_boundary;

  std::vector<Face> faces;
  Csr face_nodes;
  Csr face_ridges;
  Csr ridge_faces;
  Csr face_neighbors;  // faces sharing a ridge
  Index num_ridges = 0;

  // Edges, 3D only (the fine mesh edges or coarse edge chains).
  bool has_edges = false;
  Csr edge_nodes;
  Csr edge_faces;
  Csr edge_elements;
  Csr element_edges;
  Csr face_edges;
  Csr node_edges;

  DualGraph dual;

  Index num_faces() const { return static_cast<Index>(faces.size()); }
  Index num_edges() const { return edge_nodes.size(); }
  Index num_interior_faces() const;
  Index num_boundary_faces() const { return num_faces() - num_interior_faces(); }
};

/// Derives faces, edges (3D) and the dual graph of a conforming mesh.
/// Untagged boundary faces receive tag 0.
Topology build_topology(const Mesh& mesh);

/// Fills face_neighbors, ridge_faces, element_faces and the dual graph from
/// faces/face_ridges/element_volume.  Shared by fine and coarse levels.
void finalize_topology(Topology& topo);

struct MeshMetrics {
  Index num_nodes = 0;
  Index num_elements = 0;
  Index num_faces = 0;
  double node_element_ratio = 0.0;
  double average_connectivity = 0.0;
};

/// Node/element ratio and mean number of elements per node of a level.
MeshMetrics mesh_metrics(const Topology& topo);

}  // namespace agglomg
