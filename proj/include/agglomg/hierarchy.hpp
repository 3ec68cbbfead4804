#pragma once

#include <optional>
#include <span>
#include <vector>

#include "agglomg/agglomerate.hpp"
#include "agglomg/common.hpp"
#include "agglomg/mesh.hpp"
#include "agglomg/topology.hpp"

namespace agglomg {

/// Connected piece of one agglomerate's interface with a neighbour or with
/// one tagged part of the domain boundary.
struct CoarseFace {
  Index owner = -1;
  Index neighbour = kBoundary;  // kBoundary for domain-boundary faces
  int tag = -1;                 // boundary tag, -1 for interior faces
  std::vector<Index> faces;     // level faces, increasing
  Index component = 0;          // index among the pieces of the same (owner, neighbour/tag)

  bool is_boundary() const { return neighbour == kBoundary; }
};

/// Interior interfaces appear once per side; boundary pieces once.
std::vector<CoarseFace> select_coarse_faces(const Topology& topo, const Agglomeration& agg);

/// Level nodes touched by each coarse face (sorted).
std::vector<std::vector<Index>> coarse_face_nodes(const Topology& topo,
                                                  std::span<const CoarseFace> faces);

/// Level nodes that are coarse by the face-count rule:
/// #coarse faces containing v > 2^(dim-2) * #agglomerates containing v.
std::vector<Index> select_coarse_nodes(const Topology& topo, const Agglomeration& agg,
                                       std::span<const CoarseFace> faces);

/// Coarse edges as chains of level edges (3D).
struct CoarseEdgeSet {
  std::vector<std::vector<Index>> chains;        // level edges in walk order
  std::vector<std::vector<Index>> chain_nodes;   // level nodes in walk order (edges + 1)
  std::vector<std::vector<Index>> merged_faces;  // merged coarse faces sharing the chain

  Index size() const { return static_cast<Index>(chains.size()); }
};

/// Chains of level edges shared by the same set of (two or more) merged coarse
/// faces.  Chains break at branch and end points; closed loops are cut at their
/// smallest node and the node opposite to it.
CoarseEdgeSet select_coarse_edges(const Topology& topo, std::span<const CoarseFace> faces,
                                  std::span<const Index> face_to_merged);

/// Merged coarse face id of each level face (-1 for faces inside an
/// agglomerate).  Returns the number of merged faces.
Index merge_coarse_faces(const Topology& topo, std::span<const CoarseFace> faces,
                         std::vector<Index>& face_to_merged);

/// Coarse-to-level interpolation.  Rows are level nodes, columns follow
/// `coarse_nodes` (sorted level node ids).
SparseMatrix build_prolongation(const Topology& topo, const Agglomeration& agg,
                                std::span<const CoarseFace> faces,
                                std::span<const Index> coarse_nodes);

SparseMatrix restriction(const SparseMatrix& prolongation);

/// Volume-weighted averages of the element materials over each agglomerate.
std::vector<Material> project_materials(std::span<const Material> element_materials,
                                        const Agglomeration& agg,
                                        std::span<const double> element_volume);

/// P^T A P.
SparseMatrix galerkin_operator(const SparseMatrix& fine, const SparseMatrix& prolongation);

struct ScheduleConfig {
  std::optional<Index> top;    // default 24 (2D) / 168 (3D)
  std::optional<Index> lower;  // default 4 (2D) / 8 (3D)
  Index small_level_size = 4;  // 3D levels with fewer than small_level_elements elements
  Index small_level_elements = 100;
};

struct LevelSchedule {
  int dim = 2;
  Index top = 24;
  Index lower = 4;
  Index small_level_size = 4;
  Index small_level_elements = 100;

  /// Desired agglomerate size when coarsening `level` having `num_elements` elements.
  Index size_for(int level, Index num_elements) const;
};

LevelSchedule level_schedule(int dim, const ScheduleConfig& config = {});

struct StopRule {
  Index max_coarse_nodes = 60;  // no further coarsening at or below this
  // A level reducing both nodes and elements by less than these is discarded.
  double min_reduction = 0.10;
  double min_element_reduction = 0.10;
  int max_levels = 10;
};

struct HierarchyConfig {
  CoarsenConfig coarsen;
  ScheduleConfig schedule;
  StopRule stop;
};

struct GridLevel {
  Topology topo;
  std::vector<Material> materials;  // per element of this level

  // Links to the next finer level (empty on level 0).
  Agglomeration agg;         // finer elements -> elements of this level
  CleanupReport cleanup;
  Index desired_size = 0;
  Index num_coarse_faces = 0;  // directed coarse faces on the finer level
  Index repair_merges = 0;     // agglomerates merged for lack of a coarse node
  SparseMatrix prolongation;   // finer nodes x nodes of this level
  SparseMatrix restriction;

  SparseMatrix op;  // empty unless a fine operator was supplied
};

struct Hierarchy {
  std::vector<GridLevel> levels;
  LevelSchedule schedule;

  int num_levels() const { return static_cast<int>(levels.size()); }
  std::vector<Index> node_counts() const;
  /// Level-`level` element of every fine element.
  std::vector<Index> fine_element_map(int level) const;
};

/// Coarsens until the stop rule fires.  When `fine_operator` is given, every
/// level receives its Galerkin operator.
Hierarchy build_hierarchy(const Mesh& mesh, const MaterialTable& materials,
                          const HierarchyConfig& config,
                          const SparseMatrix* fine_operator = nullptr);
Hierarchy build_hierarchy(Topology fine, std::vector<Material> fine_materials,
                          const HierarchyConfig& config,
                          const SparseMatrix* fine_operator = nullptr);

/// Builds one coarse level from `fine`.
GridLevel coarsen_level(const Topology& fine, std::span<const Material> fine_materials,
                        const CoarsenConfig& config);

/// Sum of level node counts over the finest count.
double grid_complexity(const Hierarchy& h);
double grid_complexity(std::span<const Index> node_counts);
/// Sum of operator nonzeros over the finest nonzeros.
double operator_complexity(const Hierarchy& h);

}  // namespace agglomg
