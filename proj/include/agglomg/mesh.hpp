#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "agglomg/common.hpp"

namespace agglomg {

/// Sorted node tuple identifying a (dim-1)-simplex; unused slots hold -1.
using FaceKey = std::array<Index, 3>;

FaceKey make_face_key(std::span<const Index> nodes);

/// Simplicial mesh of triangles (dim 2) or tetrahedra (dim 3).  Coordinates
/// are stored as 3-vectors with z = 0 in 2D.
struct Mesh {
  int dim = 2;
  std::vector<Eigen::Vector3d> nodes;
  std::vector<std::array<Index, 4>> elements;  // slot 3 is -1 for triangles
  std::vector<int> material_id;
  std::map<FaceKey, int> boundary_tag;

  Index num_nodes() const { return static_cast<Index>(nodes.size()); }
  Index num_elements() const { return static_cast<Index>(elements.size()); }
  int nodes_per_element() const { return dim + 1; }

  std::span<const Index> element_nodes(Index e) const {
    return {elements[e].data(), static_cast<std::size_t>(dim + 1)};
  }
};

struct Material {
  double source = 0.0;   // cm^-2 s^-1
  double sigma_t = 0.0;  // cm^-1
  double sigma_s = 0.0;  // cm^-1
};

/// Region id -> material properties.
using MaterialTable = std::map<int, Material>;

/// Region ids used by the generated box geometry.
inline constexpr int kRegionSource = 1;  // inner box, region A
inline constexpr int kRegionOuter = 2;   // remainder, region B

enum class ProblemKind { diffuse, absorbing };

/// Material rows for the two model problems (region A = inner source box).
MaterialTable reference_materials(ProblemKind kind);

/// Box mesh generator: each cell of an n^dim grid is split into 2 triangles
/// or 6 Kuhn tetrahedra; interior nodes are jittered by a seeded uniform
/// displacement of at most `jitter` cell widths per coordinate.
struct GenerateSpec {
  int dim = 2;
  double extent = 10.0;          // cm, side of the outer box
  double source_extent = 2.0;    // cm, side of the centred region-A box
  Index subdivisions = 16;
  double jitter = 0.0;           // fraction of the cell width, < 0.5
  std::uint64_t seed = 0;
};

Mesh generate_mesh(const GenerateSpec& spec);

/// Signed measure (area or volume) of one element.
double signed_measure(const Mesh& mesh, Index element);

/// Measure of a face given by its node tuple.
double face_measure(const Mesh& mesh, std::span<const Index> face_nodes);

struct GeometryMeasures {
  std::vector<double> element_volume;
};

/// Element volumes; throws DegenerateElementError for non-positive measures.
GeometryMeasures geometry_measures(const Mesh& mesh);

/// Checks index ranges, orientation and tag coverage invariants.
void validate(const Mesh& mesh);

/// Longest edge of an element.
double element_diameter(const Mesh& mesh, Index element);

}  // namespace agglomg
