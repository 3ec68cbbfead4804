#include "agglomg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "agglomg/rng.hpp"

namespace agglomg {

FaceKey make_face_key(std::span<const Index> nodes) {
  FaceKey key{-1, -1, -1};
  std::copy(nodes.begin(), nodes.end(), key.begin());
  std::sort(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(nodes.size()));
  return key;
}

MaterialTable reference_materials(ProblemKind kind) {
  MaterialTable table;
  if (kind == ProblemKind::diffuse) {
    table[kRegionSource] = {1.0, 10.0, 10.0};
    table[kRegionOuter] = {0.0, 10.0, 10.0};
  } else {
    table[kRegionSource] = {1.0, 0.5, 0.0};
    table[kRegionOuter] = {0.0, 1.0, 0.0};
  }
  return table;
}

double signed_measure(const Mesh& mesh, Index element) {
  const auto& el = mesh.elements[element];
  const Eigen::Vector3d& p0 = mesh.nodes[el[0]];
  const Eigen::Vector3d a = mesh.nodes[el[1]] - p0;
  const Eigen::Vector3d b = mesh.nodes[el[2]] - p0;
  if (mesh.dim == 2) return 0.5 * (a.x() * b.y() - a.y() * b.x());
  const Eigen::Vector3d c = mesh.nodes[el[3]] - p0;
  return a.dot(b.cross(c)) / 6.0;
}

double face_measure(const Mesh& mesh, std::span<const Index> face_nodes) {
  const Eigen::Vector3d& p0 = mesh.nodes[face_nodes[0]];
  const Eigen::Vector3d a = mesh.nodes[face_nodes[1]] - p0;
  if (face_nodes.size() == 2) return a.norm();
  const Eigen::Vector3d b = mesh.nodes[face_nodes[2]] - p0;
  return 0.5 * a.cross(b).norm();
}

double element_diameter(const Mesh& mesh, Index element) {
  const auto nodes = mesh.element_nodes(element);
  double h = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      h = std::max(h, (mesh.nodes[nodes[i]] - mesh.nodes[nodes[j]]).norm());
    }
  }
  return h;
}

namespace {

// Measures below this fraction of diameter^dim count as degenerate.
constexpr double kDegenerateTol = 1e-12;

bool is_degenerate(const Mesh& mesh, Index e, double measure) {
  const double h = element_diameter(mesh, e);
  return measure <= kDegenerateTol * std::pow(h, mesh.dim);
}

Index grid_index(const std::array<Index, 3>& ijk, Index n, int dim) {
  Index id = ijk[0] + (n + 1) * ijk[1];
  if (dim == 3) id += (n + 1) * (n + 1) * ijk[2];
  return id;
}

Mesh build_box(const GenerateSpec& spec, double jitter, std::uint64_t stream) {
  const Index n = spec.subdivisions;
  const int dim = spec.dim;
  const double h = spec.extent / static_cast<double>(n);
  Mesh mesh;
  mesh.dim = dim;

  const Index layers = dim == 3 ? n + 1 : 1;
  std::vector<std::array<Index, 3>> ijk_of;
  for (Index k = 0; k < layers; ++k) {
    for (Index j = 0; j <= n; ++j) {
      for (Index i = 0; i <= n; ++i) {
        mesh.nodes.emplace_back(i * h, j * h, dim == 3 ? k * h : 0.0);
        ijk_of.push_back({i, j, k});
      }
    }
  }

  const double lo = 0.5 * (spec.extent - spec.source_extent);
  const double hi = 0.5 * (spec.extent + spec.source_extent);
  auto add_element = [&](std::array<Index, 4> el) {
    mesh.elements.push_back(el);
    const Index e = mesh.num_elements() - 1;
    if (signed_measure(mesh, e) < 0.0) std::swap(mesh.elements[e][0], mesh.elements[e][1]);
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (Index v : mesh.element_nodes(e)) c += mesh.nodes[v];
    c /= static_cast<double>(dim + 1);
    bool inside = true;
    for (int d = 0; d < dim; ++d) inside = inside && c[d] > lo && c[d] < hi;
    mesh.material_id.push_back(inside ? kRegionSource : kRegionOuter);
  };

  if (dim == 2) {
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) {
        const Index n00 = grid_index({i, j, 0}, n, 2);
        const Index n10 = grid_index({i + 1, j, 0}, n, 2);
        const Index n01 = grid_index({i, j + 1, 0}, n, 2);
        const Index n11 = grid_index({i + 1, j + 1, 0}, n, 2);
        add_element({n00, n10, n11, -1});
        add_element({n00, n11, n01, -1});
      }
    }
  } else {
    static constexpr std::array<std::array<int, 3>, 6> kPerms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (Index k = 0; k < n; ++k) {
      for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
          for (const auto& perm : kPerms) {
            std::array<Index, 3> cur{i, j, k};
            std::array<Index, 4> el{};
            el[0] = grid_index(cur, n, 3);
            for (int step = 0; step < 3; ++step) {
              ++cur[perm[step]];
              el[step + 1] = grid_index(cur, n, 3);
            }
            add_element(el);
          }
        }
      }
    }
  }

  // One tag per box side: 1/2 for x = 0/L, 3/4 for y, 5/6 for z.
  const int face_nodes = dim;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element_nodes(e);
    for (int skip = 0; skip <= dim; ++skip) {
      std::array<Index, 3> f{-1, -1, -1};
      int m = 0;
      for (int a = 0; a <= dim; ++a) {
        if (a != skip) f[m++] = nodes[a];
      }
      for (int d = 0; d < dim; ++d) {
        for (Index side : {Index{0}, n}) {
          bool on = true;
          for (int a = 0; a < face_nodes; ++a) on = on && ijk_of[f[a]][d] == side;
          if (on) {
            mesh.boundary_tag[make_face_key({f.data(), static_cast<std::size_t>(face_nodes)})] =
                2 * d + (side == 0 ? 1 : 2);
          }
        }
      }
    }
  }

  // Orientation and regions come from the lattice; jitter moves interior nodes only.
  if (jitter > 0.0) {
    CounterRng rng(spec.seed, stream);
    for (Index v = 0; v < mesh.num_nodes(); ++v) {
      const auto& ijk = ijk_of[v];
      bool interior = true;
      for (int d = 0; d < dim; ++d) interior = interior && ijk[d] > 0 && ijk[d] < n;
      if (!interior) continue;
      for (int d = 0; d < dim; ++d) mesh.nodes[v][d] += rng.uniform(-jitter, jitter) * h;
    }
  }
  return mesh;
}

}  // namespace

Mesh generate_mesh(const GenerateSpec& spec) {
  if (spec.dim != 2 && spec.dim != 3) throw ConfigError("generate_mesh: dim must be 2 or 3");
  if (spec.subdivisions < 1) throw ConfigError("generate_mesh: subdivisions must be >= 1");
  if (spec.jitter < 0.0 || spec.jitter >= 0.5) {
    throw ConfigError("generate_mesh: jitter must lie in [0, 0.5) cell widths");
  }
  double jitter = spec.jitter;
  for (std::uint64_t attempt = 0; attempt < 5; ++attempt) {
    Mesh mesh = build_box(spec, jitter, attempt);
    bool ok = true;
    for (Index e = 0; e < mesh.num_elements() && ok; ++e) {
      ok = !is_degenerate(mesh, e, signed_measure(mesh, e));
    }
    if (ok) return mesh;
    jitter *= 0.5;
  }
  throw DegenerateElementError(-1, "generate_mesh: jitter inverts elements after 5 attempts");
}

GeometryMeasures geometry_measures(const Mesh& mesh) {
  GeometryMeasures g;
  g.element_volume.resize(mesh.elements.size());
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const double m = signed_measure(mesh, e);
    if (is_degenerate(mesh, e, m)) {
      throw DegenerateElementError(
          e, "degenerate element " + std::to_string(e) + " (measure " + std::to_string(m) + ")");
    }
    g.element_volume[e] = m;
  }
  return g;
}

void validate(const Mesh& mesh) {
  if (mesh.dim != 2 && mesh.dim != 3) throw TopologyError("mesh dimension must be 2 or 3");
  if (mesh.material_id.size() != mesh.elements.size()) {
    throw TopologyError("material_id size does not match element count");
  }
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    for (Index v : mesh.element_nodes(e)) {
      if (v < 0 || v >= mesh.num_nodes()) {
        throw TopologyError("element " + std::to_string(e) + " references node " +
                            std::to_string(v) + " out of range");
      }
    }
  }
  geometry_measures(mesh);
}

}  // namespace agglomg
