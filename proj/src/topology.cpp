#include "agglomg/topology.hpp"

#include <algorithm>
#include <string>
#include <tuple>

namespace agglomg {

Index Topology::num_interior_faces() const {
  return static_cast<Index>(
      std::count_if(faces.begin(), faces.end(), [](const Face& f) { return !f.is_boundary(); }));
}

namespace {

std::string describe(const FaceKey& key) {
  std::string s = "(";
  for (Index v : key) {
    if (v < 0) break;
    if (s.size() > 1) s += ",";
    s += std::to_string(v);
  }
  return s + ")";
}

void sorted_unique(std::vector<Index>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

void finalize_topology(Topology& topo) {
  const Index nf = topo.num_faces();

  std::vector<std::pair<Index, Index>> ef;
  ef.reserve(static_cast<std::size_t>(nf) * 2);
  for (Index f = 0; f < nf; ++f) {
    ef.emplace_back(topo.faces[f].left, f);
    if (!topo.faces[f].is_boundary()) ef.emplace_back(topo.faces[f].right, f);
  }
  topo.element_faces = Csr::from_pairs(topo.num_elements, ef);

  topo.ridge_faces = topo.face_ridges.transpose(topo.num_ridges);
  Csr neighbors;
  std::vector<Index> scratch;
  for (Index f = 0; f < nf; ++f) {
    scratch.clear();
    for (Index r : topo.face_ridges[f]) {
      for (Index g : topo.ridge_faces[r]) {
        if (g != f) scratch.push_back(g);
      }
    }
    sorted_unique(scratch);
    neighbors.push_row(scratch);
  }
  topo.face_neighbors = std::move(neighbors);

  // Dual graph: one edge per neighbouring element pair, weights summed over faces.
  struct Link {
    Index a, b;
    double area;
  };
  std::vector<Link> links;
  for (const Face& f : topo.faces) {
    if (f.is_boundary()) continue;
    links.push_back({f.left, f.right, f.area});
    links.push_back({f.right, f.left, f.area});
  }
  std::sort(links.begin(), links.end(),
            [](const Link& x, const Link& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  DualGraph dual;
  dual.vertex_weight = topo.element_volume;
  std::vector<std::pair<Index, Index>> adj;
  for (std::size_t i = 0; i < links.size();) {
    std::size_t j = i;
    double area = 0.0;
    while (j < links.size() && links[j].a == links[i].a && links[j].b == links[i].b) {
      area += links[j].area;
      ++j;
    }
    adj.emplace_back(links[i].a, links[i].b);
    dual.edge_weight.push_back(area);
    dual.edge_faces.push_back(static_cast<Index>(j - i));
    i = j;
  }
  dual.adjacency = Csr::from_pairs(topo.num_elements, adj);
  topo.dual = std::move(dual);
}

Topology build_topology(const Mesh& mesh) {
  validate(mesh);
  const int dim = mesh.dim;
  const Index ne = mesh.num_elements();
  Topology topo;
  topo.dim = dim;
  topo.num_elements = ne;
  topo.num_nodes = mesh.num_nodes();
  topo.element_volume = geometry_measures(mesh).element_volume;

  for (Index e = 0; e < ne; ++e) topo.element_nodes.push_row(mesh.element_nodes(e));
  topo.node_elements = topo.element_nodes.transpose(topo.num_nodes);
  topo.node_fine_id.resize(static_cast<std::size_t>(topo.num_nodes));
  for (Index v = 0; v < topo.num_nodes; ++v) topo.node_fine_id[v] = v;

  // Faces: every (dim)-node subset of every element, grouped by sorted key.
  std::vector<std::pair<FaceKey, Index>> local;
  local.reserve(static_cast<std::size_t>(ne) * (dim + 1));
  for (Index e = 0; e < ne; ++e) {
    const auto nodes = mesh.element_nodes(e);
    for (int skip = 0; skip <= dim; ++skip) {
      std::array<Index, 3> f{-1, -1, -1};
      int m = 0;
      for (int a = 0; a <= dim; ++a) {
        if (a != skip) f[m++] = nodes[a];
      }
      local.emplace_back(make_face_key({f.data(), static_cast<std::size_t>(dim)}), e);
    }
  }
  std::sort(local.begin(), local.end());
  std::vector<FaceKey> face_keys;
  for (std::size_t i = 0; i < local.size();) {
    std::size_t j = i;
    while (j < local.size() && local[j].first == local[i].first) ++j;
    if (j - i > 2) {
      throw TopologyError("non-conforming mesh: face " + describe(local[i].first) + " shared by " +
                          std::to_string(j - i) + " elements");
    }
    Face face;
    face.left = local[i].second;
    const FaceKey& key = local[i].first;
    const std::span<const Index> fn{key.data(), static_cast<std::size_t>(dim)};
    face.area = face_measure(mesh, fn);
    if (j - i == 2) {
      face.right = local[i + 1].second;
    } else {
      auto it = mesh.boundary_tag.find(key);
      face.tag = it == mesh.boundary_tag.end() ? 0 : it->second;
    }
    topo.faces.push_back(face);
    topo.face_nodes.push_row(fn);
    face_keys.push_back(key);
    i = j;
  }
  std::vector<char> on_boundary(static_cast<std::size_t>(topo.num_nodes), 0);
  for (Index f = 0; f < topo.num_faces(); ++f) {
    if (!topo.faces[f].is_boundary()) continue;
    for (Index v : topo.face_nodes[f]) on_boundary[v] = 1;
  }
  topo.node_on_boundary = std::move(on_boundary);

  if (dim == 2) {
    topo.num_ridges = topo.num_nodes;
    topo.face_ridges = topo.face_nodes;
  } else {
    using EdgeKey = std::pair<Index, Index>;
    std::vector<std::pair<EdgeKey, Index>> incid;
    incid.reserve(static_cast<std::size_t>(ne) * 6);
    for (Index e = 0; e < ne; ++e) {
      const auto n = mesh.element_nodes(e);
      for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) {
          incid.emplace_back(EdgeKey{std::min(n[a], n[b]), std::max(n[a], n[b])}, e);
        }
      }
    }
    std::sort(incid.begin(), incid.end());
    std::vector<EdgeKey> edges;
    std::vector<std::pair<Index, Index>> edge_elem;
    for (std::size_t i = 0; i < incid.size();) {
      std::size_t j = i;
      const Index id = static_cast<Index>(edges.size());
      edges.push_back(incid[i].first);
      while (j < incid.size() && incid[j].first == incid[i].first) {
        edge_elem.emplace_back(id, incid[j].second);
        ++j;
      }
      i = j;
    }
    const Index nedge = static_cast<Index>(edges.size());
    for (const auto& [a, b] : edges) topo.edge_nodes.push_row({a, b});
    topo.edge_elements = Csr::from_pairs(nedge, edge_elem);
    auto edge_id = [&](Index a, Index b) {
      const EdgeKey key{std::min(a, b), std::max(a, b)};
      return static_cast<Index>(std::lower_bound(edges.begin(), edges.end(), key) - edges.begin());
    };
    for (const FaceKey& key : face_keys) {
      topo.face_edges.push_row(
          {edge_id(key[0], key[1]), edge_id(key[0], key[2]), edge_id(key[1], key[2])});
    }
    topo.has_edges = true;
    topo.edge_faces = topo.face_edges.transpose(nedge);
    topo.element_edges = topo.edge_elements.transpose(ne);
    topo.node_edges = topo.edge_nodes.transpose(topo.num_nodes);
    topo.num_ridges = nedge;
    topo.face_ridges = topo.face_edges;
  }

  finalize_topology(topo);
  return topo;
}

MeshMetrics mesh_metrics(const Topology& topo) {
  if (topo.num_elements == 0 || topo.num_nodes == 0) {
    throw Error("mesh_metrics: empty mesh");
  }
  MeshMetrics m;
  m.num_nodes = topo.num_nodes;
  m.num_elements = topo.num_elements;
  m.num_faces = topo.num_faces();
  m.node_element_ratio = static_cast<double>(topo.num_nodes) / topo.num_elements;
  m.average_connectivity = static_cast<double>(topo.element_nodes.total()) / topo.num_nodes;
  return m;
}

}  // namespace agglomg
