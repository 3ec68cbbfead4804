#include "agglomg/mesh_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "agglomg/solver.hpp"

namespace agglomg {

namespace {

struct RawElement {
  int type;
  int tag;
  std::vector<long long> nodes;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& source, const std::string& what) {
  throw IoError(source + ": " + what);
}

}  // namespace

MshData parse_msh(std::istream& in, const std::string& source) {
  std::string line;
  bool have_format = false;
  std::vector<std::pair<long long, Eigen::Vector3d>> raw_nodes;
  std::vector<RawElement> raw_elements;

  auto next_line = [&](const char* section) {
    if (!std::getline(in, line)) fail(source, std::string("unexpected end of file in ") + section);
    return trim(line);
  };

  while (std::getline(in, line)) {
    const std::string head = trim(line);
    if (head.empty()) continue;
    if (head == "$MeshFormat") {
      std::istringstream fmt(next_line("$MeshFormat"));
      std::string version;
      int file_type = -1;
      fmt >> version >> file_type;
      if (version.empty() || version[0] != '2') {
        fail(source, "unsupported MSH version " + version + " (only 2.2 ASCII is read)");
      }
      if (file_type != 0) fail(source, "binary MSH files are not supported (version " + version + ")");
      have_format = true;
      while (next_line("$MeshFormat") != "$EndMeshFormat") {
      }
    } else if (head == "$Nodes") {
      if (!have_format) fail(source, "$Nodes before $MeshFormat");
      const long long count = std::stoll(next_line("$Nodes"));
      raw_nodes.reserve(static_cast<std::size_t>(count));
      for (long long i = 0; i < count; ++i) {
        std::istringstream row(next_line("$Nodes"));
        long long id;
        Eigen::Vector3d p;
        if (!(row >> id >> p.x() >> p.y() >> p.z())) fail(source, "malformed node line '" + line + "'");
        raw_nodes.emplace_back(id, p);
      }
      if (next_line("$Nodes") != "$EndNodes") fail(source, "missing $EndNodes");
    } else if (head == "$Elements") {
      if (!have_format) fail(source, "$Elements before $MeshFormat");
      const long long count = std::stoll(next_line("$Elements"));
      raw_elements.reserve(static_cast<std::size_t>(count));
      for (long long i = 0; i < count; ++i) {
        std::istringstream row(next_line("$Elements"));
        long long id;
        int type, ntags;
        if (!(row >> id >> type >> ntags) || ntags < 0) {
          fail(source, "malformed element line '" + line + "'");
        }
        RawElement el{type, 0, {}};
        for (int t = 0; t < ntags; ++t) {
          int tag;
          if (!(row >> tag)) fail(source, "malformed element tags in '" + line + "'");
          if (t == 0) el.tag = tag;
        }
        long long v;
        while (row >> v) el.nodes.push_back(v);
        raw_elements.push_back(std::move(el));
      }
      if (next_line("$Elements") != "$EndElements") fail(source, "missing $EndElements");
    } else if (head[0] == '$') {
      const std::string end = "$End" + head.substr(1);
      while (next_line(head.c_str()) != end) {
      }
    }
  }
  if (!have_format) fail(source, "no $MeshFormat section");

  const bool has_tets = std::any_of(raw_elements.begin(), raw_elements.end(),
                                    [](const RawElement& e) { return e.type == 4; });
  MshData out;
  Mesh& mesh = out.mesh;
  mesh.dim = has_tets ? 3 : 2;
  const int volume_type = has_tets ? 4 : 2;
  const int face_type = has_tets ? 2 : 1;
  const std::size_t per_volume = has_tets ? 4 : 3;
  const std::size_t per_face = has_tets ? 3 : 2;

  std::unordered_map<long long, Index> file_to_raw;
  for (std::size_t i = 0; i < raw_nodes.size(); ++i) {
    if (!file_to_raw.emplace(raw_nodes[i].first, static_cast<Index>(i)).second) {
      fail(source, "duplicate node id " + std::to_string(raw_nodes[i].first));
    }
  }
  auto lookup = [&](long long id) {
    auto it = file_to_raw.find(id);
    if (it == file_to_raw.end()) fail(source, "element references unknown node " + std::to_string(id));
    return it->second;
  };

  std::vector<Index> used(raw_nodes.size(), -1);
  std::set<int> regions;
  std::vector<const RawElement*> boundary;
  for (const RawElement& el : raw_elements) {
    if (el.type == volume_type) {
      if (el.nodes.size() != per_volume) fail(source, "element with wrong node count");
      std::array<Index, 4> nodes{-1, -1, -1, -1};
      for (std::size_t a = 0; a < per_volume; ++a) {
        nodes[a] = lookup(el.nodes[a]);
        used[nodes[a]] = 0;
      }
      mesh.elements.push_back(nodes);
      mesh.material_id.push_back(el.tag);
      regions.insert(el.tag);
    } else if (el.type == face_type) {
      if (el.nodes.size() != per_face) fail(source, "boundary element with wrong node count");
      boundary.push_back(&el);
    } else {
      ++out.ignored_elements;
    }
  }
  if (mesh.elements.empty()) fail(source, "no triangle or tetrahedron elements");

  Index next = 0;
  for (std::size_t i = 0; i < raw_nodes.size(); ++i) {
    if (used[i] < 0) {
      ++out.dropped_nodes;
      continue;
    }
    used[i] = next++;
    mesh.nodes.push_back(raw_nodes[i].second);
  }
  for (auto& el : mesh.elements) {
    for (std::size_t a = 0; a < per_volume; ++a) el[a] = used[el[a]];
  }

  std::set<FaceKey> volume_faces;
  if (has_tets) {
    for (Index e = 0; e < mesh.num_elements(); ++e) {
      const auto n = mesh.element_nodes(e);
      for (int skip = 0; skip < 4; ++skip) {
        std::array<Index, 3> f{};
        int m = 0;
        for (int a = 0; a < 4; ++a) {
          if (a != skip) f[m++] = n[a];
        }
        volume_faces.insert(make_face_key(f));
      }
    }
  }
  for (const RawElement* el : boundary) {
    std::array<Index, 3> f{-1, -1, -1};
    bool known = true;
    for (std::size_t a = 0; a < per_face; ++a) {
      const Index raw = lookup(el->nodes[a]);
      if (used[raw] < 0) known = false;
      f[a] = known ? used[raw] : -1;
    }
    if (!known || (has_tets && !volume_faces.count(make_face_key({f.data(), per_face})))) {
      if (has_tets) fail(source, "mixed 2D/3D volume elements: a triangle is not a face of any tetrahedron");
      ++out.ignored_elements;
      continue;
    }
    mesh.boundary_tag[make_face_key({f.data(), per_face})] = el->tag;
  }

  for (Index e = 0; e < mesh.num_elements(); ++e) {
    if (signed_measure(mesh, e) < 0.0) {
      std::swap(mesh.elements[e][0], mesh.elements[e][1]);
      ++out.reoriented;
    }
  }
  out.regions.assign(regions.begin(), regions.end());
  validate(mesh);
  return out;
}

MshData read_msh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open file (not found or unreadable)");
  return parse_msh(in, path.string());
}

MaterialTable materials_for_regions(std::span<const int> regions, ProblemKind kind) {
  const MaterialTable ref = reference_materials(kind);
  MaterialTable out;
  for (int r : regions) out[r] = ref.at(r == kRegionSource ? kRegionSource : kRegionOuter);
  return out;
}

void write_vtk(const std::filesystem::path& path, const Mesh& mesh,
               std::span<const std::vector<Index>> levels) {
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (static_cast<Index>(levels[k].size()) != mesh.num_elements()) {
      throw Error("write_vtk: level " + std::to_string(k + 1) + " has " +
                  std::to_string(levels[k].size()) + " entries for " +
                  std::to_string(mesh.num_elements()) + " elements");
    }
    if (std::any_of(levels[k].begin(), levels[k].end(), [](Index a) { return a < 0; })) {
      throw Error("write_vtk: level " + std::to_string(k + 1) + " has unassigned elements");
    }
  }
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.imbue(std::locale::classic());
  out.precision(17);
  out << "# vtk DataFile Version 3.0\nagglomg agglomerates\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  const int npe = mesh.nodes_per_element();
  out << "CELLS " << mesh.num_elements() << ' ' << mesh.num_elements() * (npe + 1) << '\n';
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    out << npe;
    for (Index v : mesh.element_nodes(e)) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.num_elements() << '\n';
  const int cell_type = mesh.dim == 2 ? 5 : 10;
  for (Index e = 0; e < mesh.num_elements(); ++e) out << cell_type << '\n';
  if (!levels.empty()) {
    out << "CELL_DATA " << mesh.num_elements() << '\n';
    for (std::size_t k = 0; k < levels.size(); ++k) {
      out << "SCALARS agglomerate_L" << k + 1 << " int 1\nLOOKUP_TABLE default\n";
      for (Index a : levels[k]) out << a << '\n';
    }
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace

std::string sweep_csv(std::span<const SweepRecord> records) {
  std::string s =
      "algorithm,desired_size,average_size,grid_complexity,node_element_ratio,"
      "average_connectivity,iterations,solve_time_s,setup_time_s,status\n";
  for (const SweepRecord& r : records) {
    s += csv_field(r.algorithm) + ',' + std::to_string(r.desired_size) + ',' + fmt(r.average_size) +
         ',' + fmt(r.grid_complexity) + ',' + fmt(r.node_element_ratio) + ',' +
         fmt(r.average_connectivity) + ',' + std::to_string(r.iterations) + ',' +
         fmt(r.solve_time_s) + ',' + fmt(r.setup_time_s) + ',' + csv_field(r.status) + '\n';
  }
  return s;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRecord> records) {
  write_text(path, sweep_csv(records));
}

std::string report_json(const SolveReport& report) {
  nlohmann::json j;
  j["problem"] = report.problem;
  j["algorithm"] = report.algorithm;
  j["levels"] = report.levels;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["final_residual"] = report.final_residual();
  j["setup_time_s"] = report.setup_time_s;
  j["solve_time_s"] = report.solve_time_s;
  j["grid_complexity"] = report.grid_complexity;
  j["operator_complexity"] = report.operator_complexity;
  j["average_agglomerate_size"] = report.average_agglomerate_size;
  j["residuals"] = report.residuals;
  j["metadata"] = {{"setup_includes_galerkin_products", true}};
  return j.dump(2) + "\n";
}

void write_report_json(const std::filesystem::path& path, const SolveReport& report) {
  write_text(path, report_json(report));
}

}  // namespace agglomg
