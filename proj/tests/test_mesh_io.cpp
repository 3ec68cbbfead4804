#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "agglomg/mesh_io.hpp"
#include "agglomg/solver.hpp"
#include "agglomg/topology.hpp"
#include "helpers.hpp"

using namespace agglomg;
namespace fs = std::filesystem;

namespace {

fs::path data(const char* name) { return fs::path(AGGLOMG_TEST_DATA) / name; }

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "agglomg_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("single triangle") {
  const MshData d = read_msh(data("single_triangle.msh"));
  CHECK(d.mesh.dim == 2);
  CHECK(d.mesh.num_elements() == 1);
  CHECK(d.mesh.num_nodes() == 3);
  CHECK(d.mesh.material_id[0] == 7);
  CHECK(d.regions == std::vector<int>{7});
  CHECK(d.ignored_elements == 0);
  CHECK(d.reoriented == 0);
}

TEST_CASE("tetrahedron with one tagged face") {
  const MshData d = read_msh(data("tet_with_face.msh"));
  CHECK(d.mesh.dim == 3);
  CHECK(d.mesh.num_elements() == 1);
  CHECK(d.reoriented == 1);
  CHECK(signed_measure(d.mesh, 0) > 0.0);
  CHECK(d.mesh.boundary_tag.size() == 1);
  CHECK(d.mesh.boundary_tag.begin()->second == 3);
  const Topology t = build_topology(d.mesh);
  int tagged = 0, untagged = 0;
  for (const Face& f : t.faces) {
    tagged += f.tag == 3;
    untagged += f.tag == 0;
  }
  CHECK(tagged == 1);
  CHECK(untagged == 3);
}

TEST_CASE("square with unsupported element types") {
  const MshData d = read_msh(data("square_mixed_types.msh"));
  CHECK(d.mesh.dim == 2);
  CHECK(d.mesh.num_elements() == 2);
  CHECK(d.ignored_elements == 2);
  CHECK(d.reoriented == 1);
  CHECK(d.regions == std::vector<int>{1, 2});
  CHECK(d.mesh.boundary_tag.size() == 4);
  CHECK_NOTHROW(validate(d.mesh));
  const auto mats = materials_for_regions(d.regions, ProblemKind::diffuse);
  CHECK(mats.at(1).source == 1.0);
  CHECK(mats.at(2).source == 0.0);
}

TEST_CASE("reader errors") {
  CHECK_THROWS_AS(read_msh(data("version41.msh")), IoError);
  CHECK_THROWS_AS(read_msh(data("mixed_dimensions.msh")), IoError);
  try {
    read_msh(data("no_such_file.msh"));
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("no_such_file.msh") != std::string::npos);
  }
  std::istringstream truncated("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n");
  CHECK_THROWS_AS(parse_msh(truncated), IoError);
}

TEST_CASE("orphan nodes are dropped") {
  std::istringstream in(
      "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 9 9 0\n3 1 0 0\n4 0 1 0\n"
      "$EndNodes\n$Elements\n1\n1 2 2 1 1 1 3 4\n$EndElements\n");
  const MshData d = parse_msh(in);
  CHECK(d.dropped_nodes == 1);
  CHECK(d.mesh.num_nodes() == 3);
}

TEST_CASE("vtk output carries one array per level") {
  const Mesh m = testing::square(2);
  const std::vector<std::vector<Index>> levels{{0, 0, 1, 1, 2, 2, 3, 3}, {0, 0, 0, 0, 0, 0, 0, 0}};
  const fs::path p = scratch("levels.vtk");
  write_vtk(p, m, levels);
  const std::string s = slurp(p);
  CHECK(s.rfind("# vtk DataFile Version", 0) == 0);
  CHECK(s.find("POINTS 9") != std::string::npos);
  CHECK(s.find("CELLS 8 32") != std::string::npos);
  CHECK(s.find("CELL_DATA 8") != std::string::npos);
  CHECK(s.find("agglomerate_L1") != std::string::npos);
  CHECK(s.find("agglomerate_L2") != std::string::npos);
  CHECK(s.find("agglomerate_L3") == std::string::npos);

  write_vtk(p, m, std::span<const std::vector<Index>>{});
  CHECK(slurp(p).find("agglomerate_L") == std::string::npos);

  const std::vector<std::vector<Index>> bad{{0, 0, -1, 1, 2, 2, 3, 3}};
  CHECK_THROWS(write_vtk(p, m, bad));
}

TEST_CASE("sweep csv") {
  CHECK(sweep_csv({}) ==
        "algorithm,desired_size,average_size,grid_complexity,node_element_ratio,"
        "average_connectivity,iterations,solve_time_s,setup_time_s,status\n");
  SweepRecord r;
  r.algorithm = "greedy";
  r.desired_size = 24;
  r.average_size = 23.5;
  const std::vector<SweepRecord> rows{r};
  const std::string csv = sweep_csv(rows);
  const std::string line = csv.substr(csv.find('\n') + 1);
  CHECK(line.rfind("greedy,24,23.5,1,0,0,-1,0,0,ok", 0) == 0);
}

TEST_CASE("report json") {
  SolveReport r;
  r.problem = "diffuse";
  r.algorithm = "jones";
  r.iterations = 3;
  r.converged = true;
  r.residuals = {1.0, 1e-3, 1e-11};
  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j.at("iterations") == 3);
  CHECK(j.at("converged") == true);
  CHECK(j.at("residuals").size() == 3);
  CHECK(j.at("algorithm") == "jones");
}
