#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agglomg/common.hpp"
#include "agglomg/mesh.hpp"

namespace agglomg {

struct SolveReport;

struct MshData {
  Mesh mesh;
  std::vector<int> regions;     // distinct physical tags of the volume elements
  Index ignored_elements = 0;   // element types other than lines, triangles, tetrahedra
  Index dropped_nodes = 0;      // nodes referenced by no imported element
  Index reoriented = 0;         // elements whose node order was flipped
};

/// gmsh MSH 2.2 ASCII reader.  Triangles (2D) or tetrahedra (3D) become
/// elements with material_id = physical tag; lower-dimensional elements
/// with a physical tag mark boundary faces.
MshData read_msh(const std::filesystem::path& path);
MshData parse_msh(std::istream& in, const std::string& source_name = "<stream>");

/// Region 1 takes the source-region material, every other region the outer one.
MaterialTable materials_for_regions(std::span<const int> regions, ProblemKind kind);

/// Legacy ASCII VTK with one CELL_DATA array "agglomerate_L<k>" per entry of
/// `levels` (k = 1, 2, ...), each giving the agglomerate of every fine element.
void write_vtk(const std::filesystem::path& path, const Mesh& mesh,
               std::span<const std::vector<Index>> levels);

struct SweepRecord {
  std::string algorithm;
  Index desired_size = 0;
  double average_size = 0.0;
  double grid_complexity = 1.0;
  double node_element_ratio = 0.0;
  double average_connectivity = 0.0;
  int iterations = -1;  // -1 when no solve was run
  double solve_time_s = 0.0;
  double setup_time_s = 0.0;
  std::string status = "ok";
};

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRecord> records);
std::string sweep_csv(std::span<const SweepRecord> records);

void write_report_json(const std::filesystem::path& path, const SolveReport& report);
std::string report_json(const SolveReport& report);

}  // namespace agglomg
