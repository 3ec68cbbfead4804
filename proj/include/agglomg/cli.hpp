#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agglomg/agglomerate.hpp"
#include "agglomg/mesh.hpp"

namespace agglomg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

struct RunConfig {
  std::string command;
  std::string mesh_path;
  Index gen_2d = 0;
  Index gen_3d = 0;
  double jitter = 0.2;
  std::vector<std::string> algorithms{"sizebased"};
  std::optional<Index> size;
  std::vector<Index> sizes;
  std::optional<Index> lower_size;
  std::uint64_t seed = 0;
  std::string problem = "diffuse";
  std::string csv_path;
  std::string vtk_path;
  std::string json_path;
  int jobs = 1;
  bool sweep_solve = false;
  Index stop_nodes = 60;
  int max_levels = 10;
  int smoother_applications = 3;
  int max_iterations = 500;

  /// key=value lines accepted back by --config.
  std::string echo() const;
};

/// Parses arguments (argv[0] excluded).  Throws ConfigError on bad usage.
RunConfig parse_args(const std::vector<std::string>& args);

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace agglomg
