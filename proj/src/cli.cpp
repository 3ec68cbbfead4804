#include "agglomg/cli.hpp"

#include <atomic>
#include <chrono>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "agglomg/hierarchy.hpp"
#include "agglomg/mesh_io.hpp"
#include "agglomg/solver.hpp"
#include "agglomg/topology.hpp"

namespace agglomg {

std::string RunConfig::echo() const {
  std::ostringstream o;
  o << "# agglomg " << command << "\n";
  if (!mesh_path.empty()) o << "mesh=\"" << mesh_path << "\"\n";
  if (gen_2d > 0) o << "gen-2d=" << gen_2d << "\n";
  if (gen_3d > 0) o << "gen-3d=" << gen_3d << "\n";
  o << "jitter=" << jitter << "\n";
  o << "alg=[";
  for (std::size_t i = 0; i < algorithms.size(); ++i) o << (i ? "," : "") << '"' << algorithms[i] << '"';
  o << "]\n";
  if (size) o << "size=" << *size << "\n";
  if (!sizes.empty()) {
    o << "sizes=[";
    for (std::size_t i = 0; i < sizes.size(); ++i) o << (i ? "," : "") << sizes[i];
    o << "]\n";
  }
  if (lower_size) o << "lower-size=" << *lower_size << "\n";
  o << "seed=" << seed << "\n";
  o << "problem=\"" << problem << "\"\n";
  if (!csv_path.empty()) o << "csv=\"" << csv_path << "\"\n";
  if (!vtk_path.empty()) o << "vtk=\"" << vtk_path << "\"\n";
  if (!json_path.empty()) o << "json=\"" << json_path << "\"\n";
  o << "jobs=" << jobs << "\n";
  if (sweep_solve) o << "solve=true\n";
  o << "stop-nodes=" << stop_nodes << "\n";
  o << "max-levels=" << max_levels << "\n";
  o << "smooth-apps=" << smoother_applications << "\n";
  o << "max-iterations=" << max_iterations << "\n";
  return o.str();
}

namespace {

void build_app(CLI::App& app, RunConfig& c) {
  app.description("Element-agglomeration multigrid coarsening and solves");
  app.add_option("command", c.command, "coarsen | sweep | solve | export")
      ->required()
      ->check(CLI::IsMember({"coarsen", "sweep", "solve", "export"}));
  app.add_option("--mesh", c.mesh_path, "gmsh MSH 2.2 ASCII mesh");
  app.add_option("--gen-2d", c.gen_2d, "generate a 2D box mesh with N subdivisions per side");
  app.add_option("--gen-3d", c.gen_3d, "generate a 3D box mesh with N subdivisions per side");
  app.add_option("--jitter", c.jitter, "node jitter of generated meshes (cell widths)");
  app.add_option("--alg", c.algorithms, "algorithm(s): jones kraus rgb node greedy sizebased aspect, or all")
      ->delimiter(',');
  app.add_option("--size", c.size, "desired top-grid agglomerate size");
  app.add_option("--sizes", c.sizes, "top-grid sizes for sweep (comma separated)")->delimiter(',');
  app.add_option("--lower-size", c.lower_size, "desired agglomerate size on lower grids");
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--problem", c.problem, "diffuse | absorbing")
      ->check(CLI::IsMember({"diffuse", "absorbing"}));
  app.add_option("--csv", c.csv_path, "sweep CSV output");
  app.add_option("--vtk", c.vtk_path, "VTK output with per-level agglomerate ids");
  app.add_option("--json", c.json_path, "solve report JSON output");
  app.add_option("--jobs", c.jobs, "concurrent sweep configurations")->check(CLI::PositiveNumber);
  app.add_flag("--solve", c.sweep_solve, "sweep: also solve each configuration");
  app.add_option("--stop-nodes", c.stop_nodes, "stop coarsening at or below this many nodes");
  app.add_option("--max-levels", c.max_levels, "maximum number of levels");
  app.add_option("--smooth-apps", c.smoother_applications, "smoother applications per pre/post smooth")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-iterations", c.max_iterations, "FGMRES iteration limit")
      ->check(CLI::PositiveNumber);
  app.set_config("--config", "", "file of key=value lines with the same keys as the flags");
}

std::vector<Algorithm> algorithms_of(const RunConfig& c) {
  std::vector<Algorithm> out;
  for (const auto& name : c.algorithms) {
    if (name == "all") {
      out.insert(out.end(), kAllAlgorithms.begin(), kAllAlgorithms.end());
    } else {
      out.push_back(parse_algorithm(name));
    }
  }
  if (out.empty()) throw ConfigError("no algorithm given (--alg)");
  return out;
}

struct Input {
  Mesh mesh;
  MaterialTable materials;
};

Input load_input(const RunConfig& c, ProblemKind kind, std::ostream& err) {
  Input in;
  if (!c.mesh_path.empty()) {
    MshData data = read_msh(c.mesh_path);
    if (data.ignored_elements > 0) {
      err << "warning: ignored " << data.ignored_elements << " elements of unsupported type\n";
    }
    in.materials = materials_for_regions(data.regions, kind);
    in.mesh = std::move(data.mesh);
  } else {
    GenerateSpec gs;
    gs.dim = c.gen_3d > 0 ? 3 : 2;
    gs.subdivisions = c.gen_3d > 0 ? c.gen_3d : c.gen_2d;
    gs.jitter = c.jitter;
    gs.seed = c.seed;
    in.mesh = generate_mesh(gs);
    in.materials = reference_materials(kind);
  }
  return in;
}

HierarchyConfig hierarchy_config(const RunConfig& c, Algorithm alg, std::optional<Index> top) {
  HierarchyConfig hc;
  hc.coarsen.algorithm = alg;
  hc.coarsen.seed = c.seed;
  hc.schedule.top = top;
  hc.schedule.lower = c.lower_size;
  hc.stop.max_coarse_nodes = c.stop_nodes;
  hc.stop.max_levels = c.max_levels;
  return hc;
}

void warn_size(const RunConfig& c, Algorithm alg, std::ostream& err) {
  if ((c.size || !c.sizes.empty()) && !uses_size(alg)) {
    err << "warning: --size is ignored for " << to_string(alg)
        << " (it has no desired agglomerate size)\n";
  }
}

int cmd_coarsen(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto algs = algorithms_of(c);
  const Input in = load_input(c, parse_problem(c.problem), err);
  for (Algorithm alg : algs) {
    warn_size(c, alg, err);
    const Hierarchy h = build_hierarchy(in.mesh, in.materials, hierarchy_config(c, alg, c.size));
    out << "algorithm " << to_string(alg) << "\n";
    out << std::left << std::setw(6) << "level" << std::right << std::setw(10) << "elements"
        << std::setw(10) << "nodes" << std::setw(14) << "coarse_faces" << std::setw(10) << "avg_size"
        << std::setw(12) << "grid_cplx" << "\n";
    double nodes_sum = 0.0;
    const double fine_nodes = h.levels.front().topo.num_nodes;
    for (int l = 0; l < h.num_levels(); ++l) {
      const GridLevel& lev = h.levels[l];
      nodes_sum += lev.topo.num_nodes;
      const double avg = l == 0 ? 1.0
                                : static_cast<double>(lev.agg.num_elements()) / lev.agg.num_aggregates;
      out << std::left << std::setw(6) << l << std::right << std::setw(10) << lev.topo.num_elements
          << std::setw(10) << lev.topo.num_nodes << std::setw(14)
          << (l == 0 ? lev.topo.num_boundary_faces() + lev.topo.num_interior_faces() : lev.num_coarse_faces)
          << std::setw(10) << std::fixed << std::setprecision(2) << avg << std::setw(12)
          << std::setprecision(4) << nodes_sum / fine_nodes << "\n";
      out.unsetf(std::ios::fixed);
    }
    if (!c.vtk_path.empty()) {
      std::vector<std::vector<Index>> maps;
      for (int l = 1; l < h.num_levels(); ++l) maps.push_back(h.fine_element_map(l));
      write_vtk(c.vtk_path, in.mesh, maps);
    }
  }
  return kExitOk;
}

int cmd_export(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.vtk_path.empty()) throw ConfigError("export needs --vtk PATH");
  const auto algs = algorithms_of(c);
  if (algs.size() != 1) throw ConfigError("export takes exactly one algorithm");
  warn_size(c, algs.front(), err);
  const Input in = load_input(c, parse_problem(c.problem), err);
  const Hierarchy h = build_hierarchy(in.mesh, in.materials, hierarchy_config(c, algs.front(), c.size));
  std::vector<std::vector<Index>> maps;
  for (int l = 1; l < h.num_levels(); ++l) maps.push_back(h.fine_element_map(l));
  write_vtk(c.vtk_path, in.mesh, maps);
  out << "wrote " << c.vtk_path << " (" << maps.size() << " agglomerate levels)\n";
  return kExitOk;
}

int cmd_solve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto algs = algorithms_of(c);
  if (algs.size() != 1) throw ConfigError("solve takes exactly one algorithm");
  warn_size(c, algs.front(), err);
  const ProblemKind kind = parse_problem(c.problem);
  const Input in = load_input(c, kind, err);
  ProblemSpec spec = reference_problem(kind);
  spec.materials = in.materials;
  SolveOptions opts;
  opts.hierarchy = hierarchy_config(c, algs.front(), c.size);
  opts.smoother.applications = c.smoother_applications;
  opts.krylov.max_iterations = c.max_iterations;
  const SolveReport r = solve_problem(in.mesh, spec, opts);
  out << "problem " << r.problem << ", algorithm " << r.algorithm << "\n"
      << "levels " << r.levels << ", grid complexity " << r.grid_complexity
      << ", operator complexity " << r.operator_complexity << "\n"
      << "iterations " << r.iterations << ", final relative residual " << r.final_residual()
      << (r.converged ? " (converged)" : " (NOT converged)") << "\n"
      << "setup " << r.setup_time_s << " s, solve " << r.solve_time_s << " s\n";
  if (!c.json_path.empty()) write_report_json(c.json_path, r);
  return r.converged ? kExitOk : kExitNotConverged;
}

SweepRecord sweep_one(const RunConfig& c, const Input& in, Algorithm alg, Index size) {
  SweepRecord rec;
  rec.algorithm = std::string(to_string(alg));
  rec.desired_size = size;
  try {
    const HierarchyConfig hc = hierarchy_config(c, alg, size);
    const auto t0 = std::chrono::steady_clock::now();
    Hierarchy h = build_hierarchy(in.mesh, in.materials, hc);
    rec.setup_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.grid_complexity = grid_complexity(h);
    if (h.num_levels() > 1) {
      const Agglomeration& agg = h.levels[1].agg;
      rec.average_size = static_cast<double>(agg.num_elements()) / agg.num_aggregates;
      const MeshMetrics m = mesh_metrics(h.levels[1].topo);
      rec.node_element_ratio = m.node_element_ratio;
      rec.average_connectivity = m.average_connectivity;
    } else {
      rec.average_size = 1.0;
      const MeshMetrics m = mesh_metrics(h.levels[0].topo);
      rec.node_element_ratio = m.node_element_ratio;
      rec.average_connectivity = m.average_connectivity;
    }
    if (c.sweep_solve) {
      ProblemSpec spec = reference_problem(parse_problem(c.problem));
      spec.materials = in.materials;
      SolveOptions opts;
      opts.hierarchy = hc;
      opts.smoother.applications = c.smoother_applications;
      opts.krylov.max_iterations = c.max_iterations;
      const SolveReport r = solve_problem(in.mesh, spec, opts);
      rec.iterations = r.iterations;
      rec.setup_time_s = r.setup_time_s;
      rec.solve_time_s = r.solve_time_s;
      if (!r.converged) rec.status = "not_converged";
    }
  } catch (const std::exception& e) {
    rec.status = std::string("failed: ") + e.what();
  }
  return rec;
}

int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto algs = algorithms_of(c);
  std::vector<std::pair<Algorithm, Index>> jobs;
  for (Index s : c.sizes) {
    for (Algorithm a : algs) jobs.emplace_back(a, s);
  }
  std::vector<SweepRecord> records(jobs.size());
  if (!jobs.empty()) {
    const Input in = load_input(c, parse_problem(c.problem), err);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        records[i] = sweep_one(c, in, jobs[i].first, jobs[i].second);
      }
    };
    const int nthreads = std::max(1, std::min<int>(c.jobs, static_cast<int>(jobs.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }
  if (c.csv_path.empty()) {
    out << sweep_csv(records);
  } else {
    write_sweep_csv(c.csv_path, records);
    out << "wrote " << c.csv_path << " (" << records.size() << " rows)\n";
  }
  for (const auto& r : records) {
    if (r.status.rfind("failed", 0) == 0) err << "warning: " << r.algorithm << " s=" << r.desired_size << " " << r.status << "\n";
  }
  return kExitOk;
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
  RunConfig c;
  CLI::App app{"agglomg"};
  build_app(app, c);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  app.parse(reversed);
  const int sources = (c.mesh_path.empty() ? 0 : 1) + (c.gen_2d > 0 ? 1 : 0) + (c.gen_3d > 0 ? 1 : 0);
  if (sources != 1) throw ConfigError("give exactly one mesh source: --mesh, --gen-2d or --gen-3d");
  algorithms_of(c);
  if (c.command == "sweep" && c.sizes.empty() && c.size) c.sizes.push_back(*c.size);
  return c;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  try {
    c = parse_args(args);
  } catch (const CLI::CallForHelp&) {
    CLI::App app{"agglomg"};
    RunConfig dummy;
    build_app(app, dummy);
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  out << c.echo();
  try {
    if (c.command == "coarsen") return cmd_coarsen(c, out, err);
    if (c.command == "sweep") return cmd_sweep(c, out, err);
    if (c.command == "solve") return cmd_solve(c, out, err);
    return cmd_export(c, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace agglomg
