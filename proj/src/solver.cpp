#include "agglomg/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SparseCholesky>

namespace agglomg {

ProblemSpec reference_problem(ProblemKind kind) {
  ProblemSpec spec;
  spec.kind = kind;
  spec.materials = reference_materials(kind);
  if (kind == ProblemKind::absorbing) spec.velocity = Eigen::Vector3d(1.0, 0.0, 0.0);
  return spec;
}

std::string_view to_string(ProblemKind kind) {
  return kind == ProblemKind::diffuse ? "diffuse" : "absorbing";
}

ProblemKind parse_problem(std::string_view name) {
  if (name == "diffuse") return ProblemKind::diffuse;
  if (name == "absorbing") return ProblemKind::absorbing;
  throw ConfigError("unknown problem '" + std::string(name) + "' (expected diffuse or absorbing)");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

// Barycentric gradients as columns (dim x dim+1).
Eigen::MatrixXd barycentric_gradients(const Mesh& mesh, Index e) {
  const int d = mesh.dim;
  const auto nodes = mesh.element_nodes(e);
  Eigen::MatrixXd jac(d, d);
  for (int i = 0; i < d; ++i) jac.col(i) = (mesh.nodes[nodes[i + 1]] - mesh.nodes[nodes[0]]).head(d);
  const Eigen::MatrixXd inv = jac.inverse();
  Eigen::MatrixXd grad(d, d + 1);
  for (int i = 0; i < d; ++i) grad.col(i + 1) = inv.row(i).transpose();
  grad.col(0) = -grad.rightCols(d).rowwise().sum();
  return grad;
}

// Consistent P1 mass matrix for unit coefficient.
Eigen::MatrixXd unit_mass(int d, double volume) {
  const int n = d + 1;
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, 1.0);
  m.diagonal().array() += 1.0;
  return m * (volume / ((d + 1) * (d + 2)));
}

std::vector<char> boundary_node_flags(const Mesh& mesh) {
  std::vector<FaceKey> keys;
  keys.reserve(static_cast<std::size_t>(mesh.num_elements()) * (mesh.dim + 1));
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element_nodes(e);
    for (int skip = 0; skip <= mesh.dim; ++skip) {
      std::array<Index, 3> f{-1, -1, -1};
      int m = 0;
      for (int a = 0; a <= mesh.dim; ++a) {
        if (a != skip) f[m++] = nodes[a];
      }
      keys.push_back(make_face_key({f.data(), static_cast<std::size_t>(mesh.dim)}));
    }
  }
  std::sort(keys.begin(), keys.end());
  std::vector<char> flag(static_cast<std::size_t>(mesh.num_nodes()), 0);
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    if (j - i == 1) {
      for (int a = 0; a < mesh.dim; ++a) flag[keys[i][a]] = 1;
    }
    i = j;
  }
  return flag;
}

struct Coefficients {
  std::vector<double> diffusion;
  std::vector<double> absorption;
  std::vector<double> source;  // per element, ignored when nodal_source is set
  const Vector* nodal_source = nullptr;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

LinearSystem assemble_core(const Mesh& mesh, const Coefficients& c) {
  const int d = mesh.dim;
  const int nloc = d + 1;
  const Index n = mesh.num_nodes();
  const Eigen::VectorXd b = c.velocity.head(d);
  const double speed = b.norm();

  std::vector<Eigen::Triplet<double, Index>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * nloc * nloc);
  LinearSystem sys;
  sys.rhs = Vector::Zero(n);
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element_nodes(e);
    const double vol = std::abs(signed_measure(mesh, e));
    const Eigen::MatrixXd grad = barycentric_gradients(mesh, e);
    const Eigen::MatrixXd mass = unit_mass(d, vol);
    Eigen::MatrixXd local = c.diffusion[e] * vol * grad.transpose() * grad + c.absorption[e] * mass;
    Eigen::VectorXd load(nloc);
    if (c.nodal_source != nullptr) {
      Eigen::VectorXd f(nloc);
      for (int i = 0; i < nloc; ++i) f[i] = (*c.nodal_source)[nodes[i]];
      load = mass * f;
    } else {
      load.setConstant(c.source[e] * vol / nloc);
    }
    if (speed > 0.0) {
      const Eigen::VectorXd bgrad = grad.transpose() * b;  // b . grad(phi_j)
      // phi_i (b . grad phi_j), integral of phi_i is vol / (d + 1).
      local += Eigen::VectorXd::Constant(nloc, vol / nloc) * bgrad.transpose();
      const double h = element_diameter(mesh, e);
      const double peclet = speed * h / (2.0 * c.diffusion[e]);
      if (peclet > 1.0) {
        const double tau = h / (2.0 * speed);
        local += tau * vol * bgrad * bgrad.transpose();
        local += tau * c.absorption[e] * (vol / nloc) * bgrad * Eigen::RowVectorXd::Ones(nloc);
        if (c.nodal_source == nullptr) load += tau * c.source[e] * vol * bgrad;
      }
    }
    for (int i = 0; i < nloc; ++i) {
      sys.rhs[nodes[i]] += load[i];
      for (int j = 0; j < nloc; ++j) trip.emplace_back(nodes[i], nodes[j], local(i, j));
    }
  }
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(trip.begin(), trip.end());

  sys.dirichlet = boundary_node_flags(mesh);
  for (Index i = 0; i < n; ++i) {
    if (sys.dirichlet[i]) sys.rhs[i] = 0.0;
    for (SparseMatrix::InnerIterator it(sys.matrix, i); it; ++it) {
      if (it.col() != i && (sys.dirichlet[i] || sys.dirichlet[it.col()])) it.valueRef() = 0.0;
    }
  }
  sys.matrix.prune([](Index, Index, double v) { return v != 0.0; });
  sys.matrix.makeCompressed();
  return sys;
}

}  // namespace

Eigen::MatrixXd element_matrix(const Mesh& mesh, Index element, double diffusion, double absorption) {
  const double vol = std::abs(signed_measure(mesh, element));
  const Eigen::MatrixXd grad = barycentric_gradients(mesh, element);
  return diffusion * vol * grad.transpose() * grad + absorption * unit_mass(mesh.dim, vol);
}

LinearSystem assemble_problem(const Mesh& mesh, const ProblemSpec& spec) {
  Coefficients c;
  const Index ne = mesh.num_elements();
  c.diffusion.resize(static_cast<std::size_t>(ne));
  c.absorption.resize(static_cast<std::size_t>(ne));
  c.source.resize(static_cast<std::size_t>(ne));
  for (Index e = 0; e < ne; ++e) {
    auto it = spec.materials.find(mesh.material_id[e]);
    if (it == spec.materials.end()) {
      throw ConfigError("no material for region " + std::to_string(mesh.material_id[e]));
    }
    const Material& m = it->second;
    if (!(m.sigma_t > 0.0)) {
      throw ConfigError("region " + std::to_string(it->first) +
                        ": sigma_t must be positive (diffusion coefficient 1/(3 sigma_t))");
    }
    c.diffusion[e] = 1.0 / (3.0 * m.sigma_t);
    c.absorption[e] = spec.kind == ProblemKind::diffuse ? m.sigma_t - m.sigma_s : m.sigma_t;
    c.source[e] = m.source;
  }
  if (spec.kind == ProblemKind::absorbing) c.velocity = spec.velocity;
  return assemble_core(mesh, c);
}

SolveReport fgmres(const SparseMatrix& a, const Vector& b, Vector& x, const Preconditioner& precond,
                   const KrylovOptions& options) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw Error("fgmres: dimension mismatch");
  const Index n = static_cast<Index>(b.size());
  const int m = std::max(1, options.restart);
  if (x.size() != n) x = Vector::Zero(n);

  SolveReport report;
  const double bnorm = b.norm();
  const double scale = bnorm > 0.0 ? bnorm : 1.0;
  auto done = [&](double res) {
    return res <= options.tolerance * bnorm || res <= options.absolute_tolerance;
  };

  Vector r = b - a * x;
  double beta = r.norm();
  report.residuals.push_back(beta / scale);
  if (done(beta)) {
    report.converged = true;
    return report;
  }

  Eigen::MatrixXd v(n, m + 1), z(n, m), h = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs(m), sn(m), g(m + 1);
  Vector w(n);
  while (report.iterations < options.max_iterations) {
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    h.setZero();
    int k = 0;
    for (int j = 0; j < m; ++j) {
      if (precond) {
        Vector zj;
        precond(v.col(j), zj);
        z.col(j) = zj;
      } else {
        z.col(j) = v.col(j);
      }
      w = a * z.col(j);
      for (int i = 0; i <= j; ++i) {
        h(i, j) = w.dot(v.col(i));
        w -= h(i, j) * v.col(i);
      }
      h(j + 1, j) = w.norm();
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
        h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
        h(i, j) = t;
      }
      const double denom = std::hypot(h(j, j), h(j + 1, j));
      const double hjj1 = h(j + 1, j);
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = h(j, j) / denom;
        sn[j] = hjj1 / denom;
      }
      h(j, j) = denom;
      h(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++report.iterations;
      k = j + 1;
      const double res = std::abs(g[j + 1]);
      if (!std::isfinite(res)) throw DivergenceError("fgmres: residual is not finite");
      report.residuals.push_back(res / scale);
      if (done(res) || hjj1 <= 1e-14 * denom || report.iterations >= options.max_iterations) break;
      v.col(j + 1) = w / hjj1;
    }
    const Eigen::VectorXd y =
        h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    x += z.leftCols(k) * y;
    r = b - a * x;
    beta = r.norm();
    if (!std::isfinite(beta)) throw DivergenceError("fgmres: residual is not finite");
    report.residuals.back() = beta / scale;
    if (done(beta)) {
      report.converged = true;
      break;
    }
  }
  return report;
}

Vector inverse_diagonal(const SparseMatrix& a) {
  Vector d = a.diagonal();
  for (Index i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) throw Error("smoother: zero diagonal entry in row " + std::to_string(i));
    d[i] = 1.0 / d[i];
  }
  return d;
}

void smooth(const SparseMatrix& a, const Vector& inv_diag, const Vector& b, Vector& x,
            const SmootherConfig& config) {
  const Index n = static_cast<Index>(b.size());
  if (x.size() != n) x = Vector::Zero(n);
  const int m = std::max(1, config.inner_iterations);
  for (int app = 0; app < config.applications; ++app) {
    if (config.kind == SmootherKind::jacobi) {
      for (int s = 0; s < m; ++s) {
        x += config.jacobi_weight * inv_diag.cwiseProduct(b - a * x);
      }
      continue;
    }
    const Vector r = inv_diag.cwiseProduct(b - a * x);
    const double beta = r.norm();
    if (beta == 0.0 || !std::isfinite(beta)) return;
    Eigen::MatrixXd v(n, m + 1);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
    v.col(0) = r / beta;
    int k = 0;
    for (int j = 0; j < m; ++j) {
      Vector w = inv_diag.cwiseProduct(a * v.col(j));
      for (int i = 0; i <= j; ++i) {
        h(i, j) = w.dot(v.col(i));
        w -= h(i, j) * v.col(i);
      }
      h(j + 1, j) = w.norm();
      k = j + 1;
      if (h(j + 1, j) <= 1e-14 * h.col(j).norm()) break;
      v.col(j + 1) = w / h(j + 1, j);
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    rhs[0] = beta;
    const Eigen::VectorXd y = h.topLeftCorner(k + 1, k).colPivHouseholderQr().solve(rhs);
    x += v.leftCols(k) * y;
  }
}

VCycle::VCycle(const Hierarchy& hierarchy, SmootherConfig config)
    : h_(&hierarchy), config_(config) {
  if (hierarchy.levels.empty()) throw ConfigError("vcycle: empty hierarchy");
  for (const GridLevel& l : hierarchy.levels) {
    if (l.op.rows() == 0) throw ConfigError("vcycle: hierarchy has no operators");
  }
  const SparseMatrix& coarse = hierarchy.levels.back().op;
  if (coarse.rows() > kMaxCoarseUnknowns) {
    throw ConfigError("vcycle: coarsest level has " + std::to_string(coarse.rows()) +
                      " unknowns (limit " + std::to_string(kMaxCoarseUnknowns) +
                      "); lower the stop threshold or allow more levels");
  }
  for (int l = 0; l + 1 < hierarchy.num_levels(); ++l) {
    inv_diag_.push_back(inverse_diagonal(hierarchy.levels[l].op));
  }
  coarse_lu_.compute(Eigen::MatrixXd(coarse));
}

Vector VCycle::apply(const Vector& r) const { return cycle(0, r); }

Vector VCycle::cycle(int level, const Vector& b) const {
  if (level + 1 == h_->num_levels()) return coarse_lu_.solve(b);
  const SparseMatrix& a = h_->levels[level].op;
  const GridLevel& next = h_->levels[level + 1];
  Vector x = Vector::Zero(b.size());
  smooth(a, inv_diag_[level], b, x, config_);
  const Vector rc = next.restriction * (b - a * x);
  x += next.prolongation * cycle(level + 1, rc);
  smooth(a, inv_diag_[level], b, x, config_);
  return x;
}

SolveReport solve_problem(const Mesh& mesh, const ProblemSpec& spec, const SolveOptions& options) {
  const LinearSystem sys = assemble_problem(mesh, spec);
  const auto t0 = Clock::now();
  Hierarchy h;
  std::unique_ptr<VCycle> vc;
  if (options.precondition) {
    h = build_hierarchy(mesh, spec.materials, options.hierarchy, &sys.matrix);
    vc = std::make_unique<VCycle>(h, options.smoother);
  }
  const double setup = seconds_since(t0);

  const auto t1 = Clock::now();
  Vector x = Vector::Zero(sys.rhs.size());
  Preconditioner pre;
  if (vc) pre = [&](const Vector& r, Vector& z) { (*vc)(r, z); };
  SolveReport report = fgmres(sys.matrix, sys.rhs, x, pre, options.krylov);
  report.solve_time_s = seconds_since(t1);
  report.setup_time_s = setup;
  report.problem = std::string(to_string(spec.kind));
  report.algorithm = options.precondition ? std::string(to_string(options.hierarchy.coarsen.algorithm))
                                          : "none";
  if (options.precondition) {
    report.levels = h.num_levels();
    report.grid_complexity = grid_complexity(h);
    report.operator_complexity = operator_complexity(h);
    if (h.num_levels() > 1) {
      const Agglomeration& agg = h.levels[1].agg;
      report.average_agglomerate_size = static_cast<double>(agg.num_elements()) / agg.num_aggregates;
    }
  }
  return report;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("loglog_slope: need two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

MmsResult mms_convergence(std::span<const Index> subdivisions, int dim, double amplitude) {
  constexpr double pi = std::numbers::pi;
  auto exact = [&](const Eigen::Vector3d& p) {
    double u = amplitude;
    for (int i = 0; i < dim; ++i) u *= std::sin(pi * p[i]);
    return u;
  };
  MmsResult result;
  for (Index n : subdivisions) {
    GenerateSpec gs;
    gs.dim = dim;
    gs.extent = 1.0;
    gs.source_extent = 0.5;
    gs.subdivisions = n;
    const Mesh mesh = generate_mesh(gs);

    Coefficients c;
    c.diffusion.assign(static_cast<std::size_t>(mesh.num_elements()), 1.0);
    c.absorption.assign(static_cast<std::size_t>(mesh.num_elements()), 0.0);
    Vector f(mesh.num_nodes());
    for (Index v = 0; v < mesh.num_nodes(); ++v) f[v] = dim * pi * pi * exact(mesh.nodes[v]);
    c.nodal_source = &f;
    const LinearSystem sys = assemble_core(mesh, c);

    const Eigen::SparseMatrix<double> acol = sys.matrix;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(acol);
    if (ldlt.info() != Eigen::Success) throw Error("mms_convergence: factorisation failed");
    const Vector uh = ldlt.solve(sys.rhs);

    // Degree-2 quadrature: edge midpoints (2D), symmetric 4-point rule (3D).
    std::vector<Eigen::VectorXd> points;
    if (dim == 2) {
      points = {Eigen::Vector3d(0.5, 0.5, 0.0), Eigen::Vector3d(0.0, 0.5, 0.5),
                Eigen::Vector3d(0.5, 0.0, 0.5)};
    } else {
      const double qa = 0.5854101966249685, qb = 0.1381966011250105;
      for (int i = 0; i < 4; ++i) {
        Eigen::Vector4d p = Eigen::Vector4d::Constant(qb);
        p[i] = qa;
        points.emplace_back(p);
      }
    }
    double err2 = 0.0;
    for (Index e = 0; e < mesh.num_elements(); ++e) {
      const auto nodes = mesh.element_nodes(e);
      const double w = std::abs(signed_measure(mesh, e)) / static_cast<double>(points.size());
      for (const auto& lambda : points) {
        Eigen::Vector3d p = Eigen::Vector3d::Zero();
        double u = 0.0;
        for (int i = 0; i <= dim; ++i) {
          p += lambda[i] * mesh.nodes[nodes[i]];
          u += lambda[i] * uh[nodes[i]];
        }
        const double diff = u - exact(p);
        err2 += w * diff * diff;
      }
    }
    result.h.push_back(1.0 / static_cast<double>(n));
    result.l2_error.push_back(std::sqrt(err2));
  }
  if (result.h.size() >= 2 &&
      std::all_of(result.l2_error.begin(), result.l2_error.end(), [](double e) { return e > 0.0; })) {
    result.slope = loglog_slope(result.h, result.l2_error);
  }
  return result;
}

}  // namespace agglomg
