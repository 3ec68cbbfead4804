#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agglomg/common.hpp"
#include "agglomg/hierarchy.hpp"
#include "agglomg/mesh.hpp"

namespace agglomg {

struct ProblemSpec {
  ProblemKind kind = ProblemKind::diffuse;
  MaterialTable materials;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // cm/s, absorbing only
};

/// Table rows of the two model problems; absorbing gets b = (1, 0, 0).
ProblemSpec reference_problem(ProblemKind kind);

std::string_view to_string(ProblemKind kind);
ProblemKind parse_problem(std::string_view name);

struct LinearSystem {
  SparseMatrix matrix;
  Vector rhs;
  std::vector<char> dirichlet;  // per node
};

/// P1 elements for -div(D grad u) + b.grad u + sigma_a u = S with
/// D = 1/(3 sigma_t), homogeneous Dirichlet data on the whole boundary.
/// Dirichlet rows and columns are zeroed, the diagonal kept, rhs set to 0.
LinearSystem assemble_problem(const Mesh& mesh, const ProblemSpec& spec);

/// Local P1 matrix of D grad.grad + sigma_a mass on one element.
Eigen::MatrixXd element_matrix(const Mesh& mesh, Index element, double diffusion, double absorption);

struct KrylovOptions {
  int restart = 30;
  double tolerance = 1e-10;           // relative to |b|
  double absolute_tolerance = 1e-10;  // also accepted; 0 disables
  int max_iterations = 500;
};

struct SolveReport {
  std::string problem;
  std::string algorithm;
  int levels = 1;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residuals;  // relative 2-norms, entry 0 is the initial one
  double setup_time_s = 0.0;
  double solve_time_s = 0.0;
  double grid_complexity = 1.0;
  double operator_complexity = 1.0;
  double average_agglomerate_size = 0.0;

  double final_residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
};

/// z = M^{-1} r.
using Preconditioner = std::function<void(const Vector& r, Vector& z)>;

/// Right-preconditioned flexible GMRES(restart).  An empty preconditioner
/// means identity.  `x` holds the initial guess and receives the solution.
SolveReport fgmres(const SparseMatrix& a, const Vector& b, Vector& x,
                   const Preconditioner& precond = {}, const KrylovOptions& options = {});

enum class SmootherKind { gmres, jacobi };

struct SmootherConfig {
  SmootherKind kind = SmootherKind::gmres;
  int inner_iterations = 3;  // GMRES(m) cycle length, or Jacobi sweeps
  int applications = 3;      // per pre- and post-smooth
  double jacobi_weight = 2.0 / 3.0;
};

/// One smoothing step on a x = b starting from `x`.
void smooth(const SparseMatrix& a, const Vector& inv_diag, const Vector& b, Vector& x,
            const SmootherConfig& config);

/// Inverse diagonal; throws on zero diagonal entries.
Vector inverse_diagonal(const SparseMatrix& a);

/// Multigrid V-cycle over a hierarchy with assembled operators.
class VCycle {
 public:
  static constexpr Index kMaxCoarseUnknowns = 2000;

  VCycle(const Hierarchy& hierarchy, SmootherConfig config = {});

  Vector apply(const Vector& r) const;
  void operator()(const Vector& r, Vector& z) const { z = apply(r); }

 private:
  Vector cycle(int level, const Vector& b) const;

  const Hierarchy* h_;
  SmootherConfig config_;
  std::vector<Vector> inv_diag_;
  Eigen::PartialPivLU<Eigen::MatrixXd> coarse_lu_;
};

struct SolveOptions {
  HierarchyConfig hierarchy;
  SmootherConfig smoother;
  KrylovOptions krylov;
  bool precondition = true;
};

/// Assembles, builds the hierarchy (setup) and runs preconditioned FGMRES
/// (solve) from a zero initial guess.
SolveReport solve_problem(const Mesh& mesh, const ProblemSpec& spec, const SolveOptions& options);

struct MmsResult {
  std::vector<double> h;
  std::vector<double> l2_error;
  double slope = 0.0;
};

/// Discrete L2 errors of the P1 solution for u = amplitude * prod sin(pi x_i)
/// on the unit box, one entry per subdivision count.
MmsResult mms_convergence(std::span<const Index> subdivisions, int dim = 2, double amplitude = 1.0);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace agglomg
