#pragma once

#include <complex>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rwg/mesh.hpp"

namespace rwg {

using cplx = std::complex<double>;

class FemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Continuous Lagrange space of order 1 or 2 on a mesh. Dofs are the mesh
/// nodes followed (order 2) by one dof per mesh edge at its midpoint.
class FESpace {
 public:
  FESpace(Mesh mesh, int order);

  const Mesh& mesh() const { return mesh_; }
  int order() const { return order_; }
  std::size_t n_dofs() const { return dof_points_.size(); }
  std::size_t dofs_per_element() const { return order_ == 1 ? 3 : 6; }
  const std::vector<std::size_t>& element_dofs(std::size_t t) const { return elem_dofs_[t]; }
  Point dof_point(std::size_t i) const { return dof_points_[i]; }
  /// Dofs of a boundary edge: endpoints, then the midpoint dof for order 2.
  std::vector<std::size_t> edge_dofs(const BoundaryEdge& e) const;
  /// True for dofs on DIRICHLET edges; they are eliminated (value 0).
  bool is_dirichlet(std::size_t dof) const { return dirichlet_[dof] != 0; }

  /// Reference basis on the triangle, barycentric input (l1, l2 with l0 = 1-l1-l2).
  void shape(double l1, double l2, double* phi) const;
  /// Triangle containing p and its barycentric coordinates; -1 if outside.
  long locate(Point p, double* l1, double* l2) const;

 private:
  Mesh mesh_;
  int order_;
  std::vector<std::vector<std::size_t>> elem_dofs_;
  std::vector<Point> dof_points_;
  std::vector<char> dirichlet_;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_index_;
  // uniform bucket grid over triangle bounding boxes
  double gx0_ = 0, gy0_ = 0, gdx_ = 1, gdy_ = 1;
  std::size_t gnx_ = 1, gny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

/// Real symmetric forms on the free (non-Dirichlet) dofs.
struct AssembledForms {
  std::shared_ptr<const FESpace> space;
  Eigen::SparseMatrix<double> K;  // int grad u . grad v
  Eigen::SparseMatrix<double> M;  // int u v
  std::map<BoundaryTag, Eigen::SparseMatrix<double>> B;  // int_{tag} u v
  std::vector<long> free_index;   // dof -> free index, -1 on Dirichlet dofs
  std::vector<std::size_t> free_dofs;

  std::size_t n_free() const { return free_dofs.size(); }
};

AssembledForms assemble(const Mesh& mesh, int order);
AssembledForms assemble(std::shared_ptr<const FESpace> space);

/// Complex nodal vector over all dofs (Dirichlet entries are zero).
struct FemSolution {
  std::shared_ptr<const FESpace> space;
  Eigen::VectorXcd values;
  double k_sq = 0.0;
  std::vector<std::pair<BoundaryTag, cplx>> robin;  // coefficients kappa used
};

/// Boundary condition d_n u + kappa u = g on edges with the given tag.
/// For the Helmholtz radiation form d_n u + i zeta u use kappa = i zeta.
struct RobinData {
  BoundaryTag tag = BoundaryTag::GAMMA_1;
  cplx kappa = 0.0;
  std::function<cplx(Point)> g;  // empty means g = 0
};

struct SolveOptions {
  /// Relative distance of k^2 to the discrete spectrum below which the
  /// system is treated as singular.
  double singular_tol = 1e-10;
  int condition_iterations = 6;
  bool check_singular = true;
};

/// Factorization of K - k^2 M + sum kappa_t B_t, reusable for many data sets.
/// Solves on one instance must not run concurrently; use one instance per task.
class RobinSolver {
 public:
  RobinSolver(std::shared_ptr<const AssembledForms> forms, double k_sq,
              std::vector<std::pair<BoundaryTag, cplx>> kappa, const SolveOptions& opts = {});
  ~RobinSolver();
  RobinSolver(const RobinSolver&) = delete;
  RobinSolver& operator=(const RobinSolver&) = delete;

  /// Boundary data per tag; tags not listed carry g = 0.
  FemSolution solve(const std::vector<std::pair<BoundaryTag, std::function<cplx(Point)>>>& g) const;
  /// Estimated |k^2 - nearest discrete eigenvalue| / max(1, |k^2|).
  double relative_gap() const { return gap_; }
  double residual() const { return last_residual_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<const AssembledForms> forms_;
  double k_sq_;
  std::vector<std::pair<BoundaryTag, cplx>> kappa_;
  double gap_ = 0.0;
  mutable double last_residual_ = 0.0;
};

FemSolution solve_robin(std::shared_ptr<const AssembledForms> forms, double k_sq,
                        const std::vector<RobinData>& robin, const SolveOptions& opts = {});

struct EigenPair {
  double value = 0.0;
  FemSolution vector;  // real valued, int |v|^2 = 1
  double residual = 0.0;  // |Kv - lambda M v| / |M v|
};

struct EigenOptions {
  double tol = 1e-10;
  int max_iterations = 500;
};

/// n_ev eigenvalues of K v = lambda M v nearest the shift, ascending.
std::vector<EigenPair> solve_eigen(std::shared_ptr<const AssembledForms> forms, std::size_t n_ev,
                                   double shift = 0.0, const EigenOptions& opts = {});

cplx evaluate(const FemSolution& sol, Point p);
/// Throws FemError naming the index of the first point outside the mesh.
std::vector<cplx> evaluate(const FemSolution& sol, const std::vector<Point>& points);

/// Gauss points (4 per edge) on all edges with the given tag.
struct BoundaryQuadrature {
  std::vector<Point> points;
  std::vector<double> weights;
  std::vector<std::size_t> edge;  // index into mesh.boundary_edges
  std::vector<double> t;          // edge parameter in [0, 1]
};

BoundaryQuadrature boundary_quadrature(const FESpace& space, BoundaryTag tag);
/// Trace of the solution at the quadrature points.
Eigen::VectorXcd trace(const FemSolution& sol, const BoundaryQuadrature& q);

/// L2 norm of sol - exact over the mesh (6-point rule per triangle).
double l2_error(const FemSolution& sol, const std::function<cplx(Point)>& exact);

struct CornerModel {
  Point corner;
  double axis = 0.0;   // direction of the sector bisector
  double omega = 0.0;  // sector opening
  double exponent = 1.0;
  /// Angular profile in the angle measured from the axis.
  std::function<double(double)> profile;
  /// Radial model for the leading term. k > 0 uses the regular Helmholtz
  /// solution Gamma(p+1) (2/k)^p J_p(k r) (leading behavior r^p); k = 0 uses r^p.
  double k = 0.0;
  /// Further radial powers fitted jointly (e.g. -p for the decaying term).
  std::vector<double> extra_exponents;
  /// Known part removed before fitting.
  std::function<cplx(Point)> subtract;
};

struct CornerWindow {
  double r_min = 0.0;
  double r_max = 0.0;
  int n_radii = 5;
  int n_angles = 7;
  /// Relative residual above which the fit is rejected.
  double max_residual = 5e-2;
};

struct CornerFit {
  cplx c = 0.0;                   // coefficient of the leading term
  std::vector<cplx> extra;        // coefficients of extra_exponents
  double residual = 0.0;          // relative radial fit residual
  double angular_residual = 0.0;  // relative misfit of the angular profile
  std::vector<double> radii;
  std::vector<cplx> projected;    // profile projection at each radius
};

CornerFit corner_coefficient(const FemSolution& sol, const CornerModel& model,
                             const CornerWindow& window);

/// node_index,x,y,re,im for the mesh vertices.
void write_solution_csv(std::ostream& os, const FemSolution& sol);

}  // namespace rwg
