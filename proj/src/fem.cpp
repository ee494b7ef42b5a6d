#include "rwg/fem.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/UmfPackSupport>

namespace rwg {

namespace {

// Degree-4 six-point rule on the reference triangle (barycentric l1, l2).
constexpr double kTa = 0.44594849091596488632;
constexpr double kTb = 0.09157621350977074346;
constexpr double kTwa = 0.22338158967801146570;
constexpr double kTwb = 0.10995174365532186764;
constexpr std::array<std::array<double, 3>, 6> kTriRule{{
    {kTa, kTa, kTwa},
    {1.0 - 2.0 * kTa, kTa, kTwa},
    {kTa, 1.0 - 2.0 * kTa, kTwa},
    {kTb, kTb, kTwb},
    {1.0 - 2.0 * kTb, kTb, kTwb},
    {kTb, 1.0 - 2.0 * kTb, kTwb},
}};

// Four-point Gauss rule on [0, 1].
constexpr std::array<double, 4> kGaussT{0.5 - 0.5 * 0.86113631159405257522, 0.5 - 0.5 * 0.33998104358485626480,
                                        0.5 + 0.5 * 0.33998104358485626480, 0.5 + 0.5 * 0.86113631159405257522};
constexpr std::array<double, 4> kGaussW{0.5 * 0.34785484513745385737, 0.5 * 0.65214515486254614263,
                                        0.5 * 0.65214515486254614263, 0.5 * 0.34785484513745385737};

void edge_shape(int order, double t, double* phi) {
  if (order == 1) {
    phi[0] = 1.0 - t;
    phi[1] = t;
  } else {
    phi[0] = (1.0 - t) * (1.0 - 2.0 * t);
    phi[1] = t * (2.0 * t - 1.0);
    phi[2] = 4.0 * t * (1.0 - t);
  }
}

struct ElementGeometry {
  double area;
  std::array<Eigen::Vector2d, 3> grad_l;  // gradients of the barycentric coordinates
};

ElementGeometry element_geometry(const Mesh& m, std::size_t t) {
  const auto& tr = m.triangles[t];
  const Point p0 = m.nodes[tr[0]], p1 = m.nodes[tr[1]], p2 = m.nodes[tr[2]];
  const double two_a = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
  if (!(two_a > 0.0)) {
    std::ostringstream os;
    os << "degenerate or inverted triangle " << t << " (area " << 0.5 * two_a << ")";
    throw FemError(os.str());
  }
  ElementGeometry g;
  g.area = 0.5 * two_a;
  g.grad_l[0] = Eigen::Vector2d(p1.y - p2.y, p2.x - p1.x) / two_a;
  g.grad_l[1] = Eigen::Vector2d(p2.y - p0.y, p0.x - p2.x) / two_a;
  g.grad_l[2] = Eigen::Vector2d(p0.y - p1.y, p1.x - p0.x) / two_a;
  return g;
}

// Basis gradients at barycentric point (l0, l1, l2).
void shape_grad(int order, const std::array<double, 3>& l, const ElementGeometry& g, Eigen::Vector2d* grad) {
  if (order == 1) {
    for (int i = 0; i < 3; ++i) grad[i] = g.grad_l[i];
    return;
  }
  for (int i = 0; i < 3; ++i) grad[i] = (4.0 * l[i] - 1.0) * g.grad_l[i];
  grad[3] = 4.0 * (l[0] * g.grad_l[1] + l[1] * g.grad_l[0]);
  grad[4] = 4.0 * (l[1] * g.grad_l[2] + l[2] * g.grad_l[1]);
  grad[5] = 4.0 * (l[2] * g.grad_l[0] + l[0] * g.grad_l[2]);
}

Point element_point(const Mesh& m, std::size_t t, double l1, double l2) {
  const auto& tr = m.triangles[t];
  const double l0 = 1.0 - l1 - l2;
  const Point p0 = m.nodes[tr[0]], p1 = m.nodes[tr[1]], p2 = m.nodes[tr[2]];
  return Point{l0 * p0.x + l1 * p1.x + l2 * p2.x, l0 * p0.y + l1 * p1.y + l2 * p2.y};
}

using SpMat = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<cplx>;

}  // namespace

FESpace::FESpace(Mesh mesh, int order) : mesh_(std::move(mesh)), order_(order) {
  if (order != 1 && order != 2) throw FemError("element order must be 1 or 2");
  if (mesh_.triangles.empty()) throw FemError("empty mesh");
  dof_points_ = mesh_.nodes;
  elem_dofs_.resize(mesh_.triangles.size());
  for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
    const auto& tr = mesh_.triangles[t];
    auto& d = elem_dofs_[t];
    d.assign(tr.begin(), tr.end());
    if (order_ == 2) {
      for (int k = 0; k < 3; ++k) {
        const std::size_t a = tr[k], b = tr[(k + 1) % 3];
        const auto key = std::minmax(a, b);
        auto [it, fresh] = edge_index_.emplace(std::pair<std::size_t, std::size_t>(key.first, key.second),
                                               dof_points_.size());
        if (fresh) {
          const Point pa = mesh_.nodes[a], pb = mesh_.nodes[b];
          dof_points_.push_back(Point{0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
        }
        d.push_back(it->second);
      }
    }
  }
  dirichlet_.assign(dof_points_.size(), 0);
  for (const auto& e : mesh_.boundary_edges) {
    if (e.tag != BoundaryTag::DIRICHLET) continue;
    for (std::size_t dof : edge_dofs(e)) dirichlet_[dof] = 1;
  }

  double xmin = std::numeric_limits<double>::max(), ymin = xmin, xmax = -xmin, ymax = -xmin;
  for (const Point& p : mesh_.nodes) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double w = std::max(xmax - xmin, 1e-300), h = std::max(ymax - ymin, 1e-300);
  const double cells = std::max(1.0, std::sqrt(static_cast<double>(mesh_.triangles.size())));
  const double side = std::sqrt(w * h / cells);
  gnx_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(w / side)));
  gny_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(h / side)));
  gx0_ = xmin;
  gy0_ = ymin;
  gdx_ = w / static_cast<double>(gnx_);
  gdy_ = h / static_cast<double>(gny_);
  buckets_.assign(gnx_ * gny_, {});
  auto cell = [](double v, double v0, double dv, std::size_t n) {
    const double c = std::floor((v - v0) / dv);
    return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(n - 1)));
  };
  for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
    const auto& tr = mesh_.triangles[t];
    double x0 = mesh_.nodes[tr[0]].x, x1 = x0, y0 = mesh_.nodes[tr[0]].y, y1 = y0;
    for (int k = 1; k < 3; ++k) {
      x0 = std::min(x0, mesh_.nodes[tr[k]].x);
      x1 = std::max(x1, mesh_.nodes[tr[k]].x);
      y0 = std::min(y0, mesh_.nodes[tr[k]].y);
      y1 = std::max(y1, mesh_.nodes[tr[k]].y);
    }
    const std::size_t i0 = cell(x0, gx0_, gdx_, gnx_), i1 = cell(x1, gx0_, gdx_, gnx_);
    const std::size_t j0 = cell(y0, gy0_, gdy_, gny_), j1 = cell(y1, gy0_, gdy_, gny_);
    for (std::size_t j = j0; j <= j1; ++j)
      for (std::size_t i = i0; i <= i1; ++i) buckets_[j * gnx_ + i].push_back(t);
  }
}

std::vector<std::size_t> FESpace::edge_dofs(const BoundaryEdge& e) const {
  std::vector<std::size_t> d{e.a, e.b};
  if (order_ == 2) {
    const auto key = std::minmax(e.a, e.b);
    const auto it = edge_index_.find({key.first, key.second});
    if (it == edge_index_.end()) throw FemError("boundary edge is not an edge of the mesh");
    d.push_back(it->second);
  }
  return d;
}

void FESpace::shape(double l1, double l2, double* phi) const {
  const double l0 = 1.0 - l1 - l2;
  if (order_ == 1) {
    phi[0] = l0;
    phi[1] = l1;
    phi[2] = l2;
    return;
  }
  phi[0] = l0 * (2.0 * l0 - 1.0);
  phi[1] = l1 * (2.0 * l1 - 1.0);
  phi[2] = l2 * (2.0 * l2 - 1.0);
  phi[3] = 4.0 * l0 * l1;
  phi[4] = 4.0 * l1 * l2;
  phi[5] = 4.0 * l2 * l0;
}

long FESpace::locate(Point p, double* l1, double* l2) const {
  const double fx = std::floor((p.x - gx0_) / gdx_);
  const double fy = std::floor((p.y - gy0_) / gdy_);
  const double tolc = 1e-9;
  if (fx < -1.0 || fy < -1.0 || fx > static_cast<double>(gnx_) || fy > static_cast<double>(gny_)) return -1;
  const std::size_t i = static_cast<std::size_t>(std::clamp(fx, 0.0, static_cast<double>(gnx_ - 1)));
  const std::size_t j = static_cast<std::size_t>(std::clamp(fy, 0.0, static_cast<double>(gny_ - 1)));
  long best = -1;
  double best_min = -std::numeric_limits<double>::max();
  for (std::size_t t : buckets_[j * gnx_ + i]) {
    const auto& tr = mesh_.triangles[t];
    const Point p0 = mesh_.nodes[tr[0]], p1 = mesh_.nodes[tr[1]], p2 = mesh_.nodes[tr[2]];
    const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    const double a = ((p.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p.y - p0.y)) / det;
    const double b = ((p1.x - p0.x) * (p.y - p0.y) - (p.x - p0.x) * (p1.y - p0.y)) / det;
    const double m = std::min({a, b, 1.0 - a - b});
    if (m > best_min) {
      best_min = m;
      best = static_cast<long>(t);
      *l1 = a;
      *l2 = b;
    }
  }
  if (best < 0 || best_min < -tolc) return -1;
  return best;
}

AssembledForms assemble(const Mesh& mesh, int order) {
  return assemble(std::make_shared<const FESpace>(mesh, order));
}

AssembledForms assemble(std::shared_ptr<const FESpace> space) {
  AssembledForms f;
  f.space = space;
  const FESpace& S = *space;
  const Mesh& m = S.mesh();
  const int order = S.order();
  const std::size_t nd = S.n_dofs();
  f.free_index.assign(nd, -1);
  for (std::size_t i = 0; i < nd; ++i) {
    if (!S.is_dirichlet(i)) {
      f.free_index[i] = static_cast<long>(f.free_dofs.size());
      f.free_dofs.push_back(i);
    }
  }
  const long nf = static_cast<long>(f.free_dofs.size());
  const std::size_t ne = S.dofs_per_element();
  std::vector<Eigen::Triplet<double>> tk, tm;
  tk.reserve(m.triangles.size() * ne * ne);
  tm.reserve(m.triangles.size() * ne * ne);
  std::vector<double> phi(ne);
  std::vector<Eigen::Vector2d> grad(ne);
  Eigen::MatrixXd ke(ne, ne), me(ne, ne);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry g = element_geometry(m, t);
    ke.setZero();
    me.setZero();
    for (const auto& q : kTriRule) {
      const std::array<double, 3> l{1.0 - q[0] - q[1], q[0], q[1]};
      S.shape(q[0], q[1], phi.data());
      shape_grad(order, l, g, grad.data());
      const double w = q[2] * g.area;
      for (std::size_t i = 0; i < ne; ++i)
        for (std::size_t j = 0; j < ne; ++j) {
          ke(i, j) += w * grad[i].dot(grad[j]);
          me(i, j) += w * phi[i] * phi[j];
        }
    }
    const auto& dofs = S.element_dofs(t);
    for (std::size_t i = 0; i < ne; ++i) {
      const long fi = f.free_index[dofs[i]];
      if (fi < 0) continue;
      for (std::size_t j = 0; j < ne; ++j) {
        const long fj = f.free_index[dofs[j]];
        if (fj < 0) continue;
        tk.emplace_back(fi, fj, ke(i, j));
        tm.emplace_back(fi, fj, me(i, j));
      }
    }
  }
  f.K.resize(nf, nf);
  f.M.resize(nf, nf);
  f.K.setFromTriplets(tk.begin(), tk.end());
  f.M.setFromTriplets(tm.begin(), tm.end());

  std::map<BoundaryTag, std::vector<Eigen::Triplet<double>>> tb;
  const std::size_t nb = order == 1 ? 2 : 3;
  double ph[3];
  for (const auto& e : m.boundary_edges) {
    if (e.tag == BoundaryTag::DIRICHLET) continue;
    const auto dofs = S.edge_dofs(e);
    const double len = distance(m.nodes[e.a], m.nodes[e.b]);
    auto& trip = tb[e.tag];
    Eigen::Matrix3d be = Eigen::Matrix3d::Zero();
    for (int g = 0; g < 4; ++g) {
      edge_shape(order, kGaussT[g], ph);
      for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = 0; j < nb; ++j) be(i, j) += kGaussW[g] * len * ph[i] * ph[j];
    }
    for (std::size_t i = 0; i < nb; ++i) {
      const long fi = f.free_index[dofs[i]];
      if (fi < 0) continue;
      for (std::size_t j = 0; j < nb; ++j) {
        const long fj = f.free_index[dofs[j]];
        if (fj < 0) continue;
        trip.emplace_back(fi, fj, be(i, j));
      }
    }
  }
  for (auto& [tag, trip] : tb) {
    SpMat b(nf, nf);
    b.setFromTriplets(trip.begin(), trip.end());
    f.B.emplace(tag, std::move(b));
  }
  return f;
}

struct RobinSolver::Impl {
  SpMatC A;
  Eigen::UmfPackLU<SpMatC> lu;
};

RobinSolver::RobinSolver(std::shared_ptr<const AssembledForms> forms, double k_sq,
                         std::vector<std::pair<BoundaryTag, cplx>> kappa, const SolveOptions& opts)
    : impl_(std::make_unique<Impl>()), forms_(std::move(forms)), k_sq_(k_sq), kappa_(std::move(kappa)) {
  const AssembledForms& f = *forms_;
  SpMatC A = (f.K - k_sq * f.M).cast<cplx>();
  for (const auto& [tag, kap] : kappa_) {
    const auto it = f.B.find(tag);
    if (it == f.B.end()) continue;
    A += kap * it->second.cast<cplx>();
  }
  A.makeCompressed();
  impl_->A = std::move(A);
  impl_->lu.compute(impl_->A);
  if (impl_->lu.info() != Eigen::Success) {
    std::ostringstream os;
    os << "singular system at k^2 = " << k_sq << ": shift k^2 slightly or change the mesh";
    throw FemError(os.str());
  }
  gap_ = std::numeric_limits<double>::infinity();
  if (opts.check_singular && f.n_free() > 0) {
    // power iteration on A^{-1} M estimates the distance to the nearest eigenvalue
    const SpMatC Mc = f.M.cast<cplx>();
    Eigen::VectorXcd x(f.n_free());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = cplx(1.0 + 0.5 * std::sin(1.3 * static_cast<double>(i)), 0.0);
    auto mnorm = [&](const Eigen::VectorXcd& v) { return std::sqrt(std::abs(v.dot(Mc * v))); };
    x /= mnorm(x);
    double growth = 0.0;
    for (int it = 0; it < opts.condition_iterations; ++it) {
      const Eigen::VectorXcd mx = Mc * x;
      Eigen::VectorXcd y = impl_->lu.solve(mx);
      const double ny = mnorm(y);
      if (!std::isfinite(ny)) {
        growth = std::numeric_limits<double>::infinity();
        break;
      }
      growth = ny;
      x = y / ny;
    }
    gap_ = growth > 0.0 ? 1.0 / growth / std::max(1.0, std::abs(k_sq)) : std::numeric_limits<double>::infinity();
    if (!(gap_ >= opts.singular_tol)) {
      std::ostringstream os;
      os << "system is singular to working precision at k^2 = " << std::setprecision(12) << k_sq
         << " (relative distance to the discrete spectrum " << gap_
         << "): shift k^2 or change the mesh / boundary data";
      throw FemError(os.str());
    }
  }
}

RobinSolver::~RobinSolver() = default;

FemSolution RobinSolver::solve(
    const std::vector<std::pair<BoundaryTag, std::function<cplx(Point)>>>& data) const {
  const AssembledForms& f = *forms_;
  const FESpace& S = *f.space;
  const Mesh& m = S.mesh();
  const int order = S.order();
  const std::size_t nb = order == 1 ? 2 : 3;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(f.n_free()));
  double ph[3];
  for (const auto& [tag, g] : data) {
    if (!g) continue;
    for (const auto& e : m.boundary_edges) {
      if (e.tag != tag) continue;
      const auto dofs = S.edge_dofs(e);
      const Point pa = m.nodes[e.a], pb = m.nodes[e.b];
      const double len = distance(pa, pb);
      for (int q = 0; q < 4; ++q) {
        const double t = kGaussT[q];
        const cplx gv = g(Point{pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y)});
        edge_shape(order, t, ph);
        for (std::size_t i = 0; i < nb; ++i) {
          const long fi = f.free_index[dofs[i]];
          if (fi >= 0) b[fi] += kGaussW[q] * len * ph[i] * gv;
        }
      }
    }
  }
  FemSolution sol;
  sol.space = f.space;
  sol.k_sq = k_sq_;
  sol.robin = kappa_;
  sol.values = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(S.n_dofs()));
  const double bn = b.norm();
  if (bn == 0.0) {
    last_residual_ = 0.0;
    return sol;
  }
  const Eigen::VectorXcd x = impl_->lu.solve(b);
  last_residual_ = (impl_->A * x - b).norm() / bn;
  if (!x.allFinite()) throw FemError("linear solve produced non-finite values");
  for (std::size_t i = 0; i < f.n_free(); ++i) sol.values[static_cast<Eigen::Index>(f.free_dofs[i])] = x[static_cast<Eigen::Index>(i)];
  return sol;
}

FemSolution solve_robin(std::shared_ptr<const AssembledForms> forms, double k_sq,
                        const std::vector<RobinData>& robin, const SolveOptions& opts) {
  std::vector<std::pair<BoundaryTag, cplx>> kappa;
  std::vector<std::pair<BoundaryTag, std::function<cplx(Point)>>> data;
  for (const auto& r : robin) {
    kappa.emplace_back(r.tag, r.kappa);
    data.emplace_back(r.tag, r.g);
  }
  RobinSolver solver(std::move(forms), k_sq, kappa, opts);
  return solver.solve(data);
}

std::vector<EigenPair> solve_eigen(std::shared_ptr<const AssembledForms> forms, std::size_t n_ev, double shift,
                                   const EigenOptions& opts) {
  if (n_ev == 0) throw FemError("n_ev must be at least 1");
  const AssembledForms& f = *forms;
  const Eigen::Index n = static_cast<Eigen::Index>(f.n_free());
  if (static_cast<Eigen::Index>(n_ev) > n) throw FemError("more eigenpairs requested than free dofs");
  const Eigen::Index block = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(n_ev + std::max<std::size_t>(4, n_ev)));
  SpMat shifted = f.K - shift * f.M;
  Eigen::SimplicialLDLT<SpMat> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw FemError("shift-invert factorization failed; move the shift");

  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::MatrixXd X(n, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = uni(rng);

  Eigen::VectorXd lambda_old = Eigen::VectorXd::Constant(block, std::numeric_limits<double>::max());
  Eigen::VectorXd lambda;
  std::vector<Eigen::Index> order;
  std::vector<double> residuals(n_ev, 0.0);
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iterations; ++it) {
    const Eigen::MatrixXd Y = ldlt.solve(f.M * X);
    const Eigen::MatrixXd KY = f.K * Y;
    const Eigen::MatrixXd MY = f.M * Y;
    Eigen::MatrixXd Kr = Y.transpose() * KY;
    Eigen::MatrixXd Mr = Y.transpose() * MY;
    Kr = 0.5 * (Kr + Kr.transpose()).eval();
    Mr = 0.5 * (Mr + Mr.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Kr, Mr);
    if (ges.info() != Eigen::Success) throw FemError("Rayleigh-Ritz step failed");
    lambda = ges.eigenvalues();
    X = Y * ges.eigenvectors();
    order.resize(static_cast<std::size_t>(block));
    for (Eigen::Index j = 0; j < block; ++j) order[static_cast<std::size_t>(j)] = j;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(lambda[a] - shift) < std::abs(lambda[b] - shift);
    });
    converged = true;
    for (std::size_t k = 0; k < n_ev; ++k) {
      const Eigen::Index j = order[k];
      const Eigen::VectorXd v = X.col(j);
      const Eigen::VectorXd mv = f.M * v;
      const double r = (f.K * v - lambda[j] * mv).norm() / mv.norm();
      residuals[k] = r;
      const double rel_change = std::abs(lambda[j] - lambda_old[j]) / std::max(1.0, std::abs(lambda[j]));
      if (r > opts.tol * std::max(1.0, std::abs(lambda[j])) || rel_change > 1e-13) converged = false;
    }
    lambda_old = lambda;
    if (converged) break;
  }
  if (!converged) {
    std::ostringstream os;
    os << "eigen solver did not converge in " << opts.max_iterations << " iterations; residuals:";
    for (double r : residuals) os << " " << r;
    throw FemError(os.str());
  }
  std::vector<EigenPair> out;
  for (std::size_t k = 0; k < n_ev; ++k) {
    const Eigen::Index j = order[k];
    Eigen::VectorXd v = X.col(j);
    v /= std::sqrt(v.dot(f.M * v));
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
    EigenPair ep;
    ep.value = lambda[j];
    ep.residual = residuals[k];
    ep.vector.space = f.space;
    ep.vector.k_sq = lambda[j];
    ep.vector.values = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(f.space->n_dofs()));
    for (std::size_t i = 0; i < f.n_free(); ++i)
      ep.vector.values[static_cast<Eigen::Index>(f.free_dofs[i])] = v[static_cast<Eigen::Index>(i)];
    out.push_back(std::move(ep));
  }
  std::stable_sort(out.begin(), out.end(), [](const EigenPair& a, const EigenPair& b) { return a.value < b.value; });
  return out;
}

cplx evaluate(const FemSolution& sol, Point p) {
  const FESpace& S = *sol.space;
  double l1 = 0, l2 = 0;
  const long t = S.locate(p, &l1, &l2);
  if (t < 0) {
    std::ostringstream os;
    os << "point (" << p.x << ", " << p.y << ") is outside the mesh";
    throw FemError(os.str());
  }
  double phi[6];
  S.shape(l1, l2, phi);
  const auto& dofs = S.element_dofs(static_cast<std::size_t>(t));
  cplx v = 0.0;
  for (std::size_t i = 0; i < dofs.size(); ++i) v += phi[i] * sol.values[static_cast<Eigen::Index>(dofs[i])];
  return v;
}

std::vector<cplx> evaluate(const FemSolution& sol, const std::vector<Point>& points) {
  std::vector<cplx> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    try {
      out[i] = evaluate(sol, points[i]);
    } catch (const FemError&) {
      std::ostringstream os;
      os << "evaluation point " << i << " (" << points[i].x << ", " << points[i].y << ") is outside the mesh";
      throw FemError(os.str());
    }
  }
  return out;
}

BoundaryQuadrature boundary_quadrature(const FESpace& space, BoundaryTag tag) {
  BoundaryQuadrature q;
  const Mesh& m = space.mesh();
  for (std::size_t e = 0; e < m.boundary_edges.size(); ++e) {
    const auto& be = m.boundary_edges[e];
    if (be.tag != tag) continue;
    const Point pa = m.nodes[be.a], pb = m.nodes[be.b];
    const double len = distance(pa, pb);
    for (int g = 0; g < 4; ++g) {
      const double t = kGaussT[g];
      q.points.push_back(Point{pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y)});
      q.weights.push_back(kGaussW[g] * len);
      q.edge.push_back(e);
      q.t.push_back(t);
    }
  }
  return q;
}

Eigen::VectorXcd trace(const FemSolution& sol, const BoundaryQuadrature& q) {
  const FESpace& S = *sol.space;
  const Mesh& m = S.mesh();
  Eigen::VectorXcd out(static_cast<Eigen::Index>(q.points.size()));
  double ph[3];
  for (std::size_t i = 0; i < q.points.size(); ++i) {
    const auto dofs = S.edge_dofs(m.boundary_edges[q.edge[i]]);
    edge_shape(S.order(), q.t[i], ph);
    cplx v = 0.0;
    for (std::size_t k = 0; k < dofs.size(); ++k) v += ph[k] * sol.values[static_cast<Eigen::Index>(dofs[k])];
    out[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

double l2_error(const FemSolution& sol, const std::function<cplx(Point)>& exact) {
  const FESpace& S = *sol.space;
  const Mesh& m = S.mesh();
  double acc = 0.0;
  double phi[6];
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const double area = m.triangle_area(t);
    const auto& dofs = S.element_dofs(t);
    for (const auto& q : kTriRule) {
      S.shape(q[0], q[1], phi);
      cplx v = 0.0;
      for (std::size_t i = 0; i < dofs.size(); ++i) v += phi[i] * sol.values[static_cast<Eigen::Index>(dofs[i])];
      acc += q[2] * area * std::norm(v - exact(element_point(m, t, q[0], q[1])));
    }
  }
  return std::sqrt(acc);
}

CornerFit corner_coefficient(const FemSolution& sol, const CornerModel& model, const CornerWindow& window) {
  if (!(window.r_min > 0.0) || !(window.r_max > window.r_min)) {
    std::ostringstream os;
    os << "empty corner window [" << window.r_min << ", " << window.r_max << "]";
    throw FemError(os.str());
  }
  if (window.n_radii < 1 || window.n_angles < 1) throw FemError("corner window needs samples");
  if (!model.profile) throw FemError("corner model needs an angular profile");
  const int nr = window.n_radii, na = window.n_angles;
  const double p = model.exponent;
  CornerFit fit;
  std::vector<double> theta(static_cast<std::size_t>(na)), prof(static_cast<std::size_t>(na));
  double pp = 0.0;
  for (int k = 0; k < na; ++k) {
    theta[k] = -0.5 * model.omega + (k + 0.5) * model.omega / na;
    prof[k] = model.profile(theta[k]);
    pp += prof[k] * prof[k];
  }
  if (!(pp > 0.0)) throw FemError("angular profile vanishes on all sampled rays");
  double num = 0.0, den = 0.0;
  for (int i = 0; i < nr; ++i) {
    const double r = nr == 1 ? window.r_min
                             : window.r_min * std::pow(window.r_max / window.r_min, static_cast<double>(i) / (nr - 1));
    cplx proj = 0.0;
    std::vector<cplx> u(static_cast<std::size_t>(na));
    for (int k = 0; k < na; ++k) {
      const double a = model.axis + theta[k];
      const Point x{model.corner.x + r * std::cos(a), model.corner.y + r * std::sin(a)};
      cplx v;
      try {
        v = evaluate(sol, x);
      } catch (const FemError&) {
        std::ostringstream os;
        os << "corner window leaves the domain at (" << x.x << ", " << x.y << ")";
        throw FemError(os.str());
      }
      if (model.subtract) v -= model.subtract(x);
      u[k] = v;
      proj += v * prof[k];
    }
    proj /= pp;
    for (int k = 0; k < na; ++k) {
      num += std::norm(u[k] - proj * prof[k]);
      den += std::norm(u[k]);
    }
    fit.radii.push_back(r);
    fit.projected.push_back(proj);
  }
  fit.angular_residual = den > 0.0 ? std::sqrt(num / den) : 0.0;

  const std::size_t nbasis = 1 + model.extra_exponents.size();
  if (static_cast<std::size_t>(nr) < nbasis) throw FemError("fewer radii than radial basis terms");
  auto leading = [&](double r) {
    if (model.k > 0.0) return std::tgamma(p + 1.0) * std::pow(2.0 / model.k, p) * std::cyl_bessel_j(p, model.k * r);
    return std::pow(r, p);
  };
  Eigen::MatrixXcd F(nr, static_cast<Eigen::Index>(nbasis));
  Eigen::VectorXcd c(nr);
  Eigen::VectorXd scale(static_cast<Eigen::Index>(nbasis));
  for (int i = 0; i < nr; ++i) {
    const double r = fit.radii[i];
    F(i, 0) = leading(r);
    for (std::size_t j = 0; j < model.extra_exponents.size(); ++j)
      F(i, static_cast<Eigen::Index>(j + 1)) = std::pow(r, model.extra_exponents[j]);
    c[i] = fit.projected[i];
  }
  for (Eigen::Index j = 0; j < F.cols(); ++j) {
    scale[j] = F.col(j).norm();
    F.col(j) /= scale[j];
  }
  const Eigen::VectorXcd a = F.colPivHouseholderQr().solve(c);
  const double cn = c.norm();
  fit.residual = cn > 0.0 ? (F * a - c).norm() / cn : 0.0;
  fit.c = a[0] / scale[0];
  for (std::size_t j = 0; j < model.extra_exponents.size(); ++j)
    fit.extra.push_back(a[static_cast<Eigen::Index>(j + 1)] / scale[static_cast<Eigen::Index>(j + 1)]);
  if (fit.residual > window.max_residual) {
    std::ostringstream os;
    os << "window contaminated by higher-order terms (relative residual " << fit.residual << ")";
    throw FemError(os.str());
  }
  return fit;
}

void write_solution_csv(std::ostream& os, const FemSolution& sol) {
  const Mesh& m = sol.space->mesh();
  const auto old = os.precision();
  os << std::setprecision(17);
  os << "node_index,x,y,re,im\n";
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const cplx v = sol.values[static_cast<Eigen::Index>(i)];
    os << i << "," << m.nodes[i].x << "," << m.nodes[i].y << "," << v.real() << "," << v.imag() << "\n";
  }
  os.precision(old);
}

}  // namespace rwg
