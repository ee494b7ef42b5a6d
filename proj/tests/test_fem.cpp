#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>

#include "rwg/fem.hpp"

using namespace rwg;

namespace {

constexpr double kPi = std::numbers::pi;

// Rectangle [0,a] x [-b/2, b/2], edges tagged bottom, right, top, left.
PolygonalBoundary rect(double a, double b, BoundaryTag bottom, BoundaryTag right, BoundaryTag top,
                       BoundaryTag left) {
  PolygonalBoundary p;
  p.vertices = {{0, -b / 2}, {a, -b / 2}, {a, b / 2}, {0, b / 2}};
  p.segments = {{0, 1, bottom}, {1, 2, right}, {2, 3, top}, {3, 0, left}};
  return p;
}

PolygonalBoundary dirichlet_rect(double a, double b) {
  const auto D = BoundaryTag::DIRICHLET;
  return rect(a, b, D, D, D, D);
}

std::shared_ptr<const AssembledForms> forms_of(const Mesh& m, int order) {
  return std::make_shared<const AssembledForms>(assemble(m, order));
}

FemSolution interpolate(std::shared_ptr<const FESpace> s, const std::function<cplx(Point)>& f) {
  FemSolution u;
  u.space = s;
  u.values.resize(static_cast<Eigen::Index>(s->n_dofs()));
  for (std::size_t i = 0; i < s->n_dofs(); ++i) u.values[static_cast<Eigen::Index>(i)] = f(s->dof_point(i));
  return u;
}

}  // namespace

TEST_CASE("element matrices of the unit right triangle") {
  Mesh m;
  m.nodes = {{0, 0}, {1, 0}, {0, 1}};
  m.triangles = {{0, 1, 2}};
  m.boundary_edges = {{0, 1, BoundaryTag::GAMMA_1}, {1, 2, BoundaryTag::GAMMA_1}, {2, 0, BoundaryTag::GAMMA_1}};
  const AssembledForms f = assemble(m, 1);
  const Eigen::MatrixXd M(f.M), K(f.K);
  const double area = 0.5;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(M(i, j) == doctest::Approx(area / 12.0 * (i == j ? 2.0 : 1.0)).epsilon(1e-14));
    CHECK(std::abs(K.row(i).sum()) < 1e-14);
  }
  CHECK(K(0, 0) == doctest::Approx(1.0));
  CHECK(K(1, 1) == doctest::Approx(0.5));
  // boundary mass of the full perimeter: edge mass L/6 [[2,1],[1,2]] per edge
  const Eigen::MatrixXd B(f.B.at(BoundaryTag::GAMMA_1));
  CHECK(B(0, 0) == doctest::Approx((1.0 + 1.0) / 3.0));
  CHECK(B(1, 2) == doctest::Approx(std::sqrt(2.0) / 6.0));

  Mesh bad = m;
  bad.nodes[2] = {2, 0};
  CHECK_THROWS_AS(assemble(bad, 1), FemError);
}

TEST_CASE("mass matrix is positive definite, forms symmetric") {
  const Mesh m = triangulate(dirichlet_rect(1.0, 1.0), 0.2, 0.0);
  for (int order : {1, 2}) {
    const AssembledForms f = assemble(m, order);
    const Eigen::MatrixXd M(f.M), K(f.K);
    CHECK((M - M.transpose()).norm() < 1e-14);
    CHECK((K - K.transpose()).norm() < 1e-12);
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    CHECK(llt.info() == Eigen::Success);
    // order 2 mass integrates 1 exactly: sum of all entries = area (no Dirichlet)
  }
  const auto G = BoundaryTag::GAMMA_2;
  const Mesh open = triangulate(rect(1.0, 1.0, G, G, G, G), 0.2, 0.0);
  for (int order : {1, 2}) {
    const AssembledForms f = assemble(open, order);
    CHECK(Eigen::MatrixXd(f.M).sum() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(Eigen::MatrixXd(f.B.at(G)).sum() == doctest::Approx(4.0).epsilon(1e-13));
  }
}

TEST_CASE("discrete Green identity against element-wise gradients") {
  const auto G = BoundaryTag::GAMMA_1;
  const Mesh m = triangulate(rect(1.0, 1.0, G, G, G, G), 0.15, 0.0);
  const AssembledForms f = assemble(m, 1);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(-1, 1);
  const Eigen::Index n = static_cast<Eigen::Index>(m.nodes.size());
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::VectorXcd u(n), v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = cplx(uni(rng), uni(rng));
      v[i] = cplx(uni(rng), uni(rng));
    }
    const cplx assembled = v.dot(f.K.cast<cplx>() * u);  // conj(v)^T K u
    // independent: constant gradients of the P1 interpolants per triangle
    cplx direct = 0.0;
    for (const auto& t : m.triangles) {
      const Point p0 = m.nodes[t[0]], p1 = m.nodes[t[1]], p2 = m.nodes[t[2]];
      const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
      auto grad = [&](const Eigen::VectorXcd& w) {
        const cplx d1 = w[t[1]] - w[t[0]], d2 = w[t[2]] - w[t[0]];
        const cplx gx = (d1 * (p2.y - p0.y) - d2 * (p1.y - p0.y)) / det;
        const cplx gy = (d2 * (p1.x - p0.x) - d1 * (p2.x - p0.x)) / det;
        return std::pair<cplx, cplx>{gx, gy};
      };
      const auto [ux, uy] = grad(u);
      const auto [vx, vy] = grad(v);
      direct += 0.5 * det * (ux * std::conj(vx) + uy * std::conj(vy));
    }
    // v^H K u with conj applied to v: compare to sum grad u . conj(grad v)
    CHECK(std::abs(assembled - direct) < 1e-12 * std::abs(direct));
  }
}

TEST_CASE("manufactured traveling mode: L2 convergence of orders 1 and 2") {
  const double k_sq = 20.0, nu = std::sqrt(k_sq - kPi * kPi), zeta = 1.3;
  const auto D = BoundaryTag::DIRICHLET;
  auto exact = [&](Point p) { return std::exp(cplx(0, nu * p.x)) * std::sqrt(2.0 / nu) * std::cos(kPi * p.y); };
  const auto b = rect(2.0, 1.0, D, BoundaryTag::GAMMA_2, D, BoundaryTag::GAMMA_1);
  for (int order : {1, 2}) {
    std::vector<double> err;
    for (double h : {0.1, 0.05}) {
      const Mesh m = triangulate(b, h, 0.0);
      const auto f = forms_of(m, order);
      // d_n u + i zeta u with n = -x on the left, +x on the right
      std::vector<RobinData> r{
          {BoundaryTag::GAMMA_1, cplx(0, zeta), [&](Point p) { return cplx(0, -nu + zeta) * exact(p); }},
          {BoundaryTag::GAMMA_2, cplx(0, zeta), [&](Point p) { return cplx(0, nu + zeta) * exact(p); }},
      };
      const FemSolution u = solve_robin(f, k_sq, r);
      err.push_back(l2_error(u, exact));
    }
    MESSAGE("order " << order << " L2 errors " << err[0] << " " << err[1] << " ratio " << err[0] / err[1]);
    CHECK(err[0] / err[1] >= (order == 1 ? 3.5 : 7.0));
  }
}

TEST_CASE("zero data below the spectrum gives zero") {
  const auto D = BoundaryTag::DIRICHLET;
  const Mesh m = triangulate(rect(2.0, 1.0, D, BoundaryTag::GAMMA_2, D, BoundaryTag::GAMMA_1), 0.1, 0.0);
  const auto f = forms_of(m, 2);
  const FemSolution u = solve_robin(f, 5.0, {{BoundaryTag::GAMMA_1, cplx(0, 1.0), {}}, {BoundaryTag::GAMMA_2, cplx(0, 1.0), {}}});
  CHECK(u.values.norm() == 0.0);
}

TEST_CASE("Neumann eigenvalue makes the Robin system singular") {
  const auto D = BoundaryTag::DIRICHLET;
  const Mesh m = triangulate(rect(1.0, 1.0, D, D, D, BoundaryTag::GAMMA_1), 0.1, 0.0);
  const auto f = forms_of(m, 2);
  const auto ev = solve_eigen(f, 1);
  // continuum: pi^2 + (pi/2)^2
  CHECK(ev[0].value == doctest::Approx(kPi * kPi * 1.25).epsilon(1e-3));
  CHECK_THROWS_AS(solve_robin(f, ev[0].value, {{BoundaryTag::GAMMA_1, 0.0, [](Point) { return cplx(1.0); }}}),
                  FemError);
  CHECK_NOTHROW(solve_robin(f, ev[0].value * 1.01, {{BoundaryTag::GAMMA_1, 0.0, [](Point) { return cplx(1.0); }}}));
}

TEST_CASE("Dirichlet eigenvalues of square and rectangle") {
  const double s2 = kPi * kPi;
  std::vector<double> l1;
  for (double h : {0.2, 0.1, 0.05}) {
    const Mesh m = triangulate(dirichlet_rect(1.0, 1.0), h, 0.0);
    const auto f = forms_of(m, 2);
    const auto ev = solve_eigen(f, 3);
    CHECK(ev[0].value >= 2.0 * s2);
    l1.push_back(ev[0].value);
    if (h == 0.05) {
      CHECK(ev[0].value == doctest::Approx(2.0 * s2).epsilon(1e-3));
      CHECK(ev[1].value == doctest::Approx(5.0 * s2).epsilon(2e-3));
      CHECK(ev[2].value == doctest::Approx(5.0 * s2).epsilon(2e-3));
      for (const auto& e : ev) {
        const Eigen::VectorXd v = e.vector.values.real();
        Eigen::VectorXd vf(static_cast<Eigen::Index>(f->n_free()));
        for (std::size_t i = 0; i < f->n_free(); ++i) vf[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(f->free_dofs[i])];
        CHECK(vf.dot(f->M * vf) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(e.residual < 1e-8 * e.value);
      }
    }
  }
  CHECK(l1[0] >= l1[1]);
  CHECK(l1[1] >= l1[2]);
  const Mesh r = triangulate(dirichlet_rect(2.0, 1.0), 0.05, 0.0);
  const auto ev = solve_eigen(forms_of(r, 2), 1);
  CHECK(ev[0].value == doctest::Approx(1.25 * s2).epsilon(1e-3));
  CHECK_THROWS_AS(solve_eigen(forms_of(r, 2), 0), FemError);
}

TEST_CASE("point evaluation") {
  const Mesh m = triangulate(dirichlet_rect(1.0, 1.0), 0.2, 0.0);
  auto s = std::make_shared<const FESpace>(m, 2);
  const FemSolution quad = interpolate(s, [](Point p) { return cplx(p.x * p.x - 0.3 * p.x * p.y, p.y); });
  for (std::size_t i = 0; i < m.nodes.size(); i += 7) CHECK(evaluate(quad, m.nodes[i]) == quad.values[static_cast<Eigen::Index>(i)]);
  // exact for members of the space
  const Point q{0.37, 0.11};
  CHECK(std::abs(evaluate(quad, q) - cplx(q.x * q.x - 0.3 * q.x * q.y, q.y)) < 1e-13);
  const FemSolution flat = interpolate(s, [](Point) { return cplx(2.5, -1.0); });
  const auto& t = m.triangles[3];
  const Point c{(m.nodes[t[0]].x + m.nodes[t[1]].x + m.nodes[t[2]].x) / 3, (m.nodes[t[0]].y + m.nodes[t[1]].y + m.nodes[t[2]].y) / 3};
  CHECK(std::abs(evaluate(flat, c) - cplx(2.5, -1.0)) < 1e-14);
  CHECK_THROWS_AS(evaluate(flat, std::vector<Point>{{0.5, 0.0}, {1.5, 0.0}}), FemError);
}

TEST_CASE("corner coefficient on a sector") {
  const double om = kPi / 2;
  const auto b = build_omega(0.25, om, 1.0, uniform_chord(0.05), true);
  const Mesh m = triangulate(b, SizeField(0.05, 0.5, 1.0, {Point{0, 0}}));
  auto s = std::make_shared<const FESpace>(m, 2);
  auto polar = [](Point p) { return std::pair{std::hypot(p.x, p.y), std::atan2(p.y, p.x)}; };
  CornerModel model;
  model.omega = om;
  model.exponent = 2.0;
  model.profile = [](double t) { return std::cos(2.0 * t); };
  CornerWindow w{0.02, 0.1};
  const FemSolution u1 = interpolate(s, [&](Point p) {
    const auto [r, f] = polar(p);
    return cplx(3.0 * r * r * std::cos(2 * f));
  });
  CHECK(std::abs(corner_coefficient(u1, model, w).c - 3.0) < 1e-10);
  const FemSolution u2 = interpolate(s, [&](Point p) {
    const auto [r, f] = polar(p);
    return cplx(3.0 * r * r * std::cos(2 * f) + 0.1 * std::pow(r, 6) * std::cos(6 * f));
  });
  const CornerFit fit = corner_coefficient(u2, model, w);
  CHECK(std::abs(fit.c - 3.0) < 1e-4);
  // the decaying term of a two-term radial model
  model.extra_exponents = {-2.0};
  CornerWindow w2{0.3, 0.9};
  const FemSolution u3 = interpolate(s, [&](Point p) {
    const auto [r, f] = polar(p);
    return cplx((r * r + 0.05 / (r * r)) * std::cos(2 * f));
  });
  const CornerFit f3 = corner_coefficient(u3, model, w2);
  CHECK(std::abs(f3.c - 1.0) < 1e-3);
  CHECK(std::abs(f3.extra[0] - 0.05) < 1e-3);
  CHECK_THROWS_AS(corner_coefficient(u1, model, CornerWindow{0.5, 0.4}), FemError);
}

TEST_CASE("Robin stability bound for the Laplace problem") {
  const auto D = BoundaryTag::DIRICHLET;
  const Mesh m = triangulate(rect(1.0, 1.0, D, BoundaryTag::GAMMA_2, D, D), 0.05, 0.0);
  const auto f = forms_of(m, 2);
  for (double zeta : {0.5, 2.0, 8.0}) {
    auto g = [](Point p) { return cplx(std::cos(kPi * p.y) + 0.5 * std::sin(2 * kPi * p.y)); };
    const FemSolution u = solve_robin(f, 0.0, {{BoundaryTag::GAMMA_2, zeta, g}});
    const auto q = boundary_quadrature(*u.space, BoundaryTag::GAMMA_2);
    const Eigen::VectorXcd tr = trace(u, q);
    double un = 0, gn = 0;
    for (std::size_t i = 0; i < q.points.size(); ++i) {
      un += q.weights[i] * std::norm(tr[static_cast<Eigen::Index>(i)]);
      gn += q.weights[i] * std::norm(g(q.points[i]));
    }
    CHECK(std::sqrt(un) <= 1.01 * std::sqrt(gn) / zeta);
  }
}

TEST_CASE("solution CSV") {
  const Mesh m = triangulate(dirichlet_rect(1.0, 1.0), 0.5, 0.0);
  auto s = std::make_shared<const FESpace>(m, 1);
  const FemSolution u = interpolate(s, [](Point p) { return cplx(p.x, p.y); });
  std::ostringstream os;
  write_solution_csv(os, u);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "node_index,x,y,re,im");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == m.nodes.size());
}
