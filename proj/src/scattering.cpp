#include "rwg/scattering.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace rwg {

namespace {

constexpr double kPi = std::numbers::pi;

cplx expi(double phase) { return std::polar(1.0, phase); }

// Inner product (u, v) = int u conj(v) over quadrature samples.
cplx inner(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v, const std::vector<double>& w) {
  cplx acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) acc += w[static_cast<std::size_t>(i)] * u[i] * std::conj(v[i]);
  return acc;
}

Discretization finish(const Mesh& mesh, double l, double d, double R, double eps, const FemNumerics& num) {
  Discretization disc;
  disc.forms = std::make_shared<const AssembledForms>(assemble(std::make_shared<const FESpace>(mesh, num.order)));
  disc.l = l;
  disc.d = d;
  disc.R = R;
  disc.epsilon = eps;
  disc.h_max = num.h_max;
  return disc;
}

}  // namespace

double ModeBasis::threshold(double l, int q) {
  const double v = kPi * q / l;
  return v * v;
}

double ModeBasis::lambda(int m) const { return kPi * m / l; }

double ModeBasis::psi(int m, double y) const {
  const double amp = std::sqrt(2.0 / (l * nu[static_cast<std::size_t>(m - 1)]));
  const double arg = kPi * m * y / l;
  return m % 2 == 1 ? amp * std::cos(arg) : amp * std::sin(arg);
}

double ModeBasis::delta() const { return std::sqrt(threshold(l, M + 1) - k_sq); }

ModeBasis mode_basis(double l, double k_sq) {
  if (!(l > 0.0)) throw ScatteringError("strip width must be positive");
  if (!(k_sq > ModeBasis::threshold(l, 1))) {
    std::ostringstream os;
    os << "k^2 = " << k_sq << " is not above the first threshold " << ModeBasis::threshold(l, 1);
    throw ScatteringError(os.str());
  }
  ModeBasis b;
  b.l = l;
  b.k_sq = k_sq;
  int q = 1;
  while (ModeBasis::threshold(l, q) < k_sq) ++q;
  const double th = ModeBasis::threshold(l, q);
  if (std::abs(th - k_sq) <= 1e-12 * th) {
    std::ostringstream os;
    os << "k^2 = " << k_sq << " coincides with threshold " << q;
    throw ScatteringError(os.str());
  }
  b.M = q - 1;
  for (int m = 1; m <= b.M; ++m) b.nu.push_back(std::sqrt(k_sq - ModeBasis::threshold(l, m)));
  return b;
}

double default_truncation(const ModeBasis& basis) { return std::max(3.0 * basis.l, 6.0 / basis.delta()); }

Discretization discretize_waveguide(const WaveguideGeometry& geom, double r_trunc, const FemNumerics& num) {
  geom.validate();
  const Mesh mesh = mesh_waveguide(geom, r_trunc, num.h_max, num.grading, num.r_ref);
  return finish(mesh, geom.l, geom.d, r_trunc, geom.epsilon, num);
}

Discretization discretize_strip(double l, double d, double r_trunc, const FemNumerics& num) {
  const Mesh mesh = triangulate(build_strip(l, -r_trunc, d + r_trunc), num.h_max, 0.0);
  return finish(mesh, l, d, r_trunc, 0.0, num);
}

RadiationSolutions radiation_solutions(const Discretization& disc, const ModeBasis& basis, double zeta,
                                       const SolveOptions& opts) {
  if (zeta == 0.0) throw ScatteringError("Robin parameter zeta must be nonzero");
  const int M = basis.M;
  const double R = disc.R, xr = disc.d + disc.R;
  const cplx kap(0.0, zeta);
  RobinSolver solver(disc.forms, basis.k_sq, {{BoundaryTag::GAMMA_1, kap}, {BoundaryTag::GAMMA_2, kap}}, opts);
  RadiationSolutions out;
  out.zeta = zeta;
  for (int sign : {+1, -1}) {
    auto& dst = sign > 0 ? out.plus : out.minus;
    for (int j = 1; j <= 2 * M; ++j) {
      const int m = j <= M ? j : j - M;
      const double nu = basis.nu[static_cast<std::size_t>(m - 1)];
      // data of e^{+i nu x} (sign +) or e^{-i nu x} (sign -) at the left end, and
      // of e^{-i nu x} (sign +) or e^{+i nu x} (sign -) at the right end
      const cplx amp = j <= M ? cplx(0.0, -sign * nu + zeta) * expi(-sign * nu * R)
                              : cplx(0.0, -sign * nu + zeta) * expi(-sign * nu * xr);
      const BoundaryTag tag = j <= M ? BoundaryTag::GAMMA_1 : BoundaryTag::GAMMA_2;
      auto g = [amp, m, &basis](Point p) { return amp * basis.psi(m, p.y); };
      dst.push_back(solver.solve({{tag, g}}));
    }
  }
  return out;
}

EFG assemble_EFG(const RadiationSolutions& v, const ModeBasis& basis, const Discretization& disc) {
  const int M = basis.M;
  const int n = 2 * M;
  if (static_cast<int>(v.plus.size()) != n || static_cast<int>(v.minus.size()) != n)
    throw ScatteringError("radiation solutions do not match the mode basis");
  const FESpace& S = *disc.forms->space;
  const BoundaryQuadrature q1 = boundary_quadrature(S, BoundaryTag::GAMMA_1);
  const BoundaryQuadrature q2 = boundary_quadrature(S, BoundaryTag::GAMMA_2);
  if (q1.points.empty() || q2.points.empty()) throw ScatteringError("mesh has no GAMMA_1 / GAMMA_2 edges");
  const double R = disc.R, xr = disc.d + disc.R;
  // phi_j^-: v_j^- minus the outgoing mode on its own end; phi_m^+: v_m^+ minus the incoming one
  auto shifted = [&](const FemSolution& sol, int j, int sign, const BoundaryQuadrature& q, int end) {
    Eigen::VectorXcd t = trace(sol, q);
    const int m = j <= M ? j : j - M;
    const bool own = (j <= M && end == 1) || (j > M && end == 2);
    if (own) {
      const double nu = basis.nu[static_cast<std::size_t>(m - 1)];
      const double x = end == 1 ? -R : xr;
      // incoming: e^{i nu x} left, e^{-i nu x} right; outgoing the opposite
      const cplx a = expi(end == 1 ? sign * nu * x : -sign * nu * x);
      for (std::size_t i = 0; i < q.points.size(); ++i) t[static_cast<Eigen::Index>(i)] -= a * basis.psi(m, q.points[i].y);
    }
    return t;
  };
  std::vector<Eigen::VectorXcd> pm1, pm2, pp1, pp2;
  for (int j = 1; j <= n; ++j) {
    pm1.push_back(shifted(v.minus[static_cast<std::size_t>(j - 1)], j, -1, q1, 1));
    pm2.push_back(shifted(v.minus[static_cast<std::size_t>(j - 1)], j, -1, q2, 2));
    pp1.push_back(shifted(v.plus[static_cast<std::size_t>(j - 1)], j, +1, q1, 1));
    pp2.push_back(shifted(v.plus[static_cast<std::size_t>(j - 1)], j, +1, q2, 2));
  }
  EFG r;
  r.E.resize(n, n);
  r.F.resize(n, n);
  r.G.resize(n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      r.E(a, b) = inner(pm1[a], pm1[b], q1.weights) + inner(pm2[a], pm2[b], q2.weights);
      r.F(a, b) = inner(pp1[a], pm1[b], q1.weights) + inner(pp2[a], pm2[b], q2.weights);
    }
    r.G[a] = std::real(inner(pp1[a], pp1[a], q1.weights) + inner(pp2[a], pp2[a], q2.weights));
  }
  return r;
}

ScatteringMatrix scattering_matrix(const Discretization& disc, double k_sq, const ScatterOptions& opts) {
  const ModeBasis basis = mode_basis(disc.l, k_sq);
  const int M = basis.M;
  ScatteringMatrix S;
  S.M = M;
  S.k_sq = k_sq;
  S.epsilon = disc.epsilon;
  S.R_trunc = disc.R;
  S.h_max = disc.h_max;
  const double evanescent = std::exp(-basis.delta() * disc.R);
  if (evanescent >= 1e-8) {
    std::ostringstream os;
    os << "truncation R = " << disc.R << " leaves evanescent factor " << evanescent << " >= 1e-8";
    S.warnings.push_back(os.str());
  }
  const double zeta = opts.zeta != 0.0 ? opts.zeta : -basis.nu[0];
  S.zeta = zeta;
  S.shortcut = M == 1 && zeta == -basis.nu[0] && !opts.general;
  const RadiationSolutions v = radiation_solutions(disc, basis, zeta, opts.solve);
  const EFG efg = assemble_EFG(v, basis, disc);
  if (S.shortcut) {
    S.s = -basis.nu[0] * efg.F;
  } else {
    // s E = -F  <=>  E^T s^T = -F^T
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(efg.E.transpose());
    if (!lu.isInvertible()) throw ScatteringError("matrix E is singular");
    S.s = lu.solve(-efg.F.transpose()).transpose();
  }
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(2 * M, 2 * M);
  S.unitarity_defect = (S.s.adjoint() * S.s - I).cwiseAbs().maxCoeff();
  // modes on both ends are phased at x = 0, so x -> d - x maps s_ab to s_{M+a,M+b} e^{i(nu_a+nu_b)d}
  double sym = 0.0;
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b) {
      const double nab = basis.nu[static_cast<std::size_t>(a)] + basis.nu[static_cast<std::size_t>(b)];
      sym = std::max(sym, std::abs(S.s(a, b) - S.s(M + a, M + b) * expi(nab * disc.d)));
      sym = std::max(sym, std::abs(S.s(a, M + b) - S.s(M + a, b)));
    }
  S.symmetry_defect = sym;
  return S;
}

ScatteringMatrix scattering_matrix(const WaveguideGeometry& geom, double k_sq, double r_trunc,
                                   const FemNumerics& num, const ScatterOptions& opts) {
  const ModeBasis basis = mode_basis(geom.l, k_sq);
  const double R = r_trunc > 0.0 ? r_trunc : default_truncation(basis);
  return scattering_matrix(discretize_waveguide(geom, R, num), k_sq, opts);
}

Coefficients transmission(const ScatteringMatrix& S, int m) {
  if (m < 1 || m > S.M) throw ScatteringError("incident mode index out of range");
  Coefficients c;
  for (int j = 0; j < S.M; ++j) {
    c.R += std::norm(S.s(m - 1, j));
    c.T += std::norm(S.s(m - 1, S.M + j));
  }
  return c;
}

}  // namespace rwg
