#include "rwg/constants.hpp"

#include <cmath>
#include <future>
#include <numbers>
#include <sstream>

#include "rwg/scattering.hpp"

namespace rwg {

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const AssembledForms> forms_on(const Mesh& mesh, int order) {
  return std::make_shared<const AssembledForms>(assemble(std::make_shared<const FESpace>(mesh, order)));
}

CornerModel vertex_model(Point corner, double axis, const WaveguideGeometry& geom, double k) {
  CornerModel m;
  m.corner = corner;
  m.axis = axis;
  m.omega = geom.omega;
  m.exponent = geom.exponent();
  const double p = m.exponent;
  m.profile = [p](double t) { return corner_profile(p, t); };
  m.k = k;
  return m;
}

CornerWindow vertex_window(const WaveguideGeometry& geom, const ConstantsNumerics& num) {
  // the cone sides meet the walls at this distance from the vertex
  const double reach = std::hypot(geom.wall_offset(), 0.5 * geom.l);
  if (!(num.r_max < reach)) {
    std::ostringstream os;
    os << "corner window r_max = " << num.r_max << " reaches past the cone sector (" << reach << ")";
    throw ConstantsError(os.str());
  }
  CornerWindow w;
  w.r_min = num.r_min;
  w.r_max = num.r_max;
  w.n_radii = 6;
  return w;
}

double wrap_deg(double a) {
  double d = std::remainder(a, 2.0 * kPi);
  return std::abs(d) * 180.0 / kPi;
}

double rel_change(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), 1e-300); }

}  // namespace

double corner_profile(double exponent, double theta) { return std::cos(exponent * theta) / std::sqrt(kPi); }

ResonatorConstants resonator_constants(const WaveguideGeometry& geom, const ConstantsNumerics& num) {
  const CornerWindow win = vertex_window(geom, num);
  const Mesh mesh = triangulate(build_resonator(geom), num.h_resonator, 0.0);
  const auto forms = forms_on(mesh, num.order);
  const std::vector<EigenPair> ev = solve_eigen(forms, 2, 0.0);
  ResonatorConstants r;
  r.n_dofs = forms->n_free();
  r.k0_sq = ev[0].value;
  const double lo = ModeBasis::threshold(geom.l, 1), hi = ModeBasis::threshold(geom.l, 2);
  if (!(r.k0_sq > lo && r.k0_sq < hi)) {
    std::ostringstream os;
    os << "resonance outside one-mode window; adjust geometry (k0^2 = " << r.k0_sq << ", window (" << lo << ", "
       << hi << "))";
    throw ConstantsError(os.str());
  }
  r.gap_below = r.k0_sq - lo;
  r.gap_next = ev[1].value - r.k0_sq;
  if (!(r.gap_next > 1e-6 * r.k0_sq)) throw ConstantsError("first resonator eigenvalue is nearly degenerate");
  const double k = std::sqrt(r.k0_sq);
  const CornerFit f1 = corner_coefficient(ev[0].vector, vertex_model({0.0, 0.0}, 0.0, geom, k), win);
  const CornerFit f2 = corner_coefficient(ev[0].vector, vertex_model({geom.d, 0.0}, kPi, geom, k), win);
  const double sign = f1.c.real() < 0.0 ? -1.0 : 1.0;
  r.b1 = sign * f1.c.real();
  r.b2 = sign * f2.c.real();
  r.fit_residual = std::max(f1.residual, f2.residual);
  if (r.b1 == 0.0) throw ConstantsError("corner coefficient b1 vanishes");
  r.q_raw = r.b2 / r.b1;
  r.q = r.q_raw < 0.0 ? -1 : 1;
  return r;
}

AmplitudeConstant amplitude_constant(const WaveguideGeometry& geom, double k_sq, double r_trunc,
                                     const ConstantsNumerics& num) {
  const ModeBasis basis = mode_basis(geom.l, k_sq);
  if (basis.M != 1) throw ConstantsError("amplitude problem needs exactly one open channel");
  const double R = r_trunc > 0.0 ? r_trunc : default_truncation(basis);
  const CornerWindow win = vertex_window(geom, num);
  const Mesh mesh = triangulate(build_halfstrip(geom, R), num.h_halfstrip, 0.0);
  const auto forms = forms_on(mesh, num.order);
  const double nu = basis.nu[0];
  RobinSolver solver(forms, k_sq, {{BoundaryTag::GAMMA_1, cplx(0.0, nu)}});
  const cplx amp = cplx(0.0, 2.0 * nu) * std::polar(1.0, nu * R);
  const FemSolution V = solver.solve({{BoundaryTag::GAMMA_1, [&](Point p) { return amp * basis.psi(1, p.y); }}});

  AmplitudeConstant a;
  a.k_sq = k_sq;
  a.R_trunc = R;
  a.n_dofs = forms->n_free();
  const CornerFit f = corner_coefficient(V, vertex_model({0.0, 0.0}, kPi, geom, std::sqrt(k_sq)), win);
  a.a_bold = f.c;
  a.fit_residual = f.residual;
  a.A_abs = std::abs(f.c) / 2.0;

  const BoundaryQuadrature q = boundary_quadrature(*forms->space, BoundaryTag::GAMMA_1);
  const Eigen::VectorXcd t = trace(V, q);
  cplx c = 0.0;
  for (std::size_t i = 0; i < q.points.size(); ++i)
    c += q.weights[i] * t[static_cast<Eigen::Index>(i)] * basis.psi(1, q.points[i].y);
  c *= nu;
  a.r = (c - std::polar(1.0, nu * R)) * std::polar(1.0, nu * R);
  a.phase_error_deg = wrap_deg(std::arg(a.r) - 2.0 * std::arg(a.a_bold));
  if (std::abs(std::abs(a.r) - 1.0) > 0.02) {
    std::ostringstream os;
    os << "truncation or mesh too coarse (|r| = " << std::abs(a.r) << ")";
    throw ConstantsError(os.str());
  }
  return a;
}

NarrowConstants narrow_constants(double r0, double omega, const std::vector<double>& R_list,
                                 const ConstantsNumerics& num, bool single_sector) {
  if (R_list.empty()) throw ConstantsError("empty R_list");
  for (std::size_t i = 1; i < R_list.size(); ++i)
    if (!(R_list[i] > R_list[i - 1])) throw ConstantsError("R_list must be strictly ascending");
  const double p = kPi / omega;
  const Point origin{0.0, 0.0};
  NarrowConstants out;
  for (double R : R_list) {
    if (!(R / 2.0 > 2.0 * r0)) {
      std::ostringstream os;
      os << "R = " << R << " leaves no fitting window beyond 2 r0";
      throw ConstantsError(os.str());
    }
    const SizeField size(num.h_omega, num.grading, 4.0 * r0, {origin});
    const PolygonalBoundary b = build_omega(r0, omega, R, size.as_chord(), single_sector);
    const auto forms = forms_on(triangulate(b, size), num.order);
    const cplx kap(p / R, 0.0);
    SolveOptions so;
    so.check_singular = false;  // positive definite: Laplacian with positive Robin term
    RobinSolver solver(forms, 0.0, {{BoundaryTag::GAMMA_1, kap}, {BoundaryTag::GAMMA_2, kap}}, so);
    const double gscale = 2.0 * p * std::pow(R, p - 1.0);
    const FemSolution W = solver.solve(
        {{BoundaryTag::GAMMA_2, [&](Point x) { return cplx(gscale * corner_profile(p, std::atan2(x.y, x.x)), 0.0); }}});

    CornerWindow win;
    win.r_min = 2.0 * r0;
    win.r_max = R / 2.0;
    win.n_radii = 8;
    win.max_residual = 1e-3;
    CornerModel right;
    right.corner = origin;
    right.axis = 0.0;
    right.omega = omega;
    right.exponent = p;
    right.profile = [p](double t) { return corner_profile(p, t); };
    right.extra_exponents = {-p};
    const CornerFit fr = corner_coefficient(W, right, win);
    out.R.push_back(R);
    out.lead_R.push_back(fr.c.real());
    out.alpha_R.push_back(fr.extra[0].real() / fr.c.real());
    out.max_fit_residual = std::max(out.max_fit_residual, fr.residual);
    if (!single_sector) {
      CornerModel left = right;
      left.axis = kPi;
      left.exponent = -p;
      left.extra_exponents.clear();
      const CornerFit fl = corner_coefficient(W, left, win);
      out.beta_R.push_back(fl.c.real());
      out.max_fit_residual = std::max(out.max_fit_residual, fl.residual);
    }
  }
  const std::size_t n = out.R.size();
  auto extrapolate = [&](const std::vector<double>& v) {
    if (n < 2) return v.back();
    const double w1 = std::pow(out.R[n - 2], 3.0 * p), w2 = std::pow(out.R[n - 1], 3.0 * p);
    return (w2 * v[n - 1] - w1 * v[n - 2]) / (w2 - w1);
  };
  // changes below this floor are discretization noise, not truncation error
  auto check = [&](const std::vector<double>& v, std::vector<double>& delta, const char* name) {
    for (std::size_t i = 1; i < v.size(); ++i) delta.push_back(std::abs(v[i] - v[i - 1]));
    const double floor = 1e-5 * std::max(1.0, std::abs(v.back()));
    for (std::size_t i = 1; i < delta.size(); ++i)
      if (delta[i] > delta[i - 1] && delta[i] > floor) {
        std::ostringstream os;
        os << "narrow-domain truncation not converged (" << name << " changes grow with R)";
        throw ConstantsError(os.str());
      }
  };
  check(out.alpha_R, out.alpha_delta, "alpha");
  out.alpha = extrapolate(out.alpha_R);
  if (!single_sector) {
    check(out.beta_R, out.beta_delta, "beta");
    out.beta = extrapolate(out.beta_R);
  }
  return out;
}

double tunneling_P(double b1, double beta, double A_abs) { return 1.0 / (2.0 * b1 * b1 * beta * beta * A_abs * A_abs); }

TunnelingConstants assemble_constants(const ResonatorConstants& res, const AmplitudeConstant& amp,
                                      const NarrowConstants& narrow) {
  std::vector<std::string> bad;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  need(std::isfinite(res.b1) && res.b1 != 0.0, "b1 must be finite and nonzero");
  need(std::isfinite(narrow.beta) && narrow.beta != 0.0, "beta must be finite and nonzero");
  need(std::isfinite(narrow.alpha), "alpha must be finite");
  need(std::abs(std::abs(res.q_raw) - 1.0) <= 0.02, "|b2/b1| differs from 1 by more than 2% (symmetry violated; mesh suspect)");
  need(res.q == 1 || res.q == -1, "q must be +1 or -1");
  need(std::isfinite(amp.A_abs) && amp.A_abs > 0.0, "|A| must be positive");
  need(res.k0_sq > 0.0, "k0^2 must be positive");
  if (!bad.empty()) {
    std::ostringstream os;
    os << "invalid tunneling constants:";
    for (const auto& s : bad) os << " " << s << ";";
    throw ConstantsError(os.str());
  }
  TunnelingConstants c;
  c.k0_sq = res.k0_sq;
  c.b1 = res.b1;
  c.q = res.q;
  c.A_abs = amp.A_abs;
  c.a_bold = amp.a_bold;
  c.alpha = narrow.alpha;
  c.beta = narrow.beta;
  c.P = tunneling_P(c.b1, c.beta, c.A_abs);
  c.resonator = res;
  c.amplitude = amp;
  c.narrow = narrow;
  return c;
}

TunnelingConstants compute_constants(const WaveguideGeometry& geom, const ConstantsNumerics& num, unsigned threads) {
  geom.validate();
  auto outer = [&] {
    ResonatorConstants res = resonator_constants(geom, num);
    AmplitudeConstant amp = amplitude_constant(geom, res.k0_sq, num.r_trunc, num);
    return std::make_pair(res, amp);
  };
  auto inner = [&] { return narrow_constants(geom.r0, geom.omega, num.R_list, num); };
  std::pair<ResonatorConstants, AmplitudeConstant> ra;
  NarrowConstants nc;
  if (threads > 1) {
    auto fut = std::async(std::launch::async, inner);
    ra = outer();
    nc = fut.get();
  } else {
    ra = outer();
    nc = inner();
  }
  TunnelingConstants c = assemble_constants(ra.first, ra.second, nc);
  if (num.refine_check) {
    ConstantsNumerics fine = num;
    fine.refine_check = false;
    fine.h_resonator /= 2.0;
    fine.h_halfstrip /= 2.0;
    fine.h_omega /= 2.0;
    const TunnelingConstants f = compute_constants(geom, fine, threads);
    c.refine_deltas = {{"k0_sq", rel_change(c.k0_sq, f.k0_sq)}, {"b1", rel_change(c.b1, f.b1)},
                       {"A_abs", rel_change(c.A_abs, f.A_abs)}, {"alpha", rel_change(c.alpha, f.alpha)},
                       {"beta", rel_change(c.beta, f.beta)},   {"P", rel_change(c.P, f.P)}};
  }
  return c;
}

nlohmann::ordered_json to_json(const TunnelingConstants& c, const WaveguideGeometry& geom) {
  nlohmann::ordered_json j;
  j["schema"] = "rwg-1";
  j["convention"] = "phi0=1/sqrt(pi)";
  j["k0_sq"] = c.k0_sq;
  j["b1"] = c.b1;
  j["q"] = c.q;
  j["A_abs"] = c.A_abs;
  j["a_bold"] = {c.a_bold.real(), c.a_bold.imag()};
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["P"] = c.P;
  nlohmann::ordered_json d;
  d["resonator"] = {{"b2", c.resonator.b2},
                    {"q_raw", c.resonator.q_raw},
                    {"gap_below", c.resonator.gap_below},
                    {"gap_next", c.resonator.gap_next},
                    {"fit_residual", c.resonator.fit_residual},
                    {"n_dofs", c.resonator.n_dofs}};
  d["amplitude"] = {{"k_sq", c.amplitude.k_sq},
                    {"R_trunc", c.amplitude.R_trunc},
                    {"r", {c.amplitude.r.real(), c.amplitude.r.imag()}},
                    {"abs_r", std::abs(c.amplitude.r)},
                    {"phase_error_deg", c.amplitude.phase_error_deg},
                    {"fit_residual", c.amplitude.fit_residual},
                    {"n_dofs", c.amplitude.n_dofs}};
  d["narrow"] = {{"R", c.narrow.R},
                 {"alpha_R", c.narrow.alpha_R},
                 {"beta_R", c.narrow.beta_R},
                 {"lead_R", c.narrow.lead_R},
                 {"alpha_delta", c.narrow.alpha_delta},
                 {"beta_delta", c.narrow.beta_delta},
                 {"max_fit_residual", c.narrow.max_fit_residual}};
  nlohmann::ordered_json rd = nlohmann::ordered_json::object();
  for (const auto& [k, v] : c.refine_deltas) rd[k] = v;
  d["refine_deltas"] = rd;
  j["diagnostics"] = d;
  j["geometry"] = {{"l", geom.l}, {"omega", geom.omega}, {"d", geom.d}, {"r0", geom.r0}};
  return j;
}

TunnelingConstants constants_from_json(const nlohmann::json& j) {
  TunnelingConstants c;
  try {
    c.k0_sq = j.at("k0_sq").get<double>();
    c.b1 = j.at("b1").get<double>();
    c.q = j.at("q").get<int>();
    c.A_abs = j.at("A_abs").get<double>();
    const auto a = j.at("a_bold");
    c.a_bold = cplx(a.at(0).get<double>(), a.at(1).get<double>());
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.P = j.at("P").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConstantsError(std::string("malformed constants JSON: ") + e.what());
  }
  return c;
}

}  // namespace rwg
