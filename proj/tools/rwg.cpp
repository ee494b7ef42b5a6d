#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "rwg/config.hpp"

using namespace rwg;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kNumerical = 3;

struct Args {
  std::string config;
  std::string out = ".";
  std::string constants;
  std::vector<double> eps;
  std::vector<double> k2;
  std::vector<double> heights;
  int refine = 0;
  int count = 6;
};

std::ofstream open_out(const Args& a, const std::string& name) {
  fs::create_directories(a.out);
  const fs::path p = fs::path(a.out) / name;
  std::ofstream os(p);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

void write_json(const Args& a, const std::string& name, const nlohmann::ordered_json& j) {
  auto os = open_out(a, name);
  os << j.dump(2) << "\n";
  std::cout << (fs::path(a.out) / name).string() << "\n";
}

RunConfig setup(const Args& a) {
  if (a.config.empty()) throw ConfigError("--config FILE is required");
  RunConfig c = refined(load_config(a.config), a.refine);
  if (!a.heights.empty()) {
    for (double h : a.heights)
      if (!(h > 0.0 && h < 1.0)) throw ConfigError("--h-list entries must lie in (0, 1)");
    c.peak.heights = a.heights;
  }
  return c;
}

TunnelingConstants constants_for(const Args& a, const RunConfig& c) {
  if (!a.constants.empty()) {
    std::ifstream in(a.constants);
    if (!in) throw ConfigError("cannot open constants file '" + a.constants + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("constants file is not valid JSON: ") + e.what());
    }
    return constants_from_json(j);
  }
  return compute_constants(c.geom, c.constants, thread_count());
}

WaveguideGeometry with_eps(const Args& a, const RunConfig& c) {
  WaveguideGeometry g = c.geom;
  if (a.eps.size() > 1) throw ConfigError("this command takes a single --eps value");
  if (!a.eps.empty()) g.epsilon = a.eps.front();
  g.validate();
  return g;
}

int cmd_mesh(const Args& a) {
  const RunConfig c = setup(a);
  const WaveguideGeometry g = with_eps(a, c);
  auto emit = [&](const std::string& name, const Mesh& m) {
    auto os = open_out(a, name);
    write_mesh(os, m);
    std::cout << (fs::path(a.out) / name).string() << " nodes=" << m.nodes.size() << " triangles=" << m.triangles.size()
              << "\n";
  };
  emit("waveguide.mesh", mesh_waveguide(g, c.r_trunc, c.fem.h_max, c.fem.grading, c.fem.r_ref));
  emit("resonator.mesh", triangulate(build_resonator(g), c.constants.h_resonator, 0.0));
  emit("halfstrip.mesh", triangulate(build_halfstrip(g, c.r_trunc), c.constants.h_halfstrip, 0.0));
  const double R = c.constants.R_list.back();
  const SizeField size(c.constants.h_omega, c.constants.grading, 4.0 * g.r0, {Point{0.0, 0.0}});
  emit("omega.mesh", triangulate(build_omega(g.r0, g.omega, R, size.as_chord()), size));
  return kOk;
}

int cmd_eigen(const Args& a) {
  const RunConfig c = setup(a);
  const Mesh m = triangulate(build_resonator(c.geom), c.constants.h_resonator, 0.0);
  const auto forms = std::make_shared<const AssembledForms>(assemble(m, c.fem.order));
  const auto ev = solve_eigen(forms, static_cast<std::size_t>(a.count), 0.0);
  auto os = open_out(a, "eigen.csv");
  os << std::setprecision(17) << "index,k_sq,residual,lambda1_sq,lambda2_sq\n";
  for (std::size_t i = 0; i < ev.size(); ++i)
    os << i + 1 << "," << ev[i].value << "," << ev[i].residual << "," << ModeBasis::threshold(c.geom.l, 1) << ","
       << ModeBasis::threshold(c.geom.l, 2) << "\n";
  std::cout << (fs::path(a.out) / "eigen.csv").string() << "\n";
  return kOk;
}

int cmd_constants(const Args& a) {
  const RunConfig c = setup(a);
  const TunnelingConstants k = compute_constants(c.geom, c.constants, thread_count());
  write_json(a, "constants.json", to_json(k, c.geom));
  return kOk;
}

int cmd_scatter(const Args& a) {
  const RunConfig c = setup(a);
  if (a.k2.size() != 1) throw ConfigError("scatter needs exactly one --k2 value");
  const WaveguideGeometry g = with_eps(a, c);
  const ScatteringMatrix S = scattering_matrix(discretize_waveguide(g, c.r_trunc, c.fem), a.k2.front());
  nlohmann::ordered_json j;
  j["schema"] = "rwg-1";
  j["k_sq"] = S.k_sq;
  j["epsilon"] = S.epsilon;
  j["M"] = S.M;
  nlohmann::ordered_json s = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < S.s.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index q = 0; q < S.s.cols(); ++q) row.push_back({S.s(r, q).real(), S.s(r, q).imag()});
    s.push_back(row);
  }
  j["s"] = s;
  const Coefficients co = transmission(S, 1);
  j["T"] = co.T;
  j["R"] = co.R;
  j["unitarity_defect"] = S.unitarity_defect;
  j["symmetry_defect"] = S.symmetry_defect;
  j["R_trunc"] = S.R_trunc;
  j["h_max"] = S.h_max;
  j["zeta"] = S.zeta;
  j["warnings"] = S.warnings;
  write_json(a, "scatter.json", j);
  return kOk;
}

int cmd_sweep(const Args& a) {
  const RunConfig c = setup(a);
  std::vector<double> grid = a.k2;
  if (grid.empty()) {
    if (c.sweep.points < 1) throw ConfigError("sweep needs --k2 values or a sweep section with points >= 1");
    for (int i = 0; i < c.sweep.points; ++i)
      grid.push_back(c.sweep.points == 1 ? c.sweep.k2_min
                                         : c.sweep.k2_min + (c.sweep.k2_max - c.sweep.k2_min) * i / (c.sweep.points - 1));
  }
  const WaveguideGeometry g = with_eps(a, c);
  const Discretization disc = discretize_waveguide(g, c.r_trunc, c.fem);
  const auto rows = sweep_transmission(disc, grid, thread_count());
  auto os = open_out(a, "sweep.csv");
  write_sweep_csv(os, rows);
  std::cout << (fs::path(a.out) / "sweep.csv").string() << "\n";
  bool any_failed = false;
  for (const auto& r : rows) any_failed = any_failed || !r.ok;
  return any_failed ? kNumerical : kOk;
}

int cmd_peak(const Args& a) {
  const RunConfig c = setup(a);
  const WaveguideGeometry g = with_eps(a, c);
  const TunnelingConstants k = constants_for(a, c);
  const AsymptoticPeak ap = asymptotic_peak(k, g.omega, g.epsilon);
  if (ill_conditioned(ap, c.guard)) {
    std::cerr << "epsilon " << g.epsilon << " is ill-conditioned: relative width " << ap.width_half / ap.k_res_sq_a
              << " below guard " << c.guard << "\n";
    return kNumerical;
  }
  const NumericalPeak pk = waveguide_peak(discretize_waveguide(g, c.r_trunc, c.fem), ap, c.peak);
  nlohmann::ordered_json j = to_json(pk);
  j["k_res_sq_a"] = ap.k_res_sq_a;
  j["upsilon"] = ap.width_half;
  write_json(a, "peak.json", j);
  return kOk;
}

int cmd_compare(const Args& a) {
  const RunConfig c = setup(a);
  const std::vector<double> eps = a.eps.empty() ? c.eps_list : a.eps;
  const TunnelingConstants k = constants_for(a, c);
  CompareOptions o;
  o.fem = c.fem;
  o.r_trunc = c.r_trunc;
  o.peak = c.peak;
  o.guard = c.guard;
  o.threads = thread_count();
  const ComparisonReport rep = compare(c.geom, k, eps, o);
  {
    auto os = open_out(a, "compare.csv");
    write_compare_csv(os, rep, c.peak.heights);
    std::cout << (fs::path(a.out) / "compare.csv").string() << "\n";
  }
  {
    auto os = open_out(a, "asymptotic.csv");
    write_asymptotic_csv(os, k, c.geom.omega, eps, c.peak.heights);
    std::cout << (fs::path(a.out) / "asymptotic.csv").string() << "\n";
  }
  write_json(a, "compare.json", to_json(rep));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resonant tunneling in a waveguide with two narrows"};
  app.require_subcommand(1);
  Args a;
  app.add_option("--config", a.config, "JSON configuration file");
  app.add_option("--out", a.out, "output directory");
  app.add_option("--eps", a.eps, "narrow size(s), comma separated")->delimiter(',');
  app.add_option("--k2", a.k2, "energy value(s) k^2, comma separated")->delimiter(',');
  app.add_option("--h-list", a.heights, "peak heights for widths, comma separated")->delimiter(',');
  app.add_option("--refine", a.refine, "halve every mesh size N times")->check(CLI::NonNegativeNumber);
  app.add_option("--constants", a.constants, "reuse a constants JSON file");
  app.add_option("--count", a.count, "number of resonator eigenvalues")->check(CLI::PositiveNumber);

  int (*fn)(const Args&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*f)(const Args&)) {
    app.add_subcommand(name, help)->fallthrough()->callback([&fn, f] { fn = f; });
  };
  sub("mesh", "write the meshes of all domains", cmd_mesh);
  sub("eigen", "resonator Dirichlet spectrum", cmd_eigen);
  sub("constants", "limit-problem constants as JSON", cmd_constants);
  sub("scatter", "scattering matrix at one k^2", cmd_scatter);
  sub("sweep", "transmission over a k^2 grid", cmd_sweep);
  sub("peak", "numerical resonance peak at one epsilon", cmd_peak);
  sub("compare", "asymptotic versus numerical resonance over epsilons", cmd_compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kValidation;
  }
  try {
    return fn(a);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const GeometryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const AsymptoticError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ScatteringError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}
