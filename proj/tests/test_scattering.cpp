#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rwg/scattering.hpp"

using namespace rwg;

namespace {

constexpr double kPi = std::numbers::pi;

FemNumerics coarse(double h, int order = 2) {
  FemNumerics n;
  n.h_max = h;
  n.order = order;
  return n;
}

}  // namespace

TEST_CASE("mode basis counts propagating modes and their wavenumbers") {
  const ModeBasis b = mode_basis(1.0, 20.0);
  CHECK(b.M == 1);
  // [DERIVED] sqrt(20 - pi^2)
  CHECK(b.nu[0] == doctest::Approx(3.1828282389897575).epsilon(1e-14));
  // [DERIVED] sqrt(4 pi^2 - 20)
  CHECK(b.delta() == doctest::Approx(4.413436031524353).epsilon(1e-14));

  const ModeBasis b2 = mode_basis(1.0, 45.0);
  CHECK(b2.M == 2);
  CHECK(b2.nu[0] == doctest::Approx(5.927089977291608).epsilon(1e-14));
  CHECK(b2.nu[1] == doctest::Approx(2.349804756919725).epsilon(1e-14));
}

TEST_CASE("mode basis rejects thresholds and energies below the first one") {
  CHECK_THROWS_AS(mode_basis(1.0, 4.0 * kPi * kPi), ScatteringError);
  CHECK_THROWS_AS(mode_basis(1.0, 9.0), ScatteringError);
  CHECK_THROWS_AS(mode_basis(0.0, 20.0), ScatteringError);
}

TEST_CASE("transverse modes carry unit flux") {
  const ModeBasis b = mode_basis(1.0, 45.0);
  for (int m = 1; m <= 2; ++m) {
    // nu_m int Psi_m^2 dy = 1, by composite Simpson
    const int n = 2000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double y = -0.5 + static_cast<double>(i) / n;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * b.psi(m, y) * b.psi(m, y);
    }
    acc /= 3.0 * n;
    CHECK(b.nu[static_cast<std::size_t>(m - 1)] * acc == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(b.psi(m, 0.5)) < 1e-12);
    CHECK(std::abs(b.psi(m, -0.5)) < 1e-12);
  }
}

TEST_CASE("default truncation") {
  const ModeBasis b = mode_basis(1.0, 20.0);
  CHECK(default_truncation(b) == doctest::Approx(3.0));
  const ModeBasis b2 = mode_basis(1.0, 39.0);
  CHECK(default_truncation(b2) == doctest::Approx(6.0 / std::sqrt(4.0 * kPi * kPi - 39.0)));
}

TEST_CASE("straight strip transmits fully") {
  const Discretization disc = discretize_strip(1.0, 2.0, 3.0, coarse(0.1));
  const ScatteringMatrix S = scattering_matrix(disc, 20.0);
  REQUIRE(S.M == 1);
  CHECK(S.shortcut);
  CHECK(std::abs(S.s(0, 1) - 1.0) < 1e-3);
  CHECK(std::abs(S.s(0, 0)) < 1e-3);
  const Coefficients c = transmission(S, 1);
  CHECK(c.T == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(c.R + c.T == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("radiation solution in a strip is the incoming wave") {
  const Discretization disc = discretize_strip(1.0, 2.0, 3.0, coarse(0.1));
  const ModeBasis b = mode_basis(1.0, 20.0);
  const double nu = b.nu[0];
  const RadiationSolutions v = radiation_solutions(disc, b, -nu);
  for (double x : {-2.0, 0.3, 1.7, 4.1}) {
    for (double y : {-0.3, 0.0, 0.21}) {
      const cplx exact = std::polar(1.0, nu * x) * b.psi(1, y);
      CHECK(std::abs(evaluate(v.plus[0], {x, y}) - exact) < 1e-3);
      CHECK(std::abs(evaluate(v.minus[0], {x, y})) < 1e-12);
    }
  }
  CHECK_THROWS_AS(radiation_solutions(disc, b, 0.0), ScatteringError);
}

TEST_CASE("E reduces to identity over nu for the matched Robin parameter") {
  const WaveguideGeometry g;
  const Discretization disc = discretize_waveguide(g, 3.0, coarse(0.12));
  const ModeBasis b = mode_basis(1.0, 20.0);
  const EFG efg = assemble_EFG(radiation_solutions(disc, b, -b.nu[0]), b, disc);
  const Eigen::MatrixXcd expect = Eigen::MatrixXcd::Identity(2, 2) / b.nu[0];
  CHECK((efg.E - expect).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(efg.G.minCoeff() >= 0.0);
}

TEST_CASE("shortcut and general solve agree; symmetric narrows give a symmetric s") {
  WaveguideGeometry g;
  g.epsilon = 0.3;
  const Discretization disc = discretize_waveguide(g, 3.0, coarse(0.12));
  ScatterOptions opts;
  const ScatteringMatrix a = scattering_matrix(disc, 20.0, opts);
  opts.general = true;
  const ScatteringMatrix b = scattering_matrix(disc, 20.0, opts);
  CHECK(a.shortcut);
  CHECK_FALSE(b.shortcut);
  CHECK((a.s - b.s).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(a.symmetry_defect < 1e-3);
  CHECK(a.unitarity_defect < 1e-2);
  CHECK(std::abs(a.s(0, 1) - a.s(1, 0)) < 1e-3);
  // [DERIVED] mirror image of the left-incident field, with modes phased at x = 0
  const double nu = mode_basis(1.0, 20.0).nu[0];
  CHECK(std::abs(a.s(1, 1) - a.s(0, 0) * std::polar(1.0, -2.0 * nu * g.d)) < 1e-3);

  opts.zeta = -1.0;
  const ScatteringMatrix c = scattering_matrix(disc, 20.0, opts);
  CHECK_FALSE(c.shortcut);
  CHECK((a.s - c.s).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("two open channels through a strip") {
  const Discretization disc = discretize_strip(1.0, 1.0, 3.0, coarse(0.08));
  const ScatteringMatrix S = scattering_matrix(disc, 45.0);
  REQUIRE(S.M == 2);
  CHECK_FALSE(S.shortcut);
  CHECK(S.unitarity_defect < 1e-3);
  for (int m = 1; m <= 2; ++m) CHECK(transmission(S, m).T == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("short truncation is reported") {
  const Discretization disc = discretize_strip(1.0, 1.0, 1.0, coarse(0.2, 1));
  const ScatteringMatrix S = scattering_matrix(disc, 20.0);
  CHECK_FALSE(S.warnings.empty());
}

TEST_CASE("transmission arithmetic") {
  ScatteringMatrix S;
  S.M = 1;
  S.s.resize(2, 2);
  S.s << cplx(0.6, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.8), cplx(0.6, 0.0);
  const Coefficients c = transmission(S, 1);
  CHECK(c.R == doctest::Approx(0.36));
  CHECK(c.T == doctest::Approx(0.64));
  CHECK_THROWS_AS(transmission(S, 2), ScatteringError);
}
