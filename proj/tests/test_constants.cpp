#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rwg/constants.hpp"

using namespace rwg;

namespace {

constexpr double kPi = std::numbers::pi;

ResonatorConstants fake_resonator(double b1, double q_raw) {
  ResonatorConstants r;
  r.k0_sq = 14.0;
  r.b1 = b1;
  r.b2 = q_raw * b1;
  r.q_raw = q_raw;
  r.q = q_raw < 0 ? -1 : 1;
  return r;
}

AmplitudeConstant fake_amplitude(double A) {
  AmplitudeConstant a;
  a.A_abs = A;
  a.a_bold = cplx(0.0, 2.0 * A);
  return a;
}

NarrowConstants fake_narrow(double alpha, double beta) {
  NarrowConstants n;
  n.alpha = alpha;
  n.beta = beta;
  return n;
}

}  // namespace

TEST_CASE("angular profile") {
  CHECK(corner_profile(2.0, 0.0) == doctest::Approx(1.0 / std::sqrt(kPi)).epsilon(1e-15));
  CHECK(std::abs(corner_profile(2.0, kPi / 4.0)) < 1e-15);
}

TEST_CASE("P from the constants") {
  // [DERIVED] 1 / (2 * 2.25 * 0.16 * 0.81)
  CHECK(tunneling_P(1.5, 0.4, 0.9) == doctest::Approx(1.714677640603567).epsilon(1e-14));
  const TunnelingConstants c = assemble_constants(fake_resonator(1.5, 1.0), fake_amplitude(0.9), fake_narrow(0.1, 0.4));
  CHECK(c.P == doctest::Approx(1.714677640603567).epsilon(1e-14));
  CHECK(c.q == 1);
}

TEST_CASE("invariant violations are aggregated") {
  CHECK_THROWS_AS(assemble_constants(fake_resonator(1.5, 1.0), fake_amplitude(0.9), fake_narrow(0.1, 0.0)),
                  ConstantsError);
  CHECK_THROWS_AS(assemble_constants(fake_resonator(1.5, 0.5), fake_amplitude(0.9), fake_narrow(0.1, 0.4)),
                  ConstantsError);
  try {
    assemble_constants(fake_resonator(0.0, 0.5), fake_amplitude(0.9), fake_narrow(0.1, 0.0));
    FAIL("expected an error");
  } catch (const ConstantsError& e) {
    const std::string m = e.what();
    CHECK(m.find("b1") != std::string::npos);
    CHECK(m.find("beta") != std::string::npos);
  }
}

TEST_CASE("single-sector narrow has alpha = 0") {
  ConstantsNumerics num;
  const NarrowConstants n = narrow_constants(0.5, kPi / 2.0, {4.0, 8.0}, num, true);
  for (double a : n.alpha_R) CHECK(std::abs(a) < 1e-3);
  for (double l : n.lead_R) CHECK(l == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("narrow constants argument checks") {
  CHECK_THROWS_AS(narrow_constants(0.5, kPi / 2.0, {}), ConstantsError);
  CHECK_THROWS_AS(narrow_constants(0.5, kPi / 2.0, {6.0, 4.0}), ConstantsError);
  CHECK_THROWS_AS(narrow_constants(0.5, kPi / 2.0, {1.5}), ConstantsError);
}

TEST_CASE("narrow constants converge in R") {
  const NarrowConstants n = narrow_constants(0.5, kPi / 2.0, {4.0, 8.0});
  REQUIRE(n.beta_R.size() == 2);
  CHECK(n.beta != 0.0);
  CHECK(std::abs(n.beta_R[1] - n.beta_R[0]) <= 0.01 * std::abs(n.beta_R[1]));
  CHECK(n.max_fit_residual < 1e-3);
}

TEST_CASE("resonator constants on the default geometry") {
  const WaveguideGeometry g;
  const ResonatorConstants r = resonator_constants(g);
  CHECK(r.k0_sq > kPi * kPi);
  CHECK(r.k0_sq < 4.0 * kPi * kPi);
  CHECK(r.b1 > 0.0);
  CHECK(std::abs(r.q_raw - r.q) <= 0.02);
  ConstantsNumerics fine;
  fine.h_resonator = 0.015;
  const ResonatorConstants rf = resonator_constants(g, fine);
  CHECK(rf.k0_sq == doctest::Approx(r.k0_sq).epsilon(1e-6));
  CHECK(rf.b1 == doctest::Approx(r.b1).epsilon(1e-3));
}

TEST_CASE("resonance outside the one-mode window is rejected") {
  WaveguideGeometry g;
  g.omega = 0.9 * kPi;
  g.r0 = 0.05;
  g.d = 0.5;  // short resonator: k0^2 above 4 pi^2
  CHECK_THROWS_AS(resonator_constants(g), ConstantsError);
}

TEST_CASE("amplitude problem: unit reflection and phase relation") {
  const WaveguideGeometry g;
  const double k_sq = 14.0;
  const AmplitudeConstant a = amplitude_constant(g, k_sq, 3.0);
  CHECK(std::abs(std::abs(a.r) - 1.0) < 0.01);
  CHECK(a.phase_error_deg < 2.0);
  CHECK(a.A_abs == doctest::Approx(std::abs(a.a_bold) / 2.0));
  const AmplitudeConstant b = amplitude_constant(g, k_sq, 6.0);
  CHECK(std::abs(b.A_abs - a.A_abs) < 0.005 * a.A_abs);
}

TEST_CASE("constants JSON round trip") {
  TunnelingConstants c = assemble_constants(fake_resonator(1.5, -1.0), fake_amplitude(0.9), fake_narrow(0.1, 0.4));
  const auto j = to_json(c, WaveguideGeometry{});
  CHECK(j.at("schema") == "rwg-1");
  CHECK(j.at("convention") == "phi0=1/sqrt(pi)");
  const TunnelingConstants d = constants_from_json(nlohmann::json::parse(j.dump()));
  CHECK(d.P == c.P);
  CHECK(d.q == -1);
  CHECK(d.a_bold == c.a_bold);
  CHECK_THROWS_AS(constants_from_json(nlohmann::json::parse("{\"k0_sq\": 1}")), ConstantsError);
}
