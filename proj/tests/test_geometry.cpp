#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rwg/geometry.hpp"

using namespace rwg;

namespace {
constexpr double kPi = std::numbers::pi;

// Area of the truncated waveguide: strip minus the two narrow cut-outs,
// each cut-out being the strip part outside the double cone plus disk.
double exact_waveguide_area(const WaveguideGeometry& g, double R) {
  const double xa = g.wall_offset();
  const double rho = g.narrow_radius();
  const double cut = xa * g.l - rho * rho * (kPi - g.omega);
  return g.l * (g.d + 2.0 * R) - 2.0 * cut;
}
}  // namespace

TEST_CASE("exponent and wall offset") {
  WaveguideGeometry g;
  CHECK(g.exponent() == doctest::Approx(2.0));
  CHECK(g.wall_offset() == doctest::Approx(0.5));
  g.omega = kPi / 3.0;
  CHECK(g.exponent() == doctest::Approx(3.0));
  CHECK(g.wall_offset() == doctest::Approx(0.5 / std::tan(kPi / 6.0)));
}

TEST_CASE("validation names the violated invariant") {
  WaveguideGeometry g;
  CHECK_NOTHROW(g.validate());
  g.epsilon = 0.6;  // eps*r0 = 0.3 >= l/4
  CHECK_THROWS_AS(g.validate(), GeometryError);
  g = WaveguideGeometry{};
  g.d = 0.9;  // cones meet below the walls
  CHECK_THROWS_AS(g.validate(), GeometryError);
  g = WaveguideGeometry{};
  g.omega = 0.0;
  CHECK_THROWS_AS(g.validate(), GeometryError);
  CHECK_THROWS_AS(build_waveguide(WaveguideGeometry{}, 0.4), GeometryError);
}

TEST_CASE("waveguide polygon: simple, ccw, area close to the curved domain") {
  for (double eps : {0.05, 0.3}) {
    WaveguideGeometry g;
    g.epsilon = eps;
    const double R = 3.0;
    const auto b = build_waveguide(g, R, uniform_chord(0.002));
    CHECK_NOTHROW(b.check());
    CHECK(b.signed_area() > 0.0);
    const double exact = exact_waveguide_area(g, R);
    // inscribed arcs lose O(chord^2) area
    CHECK(std::abs(b.signed_area() - exact) < 1e-5);
    CHECK(b.signed_area() <= exact + 1e-12);
  }
}

TEST_CASE("waveguide tags: ends only at x=-R and x=d+R") {
  WaveguideGeometry g;
  const double R = 2.5;
  const auto b = build_waveguide(g, R);
  int n1 = 0, n2 = 0;
  for (const auto& s : b.segments) {
    const Point p = b.vertices[s.a], q = b.vertices[s.b];
    if (s.tag == BoundaryTag::GAMMA_1) {
      ++n1;
      CHECK(p.x == -R);
      CHECK(q.x == -R);
    } else if (s.tag == BoundaryTag::GAMMA_2) {
      ++n2;
      CHECK(p.x == g.d + R);
      CHECK(q.x == g.d + R);
    } else {
      CHECK(s.tag == BoundaryTag::DIRICHLET);
    }
  }
  CHECK(n1 >= 1);
  CHECK(n2 >= 1);
}

TEST_CASE("cut widths: full strip away from narrows, 2 eps r0 at the vertices") {
  WaveguideGeometry g;
  g.epsilon = 0.2;
  const auto b = build_waveguide(g, 3.0, uniform_chord(0.001));
  CHECK(cut_width(b, -2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cut_width(b, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cut_width(b, 0.0) == doctest::Approx(2.0 * g.narrow_radius()).epsilon(1e-12));
  CHECK(cut_width(b, g.d) == doctest::Approx(2.0 * g.narrow_radius()).epsilon(1e-12));
  // on a cone side |y| = |x| tan(omega/2)
  CHECK(cut_width(b, 0.3) == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("half waveguide ends at the symmetry axis") {
  WaveguideGeometry g;
  const auto h = build_waveguide_half(g, 2.0);
  CHECK_NOTHROW(h.check());
  int ni = 0;
  for (const auto& s : h.segments) {
    if (s.tag == BoundaryTag::INTERFACE) {
      ++ni;
      CHECK(h.vertices[s.a].x == 0.5 * g.d);
      CHECK(h.vertices[s.b].x == 0.5 * g.d);
    }
  }
  CHECK(ni >= 1);
  const auto full = build_waveguide(g, 2.0);
  CHECK(2.0 * h.signed_area() == doctest::Approx(full.signed_area()).epsilon(1e-12));
}

TEST_CASE("resonator and half-strip areas") {
  WaveguideGeometry g;
  const auto r = build_resonator(g);
  CHECK_NOTHROW(r.check());
  const double xa = g.wall_offset();
  // rectangle d x l minus the four corner triangles xa x l/2
  CHECK(r.signed_area() == doctest::Approx(g.d * g.l - xa * g.l).epsilon(1e-12));
  const auto hs = build_halfstrip(g, 4.0);
  CHECK_NOTHROW(hs.check());
  CHECK(hs.signed_area() == doctest::Approx(4.0 * g.l - 0.5 * xa * g.l).epsilon(1e-12));
  CHECK(hs.segments.back().tag == BoundaryTag::GAMMA_1);
}

TEST_CASE("narrow-shape domain area") {
  const double r0 = 0.5, R = 3.0, om = kPi / 2.0;
  const auto b = build_omega(r0, om, R, uniform_chord(0.002));
  CHECK_NOTHROW(b.check());
  // two sectors of radius R plus the disk outside them
  const double exact = om * R * R + (kPi - om) * r0 * r0;
  CHECK(std::abs(b.signed_area() - exact) < 1e-5);
  const auto s = build_omega(r0, om, R, uniform_chord(0.002), true);
  CHECK_NOTHROW(s.check());
  CHECK(std::abs(s.signed_area() - 0.5 * om * R * R) < 1e-5);
  CHECK_THROWS_AS(build_omega(r0, om, 0.9), GeometryError);
}

TEST_CASE("tag names round trip") {
  for (auto t : {BoundaryTag::DIRICHLET, BoundaryTag::GAMMA_1, BoundaryTag::GAMMA_2, BoundaryTag::INTERFACE})
    CHECK(tag_from_string(to_string(t)) == t);
  CHECK_THROWS(tag_from_string("GAMMA_3"));
}
