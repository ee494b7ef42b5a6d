#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "rwg/resonance.hpp"

using namespace rwg;

namespace {

double lorentz(double k) {
  const double x = (k - 20.0) / 1e-4;
  return 1.0 / (1.0 + x * x);
}

}  // namespace

TEST_CASE("synthetic Lorentzian peak") {
  PeakOptions o;
  o.heights = {0.2, 0.5, 0.7};
  const NumericalPeak p = locate_peak(lorentz, 20.0 - 7e-4, 20.0 + 9e-4, 2e-4, o);
  CHECK(std::abs(p.k_res_sq_n - 20.0) <= 1e-7 * 20.0);
  CHECK(p.T_max == doctest::Approx(1.0).epsilon(1e-5));
  // [DERIVED] full width of 1/(1+x^2) at height h is 2 * 1e-4 * sqrt(1/h - 1)
  for (double h : o.heights)
    CHECK(p.widths.at(h) == doctest::Approx(2e-4 * std::sqrt(1.0 / h - 1.0)).epsilon(1e-3));
  CHECK(p.widths.at(0.2) > p.widths.at(0.5));
  CHECK(p.widths.at(0.5) > p.widths.at(0.7));
  CHECK(p.lorentz.center == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(p.lorentz.scale == doctest::Approx(1e-4).epsilon(1e-6));
  CHECK(p.lorentz.residual < 1e-8);
}

TEST_CASE("peak search failures") {
  CHECK_THROWS_WITH_AS(locate_peak([](double) { return 0.5; }, 0.0, 1.0, 0.1), doctest::Contains("non-unimodal"),
                       PeakError);
  CHECK_THROWS_WITH_AS(locate_peak(lorentz, 20.0 + 1e-4, 20.0 + 1e-3, 2e-4), doctest::Contains("bracket missed peak"),
                       PeakError);
  auto twin = [](double k) { return lorentz(k) + lorentz(k - 6e-4); };
  CHECK_THROWS_WITH_AS(locate_peak(twin, 20.0 - 1e-3, 20.0 + 1.6e-3, 2e-4), doctest::Contains("non-unimodal"),
                       PeakError);
  CHECK_THROWS_AS(locate_peak(lorentz, 1.0, 1.0, 0.1), PeakError);
}

TEST_CASE("sweep over an empty strip") {
  FemNumerics num;
  num.h_max = 0.1;
  const Discretization disc = discretize_strip(1.0, 1.0, 3.0, num);
  const auto rows = sweep_transmission(disc, {20.0, 12.0, 30.0});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].k_sq == 12.0);
  CHECK(rows[2].k_sq == 30.0);
  for (const auto& r : rows) {
    CHECK(r.ok);
    CHECK(r.T == doctest::Approx(1.0).epsilon(1e-3));
  }
  CHECK(sweep_transmission(disc, {15.0}).size() == 1);
  CHECK_THROWS_AS(sweep_transmission(disc, {30.0, 45.0}), ScatteringError);

  std::ostringstream os;
  write_sweep_csv(os, rows);
  CHECK(os.str().rfind("k_sq,re_s11,im_s11,re_s12,im_s12,re_s21,im_s21,re_s22,im_s22,T,R,unitarity_defect,R_trunc,h_max,status\n", 0) == 0);
}

TEST_CASE("parallel sweep merges deterministically") {
  FemNumerics num;
  num.h_max = 0.15;
  const Discretization disc = discretize_strip(1.0, 1.0, 3.0, num);
  const std::vector<double> grid{11.0, 13.0, 15.0, 17.0, 19.0};
  const auto a = sweep_transmission(disc, grid, 1);
  const auto b = sweep_transmission(disc, grid, 3);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a[i].k_sq == b[i].k_sq);
    CHECK(a[i].T == b[i].T);
    CHECK((a[i].s - b[i].s).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("parallel_for covers every index once") {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 2, [](std::size_t i) {
                    if (i == 7) throw PeakError("x");
                  }),
                  PeakError);
}

TEST_CASE("log-log fit") {
  const SlopeFit f = log_log_fit({1.0, 2.0, 4.0}, {3.0, 12.0, 48.0});
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(log_log_fit({1.0, 2.0}, {-1.0, 4.0}).points == 1);
}

TEST_CASE("tiny epsilons are flagged, not solved") {
  TunnelingConstants c;
  c.k0_sq = 14.0;
  c.b1 = 8.0;
  c.alpha = 0.01;
  c.beta = 0.002;
  c.A_abs = 5.0;
  c.P = tunneling_P(c.b1, c.beta, c.A_abs);
  const AsymptoticPeak a = asymptotic_peak(c, std::numbers::pi / 2.0, 0.05);
  CHECK(ill_conditioned(a, 1e-9));
  CHECK_FALSE(ill_conditioned(asymptotic_peak(c, std::numbers::pi / 2.0, 0.4), 1e-9));
  const ComparisonReport r = compare(WaveguideGeometry{}, c, {0.05, 0.08});
  REQUIRE(r.rows.size() == 2);
  for (const auto& row : r.rows) {
    CHECK_FALSE(row.tractable);
    CHECK_FALSE(row.ok);
    CHECK(row.flag.find("ill-conditioned") != std::string::npos);
  }
  CHECK(r.shift_fit.points == 0);
  std::ostringstream os;
  write_compare_csv(os, r, {0.5});
  CHECK(os.str().find("ill_conditioned") != std::string::npos);
  CHECK(to_json(r).at("rows").size() == 2);
}
