#include "rwg/asymptotic.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace rwg {

namespace {

double exponent_of(double omega) {
  if (!(omega > 0.0 && omega < std::numbers::pi)) throw AsymptoticError("opening angle omega must lie in (0, pi)");
  return std::numbers::pi / omega;
}

void check_eps(double epsilon) {
  if (!(epsilon >= 0.0)) throw AsymptoticError("epsilon must be nonnegative");
}

}  // namespace

double k_res_asymptotic(const TunnelingConstants& c, double omega, double epsilon) {
  check_eps(epsilon);
  const double p = exponent_of(omega);
  return c.k0_sq - 2.0 * c.alpha * c.b1 * c.b1 * std::pow(epsilon, 2.0 * p);
}

double t_asymptotic(const TunnelingConstants& c, double omega, double epsilon, double k_sq) {
  const double p = exponent_of(omega);
  if (!(epsilon > 0.0)) throw AsymptoticError("epsilon must be positive");
  const double x = c.P * (k_sq - k_res_asymptotic(c, omega, epsilon)) / std::pow(epsilon, 4.0 * p);
  return 1.0 / (1.0 + x * x);
}

double width_at_height(const TunnelingConstants& c, double omega, double epsilon, double h) {
  if (!(h > 0.0 && h < 1.0)) {
    std::ostringstream os;
    os << "height " << h << " outside (0, 1)";
    throw AsymptoticError(os.str());
  }
  check_eps(epsilon);
  const double p = exponent_of(omega);
  return 2.0 / c.P * std::pow(epsilon, 4.0 * p) * std::sqrt(1.0 / h - 1.0);
}

AsymptoticPeak asymptotic_peak(const TunnelingConstants& c, double omega, double epsilon) {
  AsymptoticPeak a;
  a.epsilon = epsilon;
  a.k_res_sq_a = k_res_asymptotic(c, omega, epsilon);
  a.width_half = width_at_height(c, omega, epsilon, 0.5);
  a.P = c.P;
  a.omega = omega;
  a.shift_exponent = 2.0 * exponent_of(omega);
  a.width_exponent = 4.0 * exponent_of(omega);
  return a;
}

void write_asymptotic_csv(std::ostream& os, const TunnelingConstants& c, double omega,
                          const std::vector<double>& eps_list, const std::vector<double>& heights) {
  const auto old = os.precision();
  os << std::setprecision(17);
  os << "epsilon,k_res_sq_a,upsilon";
  for (double h : heights) os << ",width_h" << h;
  os << "\n";
  for (double e : eps_list) {
    const AsymptoticPeak a = asymptotic_peak(c, omega, e);
    os << e << "," << a.k_res_sq_a << "," << a.width_half;
    for (double h : heights) os << "," << width_at_height(c, omega, e, h);
    os << "\n";
  }
  os.precision(old);
}

}  // namespace rwg
