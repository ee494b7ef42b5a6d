#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "rwg/constants.hpp"

namespace rwg {

class AsymptoticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AsymptoticPeak {
  double epsilon = 0.0;
  double k_res_sq_a = 0.0;
  double width_half = 0.0;  // full width at half height, k^2 units
  double P = 0.0;
  double omega = 0.0;
  double shift_exponent = 0.0;  // 2 pi / omega
  double width_exponent = 0.0;  // 4 pi / omega
};

/// k0^2 - 2 alpha b1^2 eps^{2 pi/omega}.
double k_res_asymptotic(const TunnelingConstants& c, double omega, double epsilon);
/// Lorentzian [1 + P^2 ((k^2 - k_res^2) / eps^{4 pi/omega})^2]^{-1}.
double t_asymptotic(const TunnelingConstants& c, double omega, double epsilon, double k_sq);
/// Full width of the Lorentzian at height h in (0, 1).
double width_at_height(const TunnelingConstants& c, double omega, double epsilon, double h);
AsymptoticPeak asymptotic_peak(const TunnelingConstants& c, double omega, double epsilon);

/// epsilon,k_res_sq_a,upsilon, then one width_h<h> column per height.
void write_asymptotic_csv(std::ostream& os, const TunnelingConstants& c, double omega,
                          const std::vector<double>& eps_list, const std::vector<double>& heights);

}  // namespace rwg
