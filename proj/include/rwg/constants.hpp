#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwg/fem.hpp"

namespace rwg {

class ConstantsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Angular profile of the corner terms, cos(p theta)/sqrt(pi) with theta
/// measured from the sector bisector.
double corner_profile(double exponent, double theta);

struct ConstantsNumerics {
  double h_resonator = 0.03;
  double h_halfstrip = 0.04;
  double h_omega = 0.15;        // narrow-scale units
  double grading = 0.5;
  int order = 2;
  /// Window of radii around a cone vertex (waveguide units) for b1, b2, a.
  double r_min = 0.08;
  double r_max = 0.35;
  /// Truncation of the half-strip problem; <= 0 selects default_truncation.
  double r_trunc = 0.0;
  std::vector<double> R_list{4.0, 6.0, 8.0};
  /// Repeat every problem with h halved and record the relative changes.
  bool refine_check = false;
};

struct ResonatorConstants {
  double k0_sq = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double q_raw = 0.0;
  int q = 0;
  double gap_below = 0.0;  // k0^2 minus the lower threshold
  double gap_next = 0.0;   // second eigenvalue minus k0^2
  double fit_residual = 0.0;
  std::size_t n_dofs = 0;
};

ResonatorConstants resonator_constants(const WaveguideGeometry& geom, const ConstantsNumerics& num = {});

struct AmplitudeConstant {
  double k_sq = 0.0;
  double R_trunc = 0.0;
  cplx a_bold = 0.0;
  double A_abs = 0.0;
  cplx r = 0.0;              // far-field reflection coefficient
  double phase_error_deg = 0.0;  // |arg r - 2 arg a|, wrapped
  double fit_residual = 0.0;
  std::size_t n_dofs = 0;
};

/// Throws ConstantsError when |r| deviates from 1 by more than 2%.
AmplitudeConstant amplitude_constant(const WaveguideGeometry& geom, double k_sq, double r_trunc,
                                     const ConstantsNumerics& num = {});

struct NarrowConstants {
  std::vector<double> R;
  std::vector<double> alpha_R;
  std::vector<double> beta_R;
  std::vector<double> lead_R;  // fitted coefficient of rho^p on the right, 1 in exact arithmetic
  std::vector<double> alpha_delta;  // |alpha(R_{i+1}) - alpha(R_i)|
  std::vector<double> beta_delta;
  double alpha = 0.0;  // extrapolated in R^{-3p}
  double beta = 0.0;
  double max_fit_residual = 0.0;
};

/// Laplace problem in the narrow-scale domain truncated at each R. With
/// single_sector, only the right sector is meshed and beta is not computed.
NarrowConstants narrow_constants(double r0, double omega, const std::vector<double>& R_list,
                                 const ConstantsNumerics& num = {}, bool single_sector = false);

struct TunnelingConstants {
  double k0_sq = 0.0;
  double b1 = 0.0;
  int q = 0;
  double A_abs = 0.0;
  cplx a_bold = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double P = 0.0;
  ResonatorConstants resonator;
  AmplitudeConstant amplitude;
  NarrowConstants narrow;
  /// Relative changes under one halving of h (empty unless refine_check).
  std::vector<std::pair<std::string, double>> refine_deltas;
};

/// Derives P and enforces the invariants; aggregates every violation into
/// one ConstantsError.
TunnelingConstants assemble_constants(const ResonatorConstants& res, const AmplitudeConstant& amp,
                                      const NarrowConstants& narrow);

/// Runs the three limit problems (concurrently when threads > 1).
TunnelingConstants compute_constants(const WaveguideGeometry& geom, const ConstantsNumerics& num = {},
                                     unsigned threads = 1);

double tunneling_P(double b1, double beta, double A_abs);

nlohmann::ordered_json to_json(const TunnelingConstants& c, const WaveguideGeometry& geom);
/// Reads the scalar constants back (diagnostics are not restored).
TunnelingConstants constants_from_json(const nlohmann::json& j);

}  // namespace rwg
