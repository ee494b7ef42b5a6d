#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rwg/fem.hpp"

namespace rwg {

class ScatteringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transverse Dirichlet modes of the strip |y| < l/2 at energy k^2.
struct ModeBasis {
  double l = 1.0;
  double k_sq = 0.0;
  int M = 0;                // number of propagating modes
  std::vector<double> nu;   // nu_m = sqrt(k^2 - lambda_m^2), m = 1..M (index m-1)

  static double threshold(double l, int q);  // lambda_q^2 = (pi q / l)^2
  double lambda(int m) const;
  /// Psi_m(y) = sqrt(2/(l nu_m)) cos(pi m y / l) for odd m, sin for even m.
  double psi(int m, double y) const;
  /// Decay rate of the first closed mode, sqrt(lambda_{M+1}^2 - k^2).
  double delta() const;
};

/// Throws ScatteringError below the first threshold or at a threshold.
ModeBasis mode_basis(double l, double k_sq);

/// Truncation length max(3 l, 6 / delta).
double default_truncation(const ModeBasis& basis);

struct FemNumerics {
  double h_max = 0.05;
  double grading = 0.5;
  double r_ref = 1.0;
  int order = 2;
};

/// Forms of a truncated two-ended strip domain, ends at x = -R (GAMMA_1) and
/// x = d + R (GAMMA_2).
struct Discretization {
  std::shared_ptr<const AssembledForms> forms;
  double l = 1.0;
  double d = 0.0;
  double R = 0.0;
  double epsilon = 0.0;
  double h_max = 0.0;
};

Discretization discretize_waveguide(const WaveguideGeometry& geom, double r_trunc, const FemNumerics& num);
/// Straight strip of the same extent, no narrows.
Discretization discretize_strip(double l, double d, double r_trunc, const FemNumerics& num);

/// v_j^+ and v_j^-, j = 1..2M (index j-1).
struct RadiationSolutions {
  std::vector<FemSolution> plus;
  std::vector<FemSolution> minus;
  double zeta = 0.0;
};

RadiationSolutions radiation_solutions(const Discretization& disc, const ModeBasis& basis, double zeta,
                                       const SolveOptions& opts = {});

struct EFG {
  Eigen::MatrixXcd E;
  Eigen::MatrixXcd F;
  Eigen::VectorXd G;
};

EFG assemble_EFG(const RadiationSolutions& v, const ModeBasis& basis, const Discretization& disc);

struct ScatteringMatrix {
  Eigen::MatrixXcd s;
  int M = 0;
  double k_sq = 0.0;
  double epsilon = 0.0;
  double R_trunc = 0.0;
  double h_max = 0.0;
  double zeta = 0.0;
  bool shortcut = false;
  double unitarity_defect = 0.0;  // max |s^* s - I|
  double symmetry_defect = 0.0;   // max mismatch under x -> d - x
  std::vector<std::string> warnings;
};

struct ScatterOptions {
  /// Robin parameter; 0 selects -nu_1 (requires M = 1 for the shortcut).
  double zeta = 0.0;
  /// Solve s E + F = 0 even when the shortcut applies.
  bool general = false;
  SolveOptions solve;
};

ScatteringMatrix scattering_matrix(const Discretization& disc, double k_sq, const ScatterOptions& opts = {});

/// Convenience: meshes G(eps, R) (R from default_truncation when r_trunc <= 0).
ScatteringMatrix scattering_matrix(const WaveguideGeometry& geom, double k_sq, double r_trunc,
                                   const FemNumerics& num, const ScatterOptions& opts = {});

struct Coefficients {
  double R = 0.0;
  double T = 0.0;
};

/// Reflection and transmission for incident mode m (1-based, from the left).
Coefficients transmission(const ScatteringMatrix& S, int m);

}  // namespace rwg
