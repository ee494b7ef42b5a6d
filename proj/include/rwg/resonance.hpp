#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwg/asymptotic.hpp"
#include "rwg/scattering.hpp"

namespace rwg {

class PeakError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Worker count from RWG_THREADS (default 1, at least 1).
unsigned thread_count();

/// Runs task(i) for i in [0, n) on up to `threads` workers. Results must be
/// written by index, which keeps the merge order fixed.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& task);

struct SweepRow {
  double k_sq = 0.0;
  Eigen::MatrixXcd s;
  double T = 0.0;
  double R = 0.0;
  double unitarity_defect = 0.0;
  double R_trunc = 0.0;
  double h_max = 0.0;
  bool ok = false;
  std::string error;
};

/// One scattering solve per grid point, rows in ascending k^2. Throws
/// ScatteringError before any solve if the grid leaves the one-mode window.
std::vector<SweepRow> sweep_transmission(const Discretization& disc, std::vector<double> k_sq_grid,
                                         unsigned threads = 1);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

struct LorentzFit {
  double center = 0.0;
  double scale = 0.0;  // half width at half maximum
  double height = 0.0;
  double residual = 0.0;  // rms relative misfit on the samples used
};

struct NumericalPeak {
  double epsilon = 0.0;
  double k_res_sq_n = 0.0;
  double T_max = 0.0;
  std::map<double, double> widths;  // h -> full width at h * T_max
  LorentzFit lorentz;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double unitarity_defect = 0.0;  // at the peak
  std::vector<std::pair<double, double>> samples;  // (k^2, T) in evaluation order
  std::size_t evaluations = 0;
  double h_max = 0.0;
  double R_trunc = 0.0;
  std::size_t n_dofs = 0;
  cplx pole = 0.0;  // from the 1/s12 secant iteration (waveguide runs only)
};

struct PeakOptions {
  std::vector<double> heights{0.2, 0.5, 0.7};
  /// Stopping width of the golden-section search, in units of `scale`.
  double tol = 1e-3;
  /// Bracket width in units of `scale`.
  double bracket_widths = 10.0;
  int initial_samples = 9;
};

/// Golden-section maximization of T on [lo, hi] after a unimodality check on
/// a uniform pre-sample; widths at h * T_max on both flanks by bracketed root
/// finding; Lorentzian fit of all samples. `scale` sets the k^2 tolerance.
NumericalPeak locate_peak(const std::function<double(double)>& T, double lo, double hi, double scale,
                          const PeakOptions& opts = {});

struct PoleEstimate {
  cplx pole = 0.0;
  int iterations = 0;
};

/// Secant iteration on 1/s12, which is close to linear in k^2 near an
/// isolated resonance, started from k_guess and k_guess + step.
PoleEstimate transmission_pole(const Discretization& disc, double k_guess, double step, int max_iter = 12);

/// Peak of the discretized waveguide: pole estimate seeded by the asymptotic
/// prediction, then locate_peak on a bracket of bracket_widths * width centered
/// at the pole, width = max(2 |Im pole|, asymptotic width).
NumericalPeak waveguide_peak(const Discretization& disc, const AsymptoticPeak& guess, const PeakOptions& opts = {});

struct CompareRow {
  double epsilon = 0.0;
  bool tractable = false;
  bool ok = false;
  std::string flag;
  AsymptoticPeak asym;
  NumericalPeak num;
  double rel_diff = 0.0;
  std::map<double, double> width_a;
  std::map<double, double> ratio;  // Delta_n / Delta_a per height
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

struct ComparisonReport {
  TunnelingConstants constants;
  std::vector<CompareRow> rows;
  SlopeFit shift_fit;  // log(k0^2 - k_res_n) vs log eps
  SlopeFit width_fit;  // log Delta_n(1/2) vs log eps
  double expected_shift_exponent = 0.0;
  double expected_width_exponent = 0.0;
};

struct CompareOptions {
  FemNumerics fem;
  double r_trunc = 0.0;  // <= 0: default_truncation at k0^2
  PeakOptions peak;
  /// Epsilons whose relative width Upsilon / k_res^2 falls below this are
  /// flagged ill-conditioned and skipped.
  double guard = 1e-9;
  unsigned threads = 1;
};

/// True when the asymptotic peak is too narrow for the solver pipeline.
bool ill_conditioned(const AsymptoticPeak& a, double guard);

SlopeFit log_log_fit(const std::vector<double>& x, const std::vector<double>& y);

ComparisonReport compare(const WaveguideGeometry& base, const TunnelingConstants& consts,
                         const std::vector<double>& eps_list, const CompareOptions& opts = {});

void write_compare_csv(std::ostream& os, const ComparisonReport& r, const std::vector<double>& heights);
nlohmann::ordered_json to_json(const ComparisonReport& r);
nlohmann::ordered_json to_json(const NumericalPeak& p);

}  // namespace rwg
