#include "rwg/resonance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <boost/math/tools/toms748_solve.hpp>

namespace rwg {

namespace {

std::string dump(const std::vector<double>& x, const std::vector<double>& t) {
  std::ostringstream os;
  os << std::setprecision(12);
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "; " : "") << x[i] << " -> " << t[i];
  return os.str();
}

LorentzFit fit_lorentz(const std::vector<std::pair<double, double>>& samples, double t_max, double k0, double scale) {
  // 1/T is quadratic in k for a Lorentzian; weights T^2 turn the misfit into a relative one in T
  std::vector<std::pair<double, double>> use;
  for (const auto& s : samples)
    if (s.second > 0.05 * t_max) use.push_back(s);
  LorentzFit f;
  if (use.size() < 3) return f;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(use.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(use.size()));
  for (std::size_t i = 0; i < use.size(); ++i) {
    const double u = (use[i].first - k0) / scale, w = use[i].second * use[i].second;
    const auto r = static_cast<Eigen::Index>(i);
    A(r, 0) = w;
    A(r, 1) = w * u;
    A(r, 2) = w * u * u;
    b[r] = w / use[i].second;
  }
  const Eigen::Vector3d c = A.colPivHouseholderQr().solve(b);
  if (!(c[2] > 0.0)) return f;
  const double uc = -c[1] / (2.0 * c[2]);
  const double inv_h = c[0] - c[1] * c[1] / (4.0 * c[2]);
  if (!(inv_h > 0.0)) return f;
  f.center = k0 + uc * scale;
  f.height = 1.0 / inv_h;
  f.scale = scale / std::sqrt(c[2] * f.height);
  double acc = 0.0;
  for (const auto& s : use) {
    const double x = (s.first - f.center) / f.scale;
    const double m = f.height / (1.0 + x * x);
    acc += (m - s.second) * (m - s.second);
  }
  f.residual = std::sqrt(acc / static_cast<double>(use.size())) / t_max;
  return f;
}

void check_window(double l, const std::vector<double>& grid) {
  int M = -1;
  for (double k : grid) {
    const ModeBasis b = mode_basis(l, k);
    if (M >= 0 && b.M != M) {
      std::ostringstream os;
      os << "k^2 grid crosses a threshold near " << k;
      throw ScatteringError(os.str());
    }
    M = b.M;
  }
}

}  // namespace

unsigned thread_count() {
  const char* env = std::getenv("RWG_THREADS");
  if (!env) return 1;
  const long n = std::strtol(env, nullptr, 10);
  return n >= 1 ? static_cast<unsigned>(n) : 1u;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& task) {
  const unsigned w = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

std::vector<SweepRow> sweep_transmission(const Discretization& disc, std::vector<double> k_sq_grid, unsigned threads) {
  std::sort(k_sq_grid.begin(), k_sq_grid.end());
  check_window(disc.l, k_sq_grid);
  std::vector<SweepRow> rows(k_sq_grid.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    SweepRow& r = rows[i];
    r.k_sq = k_sq_grid[i];
    r.R_trunc = disc.R;
    r.h_max = disc.h_max;
    try {
      const ScatteringMatrix S = scattering_matrix(disc, r.k_sq);
      const Coefficients c = transmission(S, 1);
      r.s = S.s;
      r.T = c.T;
      r.R = c.R;
      r.unitarity_defect = S.unitarity_defect;
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  int n = 0;
  for (const auto& r : rows)
    if (r.ok) n = static_cast<int>(r.s.rows());
  const auto old = os.precision();
  os << std::setprecision(17);
  os << "k_sq";
  for (int a = 1; a <= n; ++a)
    for (int b = 1; b <= n; ++b) os << ",re_s" << a << b << ",im_s" << a << b;
  os << ",T,R,unitarity_defect,R_trunc,h_max,status\n";
  for (const auto& r : rows) {
    os << r.k_sq;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (r.ok)
          os << "," << r.s(a, b).real() << "," << r.s(a, b).imag();
        else
          os << ",nan,nan";
      }
    if (r.ok)
      os << "," << r.T << "," << r.R << "," << r.unitarity_defect;
    else
      os << ",nan,nan,nan";
    os << "," << r.R_trunc << "," << r.h_max << "," << (r.ok ? "ok" : "failed") << "\n";
  }
  os.precision(old);
}

NumericalPeak locate_peak(const std::function<double(double)>& T, double lo, double hi, double scale,
                          const PeakOptions& opts) {
  if (!(hi > lo)) throw PeakError("empty peak bracket");
  if (!(scale > 0.0)) throw PeakError("peak scale must be positive");
  if (opts.initial_samples < 3) throw PeakError("need at least 3 initial samples");
  NumericalPeak pk;
  pk.bracket_lo = lo;
  pk.bracket_hi = hi;
  auto eval = [&](double k) {
    const double t = T(k);
    pk.samples.emplace_back(k, t);
    return t;
  };
  const int n = opts.initial_samples;
  std::vector<double> xs(static_cast<std::size_t>(n)), ts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    xs[i] = lo + (hi - lo) * i / (n - 1);
    ts[i] = eval(xs[i]);
  }
  const auto imax = static_cast<int>(std::max_element(ts.begin(), ts.end()) - ts.begin());
  const double tmin = *std::min_element(ts.begin(), ts.end());
  if (!(ts[imax] - tmin > 1e-12 * std::abs(ts[imax]))) throw PeakError("non-unimodal samples (flat): " + dump(xs, ts));
  for (int i = 0; i < n - 1; ++i) {
    const bool rising = i < imax;
    if ((rising && !(ts[i] < ts[i + 1])) || (!rising && !(ts[i] > ts[i + 1])))
      throw PeakError("non-unimodal samples: " + dump(xs, ts));
  }
  if (imax == 0 || imax == n - 1) throw PeakError("bracket missed peak - widen or recheck constants: " + dump(xs, ts));

  // golden section on the three-point bracket around the best sample
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = xs[imax - 1], b = xs[imax + 1];
  double c = b - g * (b - a), d = a + g * (b - a);
  double tc = eval(c), td = eval(d);
  const double ktol = opts.tol * scale;
  while (b - a > ktol) {
    if (tc > td) {
      b = d;
      d = c;
      td = tc;
      c = b - g * (b - a);
      tc = eval(c);
    } else {
      a = c;
      c = d;
      tc = td;
      d = a + g * (b - a);
      td = eval(d);
    }
  }
  double kbest = 0.0, tbest = -1.0;
  for (const auto& [k, t] : pk.samples)
    if (t > tbest) {
      kbest = k;
      tbest = t;
    }
  pk.k_res_sq_n = kbest;
  pk.T_max = tbest;

  for (double h : opts.heights) {
    if (!(h > 0.0 && h < 1.0)) throw PeakError("height outside (0, 1)");
    const double target = h * pk.T_max;
    auto f = [&](double k) { return eval(k) - target; };
    // nearest presample on each side below the target
    double left = lo, right = hi;
    bool has_left = false, has_right = false;
    for (int i = imax; i >= 0; --i)
      if (ts[i] < target && xs[i] < kbest) {
        left = xs[i];
        has_left = true;
        break;
      }
    for (int i = imax; i < n; ++i)
      if (ts[i] < target && xs[i] > kbest) {
        right = xs[i];
        has_right = true;
        break;
      }
    if (!has_left || !has_right) {
      std::ostringstream os;
      os << "bracket too narrow to reach height " << h << ": " << dump(xs, ts);
      throw PeakError(os.str());
    }
    const double wtol = 1e-7 * scale;
    auto stop = [wtol](double x, double y) { return std::abs(y - x) < wtol; };
    std::uintmax_t it = 60;
    const auto rl = boost::math::tools::toms748_solve(f, left, kbest, f(left), pk.T_max - target, stop, it);
    it = 60;
    const auto rr = boost::math::tools::toms748_solve(f, kbest, right, pk.T_max - target, f(right), stop, it);
    pk.widths[h] = 0.5 * (rr.first + rr.second) - 0.5 * (rl.first + rl.second);
  }
  pk.evaluations = pk.samples.size();
  pk.lorentz = fit_lorentz(pk.samples, pk.T_max, pk.k_res_sq_n, scale);
  return pk;
}

PoleEstimate transmission_pole(const Discretization& disc, double k_guess, double step, int max_iter) {
  auto inv_s12 = [&](double k) {
    const ScatteringMatrix S = scattering_matrix(disc, k);
    if (S.M != 1) throw PeakError("pole search needs exactly one open channel");
    return 1.0 / S.s(0, 1);
  };
  double k0 = k_guess, k1 = k_guess + step;
  cplx f0 = inv_s12(k0), f1 = inv_s12(k1);
  PoleEstimate pe;
  for (int it = 1; it <= max_iter; ++it) {
    pe.iterations = it;
    if (f1 == f0) throw PeakError("pole search stalled: 1/s12 does not vary");
    pe.pole = k1 - f1 * (k1 - k0) / (f1 - f0);
    const double next = pe.pole.real();
    if (std::abs(next - k1) < 1e-3 * std::abs(pe.pole.imag()) || std::abs(next - k1) < 1e-13 * std::abs(k1)) break;
    k0 = k1;
    f0 = f1;
    k1 = next;
    f1 = inv_s12(k1);
  }
  return pe;
}

NumericalPeak waveguide_peak(const Discretization& disc, const AsymptoticPeak& guess, const PeakOptions& opts) {
  const PoleEstimate pe = transmission_pole(disc, guess.k_res_sq_a, guess.width_half);
  double w = 2.0 * std::abs(pe.pole.imag());
  if (!(w > 0.0) || !std::isfinite(w)) w = guess.width_half;
  const double c = pe.pole.real();
  std::map<double, double> defect;
  auto T = [&](double k) {
    const ScatteringMatrix S = scattering_matrix(disc, k);
    defect[k] = S.unitarity_defect;
    return transmission(S, 1).T;
  };
  NumericalPeak pk = locate_peak(T, c - 0.5 * opts.bracket_widths * w, c + 0.5 * opts.bracket_widths * w, w, opts);
  pk.epsilon = disc.epsilon;
  pk.unitarity_defect = defect[pk.k_res_sq_n];
  pk.h_max = disc.h_max;
  pk.R_trunc = disc.R;
  pk.n_dofs = disc.forms->n_free();
  pk.pole = pe.pole;
  return pk;
}

bool ill_conditioned(const AsymptoticPeak& a, double guard) { return !(a.width_half / a.k_res_sq_a >= guard); }

SlopeFit log_log_fit(const std::vector<double>& x, const std::vector<double>& y) {
  SlopeFit f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  f.points = n;
  if (n < 2) return f;
  const double dn = static_cast<double>(n);
  f.slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / dn;
  return f;
}

ComparisonReport compare(const WaveguideGeometry& base, const TunnelingConstants& consts,
                         const std::vector<double>& eps_list, const CompareOptions& opts) {
  ComparisonReport rep;
  rep.constants = consts;
  rep.rows.resize(eps_list.size());
  const double p = base.exponent();
  rep.expected_shift_exponent = 2.0 * p;
  rep.expected_width_exponent = 4.0 * p;
  const double R = opts.r_trunc > 0.0 ? opts.r_trunc : default_truncation(mode_basis(base.l, consts.k0_sq));
  parallel_for(eps_list.size(), opts.threads, [&](std::size_t i) {
    CompareRow& row = rep.rows[i];
    row.epsilon = eps_list[i];
    try {
      row.asym = asymptotic_peak(consts, base.omega, row.epsilon);
      for (double h : opts.peak.heights) row.width_a[h] = width_at_height(consts, base.omega, row.epsilon, h);
      row.tractable = !ill_conditioned(row.asym, opts.guard);
      if (!row.tractable) {
        std::ostringstream os;
        os << "ill-conditioned: relative width " << row.asym.width_half / row.asym.k_res_sq_a << " below guard "
           << opts.guard;
        row.flag = os.str();
        return;
      }
      WaveguideGeometry g = base;
      g.epsilon = row.epsilon;
      const Discretization disc = discretize_waveguide(g, R, opts.fem);
      row.num = waveguide_peak(disc, row.asym, opts.peak);
      row.rel_diff = std::abs(row.asym.k_res_sq_a - row.num.k_res_sq_n) / row.asym.k_res_sq_a;
      for (const auto& [h, wn] : row.num.widths) row.ratio[h] = wn / row.width_a.at(h);
      row.ok = true;
    } catch (const std::exception& e) {
      row.flag = std::string("failed: ") + e.what();
    }
  });
  std::vector<double> es, shift, es_w, width;
  for (const auto& row : rep.rows) {
    if (!row.ok) continue;
    es.push_back(row.epsilon);
    shift.push_back(consts.k0_sq - row.num.k_res_sq_n);
    const auto it = row.num.widths.find(0.5);
    if (it != row.num.widths.end()) {
      es_w.push_back(row.epsilon);
      width.push_back(it->second);
    }
  }
  rep.shift_fit = log_log_fit(es, shift);
  rep.width_fit = log_log_fit(es_w, width);
  return rep;
}

void write_compare_csv(std::ostream& os, const ComparisonReport& r, const std::vector<double>& heights) {
  const auto old = os.precision();
  os << std::setprecision(17);
  os << "epsilon,status,k_res_sq_a,k_res_sq_n,rel_diff,T_max,unitarity_defect";
  for (double h : heights) os << ",width_a_h" << h << ",width_n_h" << h << ",ratio_h" << h;
  os << "\n";
  for (const auto& row : r.rows) {
    os << row.epsilon << "," << (row.ok ? "ok" : (row.tractable ? "failed" : "ill_conditioned")) << ","
       << row.asym.k_res_sq_a;
    if (row.ok)
      os << "," << row.num.k_res_sq_n << "," << row.rel_diff << "," << row.num.T_max << "," << row.num.unitarity_defect;
    else
      os << ",nan,nan,nan,nan";
    for (double h : heights) {
      const auto wa = row.width_a.find(h);
      os << "," << (wa != row.width_a.end() ? wa->second : std::nan(""));
      const auto wn = row.num.widths.find(h);
      const auto ra = row.ratio.find(h);
      if (row.ok && wn != row.num.widths.end())
        os << "," << wn->second << "," << ra->second;
      else
        os << ",nan,nan";
    }
    os << "\n";
  }
  os.precision(old);
}

nlohmann::ordered_json to_json(const NumericalPeak& p) {
  nlohmann::ordered_json j;
  j["epsilon"] = p.epsilon;
  j["k_res_sq_n"] = p.k_res_sq_n;
  j["T_max"] = p.T_max;
  nlohmann::ordered_json w = nlohmann::ordered_json::array();
  for (const auto& [h, v] : p.widths) w.push_back({{"h", h}, {"width", v}});
  j["widths"] = w;
  j["lorentz_fit"] = {{"center", p.lorentz.center},
                      {"scale", p.lorentz.scale},
                      {"height", p.lorentz.height},
                      {"residual", p.lorentz.residual}};
  j["bracket"] = {p.bracket_lo, p.bracket_hi};
  j["pole"] = {p.pole.real(), p.pole.imag()};
  j["unitarity_defect"] = p.unitarity_defect;
  j["evaluations"] = p.evaluations;
  j["h_max"] = p.h_max;
  j["R_trunc"] = p.R_trunc;
  j["n_dofs"] = p.n_dofs;
  return j;
}

nlohmann::ordered_json to_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = "rwg-1";
  j["constants"] = {{"k0_sq", r.constants.k0_sq}, {"b1", r.constants.b1}, {"A_abs", r.constants.A_abs},
                    {"alpha", r.constants.alpha}, {"beta", r.constants.beta}, {"P", r.constants.P}};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json x;
    x["epsilon"] = row.epsilon;
    x["status"] = row.ok ? "ok" : (row.tractable ? "failed" : "ill_conditioned");
    if (!row.flag.empty()) x["flag"] = row.flag;
    x["k_res_sq_a"] = row.asym.k_res_sq_a;
    x["upsilon"] = row.asym.width_half;
    if (row.ok) {
      x["k_res_sq_n"] = row.num.k_res_sq_n;
      x["rel_diff"] = row.rel_diff;
      nlohmann::ordered_json ws = nlohmann::ordered_json::array();
      for (const auto& [h, wa] : row.width_a) {
        const auto wn = row.num.widths.find(h);
        if (wn == row.num.widths.end()) continue;
        ws.push_back({{"h", h}, {"width_a", wa}, {"width_n", wn->second}, {"ratio", row.ratio.at(h)}});
      }
      x["widths"] = ws;
      x["peak"] = to_json(row.num);
    }
    rows.push_back(x);
  }
  j["rows"] = rows;
  j["shift_fit"] = {{"slope", r.shift_fit.slope}, {"expected", r.expected_shift_exponent}, {"points", r.shift_fit.points}};
  j["width_fit"] = {{"slope", r.width_fit.slope}, {"expected", r.expected_width_exponent}, {"points", r.width_fit.points}};
  return j;
}

}  // namespace rwg
