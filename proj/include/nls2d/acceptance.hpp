#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "nls2d/bessel.hpp"
#include "nls2d/experiments.hpp"
#include "nls2d/hankel.hpp"
#include "nls2d/resolvent.hpp"
#include "nls2d/smoothing.hpp"

namespace nls2d {

/// One measured quantity against its pinned bound.
struct Measurement {
  std::string name;
  double value = NAN;
  std::string relation;  // "<", "<=", ">", ">=", "in", "=="
  double bound = NAN, bound_hi = NAN;
  bool pass = false;
};

inline Measurement less_than(std::string name, double v, double b) { return {std::move(name), v, "<", b, NAN, v < b}; }
inline Measurement at_most(std::string name, double v, double b) { return {std::move(name), v, "<=", b, NAN, v <= b}; }
inline Measurement greater_than(std::string name, double v, double b) {
  return {std::move(name), v, ">", b, NAN, v > b};
}
inline Measurement at_least(std::string name, double v, double b) { return {std::move(name), v, ">=", b, NAN, v >= b}; }
inline Measurement within(std::string name, double v, double lo, double hi) {
  return {std::move(name), v, "in", lo, hi, v >= lo && v <= hi};
}
inline Measurement equals(std::string name, double v, double b) { return {std::move(name), v, "==", b, NAN, v == b}; }

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<Measurement> measures;
  std::string note;
  std::string error;  // set when the evaluation itself threw
  double seconds = 0;

  bool pass() const {
    if (!error.empty() || measures.empty()) return false;
    for (const auto& m : measures)
      if (!m.pass) return false;
    return true;
  }
};

inline std::string describe(const Measurement& m) {
  std::string s = m.name + " = " + format_double(m.value) + " (" + (m.pass ? "ok" : "FAIL") + ", need ";
  if (m.relation == "in") s += "in [" + format_double(m.bound) + ", " + format_double(m.bound_hi) + "]";
  else s += m.relation + " " + format_double(m.bound);
  return s + ")";
}

/// Shared expensive runs, computed on first use.
class AcceptanceContext {
 public:
  ExperimentConfig default_config() const { return ExperimentConfig{}; }

  const StabilityVerdict& default_run() {
    std::lock_guard lock(mu_);
    if (!default_) default_ = std::make_unique<StabilityVerdict>(run_stability(default_config()));
    return *default_;
  }

 private:
  std::mutex mu_;
  std::unique_ptr<StabilityVerdict> default_;
};

inline const std::vector<std::string>& criterion_titles() {
  static const std::vector<std::string> t{
      "",
      "conservation on the default run",
      "bifurcation scaling and seed amplitude",
      "soliton relative equilibrium",
      "modulation consistency",
      "stability signature",
      "local smoothing constants",
      "free smoothing scale invariance",
      "dispersive decay exponent",
      "free resolvent correctness",
      "low-energy expansion",
      "non-resonance certification",
      "high-energy bound",
      "Bessel kernel quality",
  };
  return t;
}

namespace criteria {

inline void c1(AcceptanceContext& ctx, CriterionResult& r) {
  const auto& v = ctx.default_run();
  r.measures.push_back(less_than("relative mass drift", v.drift_n, 1e-6));
  r.measures.push_back(less_than("relative energy drift", v.drift_h, 1e-5));
  r.measures.push_back(equals("decomposition lost", v.left_tube ? 1.0 : 0.0, 0.0));
  r.measures.push_back(less_than("evolution wall seconds", v.wall_seconds, 600.0));
}

inline void c2(AcceptanceContext&, CriterionResult& r) {
  Grid2D g(128, 30.0);
  Potential V = gaussian_well(g, 5.0);
  SpectralData sd = ground_state(V);
  const Nonlinearity nl{1.0, 3.0};
  BranchOptions bo;
  bo.derivatives = false;
  Branch br = branch_continuation(V, sd, sd.e_star + 0.005, sd.e_star + 0.08, 16, nl, bo);
  r.measures.push_back(equals("branch profiles missing", double(16 - br.profiles.size()), 0.0));
  std::vector<double> d, amp;
  for (const auto& b : br.profiles) {
    d.push_back(b.e - sd.e_star);
    amp.push_back(b.phi.max_abs());
  }
  r.measures.push_back(within("log-log slope of ||phi_E||_inf", d.size() >= 2 ? loglog_slope(d, amp) : NAN, 0.475, 0.525));
  // d a = alpha a^p ||phi*||_{p+1}^{p+1}
  double lp = 0;
  for (const auto& z : sd.phi_star.values()) lp += std::pow(std::abs(z.real()), nl.p + 1);
  lp *= g.cell_area();
  double worst = 0;
  for (double dd : d) {
    double a = seed_amplitude(sd.e_star + dd, sd, nl);
    worst = std::max(worst, std::abs(dd * a - nl.alpha * std::pow(a, nl.p) * lp));
  }
  r.measures.push_back(less_than("seed amplitude equation residual", worst, 1e-10));
}

inline void c3(AcceptanceContext& ctx, CriterionResult& r) {
  ExperimentConfig cfg = ctx.default_config();
  Grid2D g = cfg.grid();
  Potential V = cfg.make_potential(g);
  SpectralData sd = ground_state(V);
  const Nonlinearity nl = cfg.nonlinearity();
  const double e = sd.e_star + cfg.e_offset;
  auto b = solve_profile(V, e, bifurcation_seed(e, sd, nl), nl);
  EvolutionConfig ec;
  ec.dt = 0.001;
  ec.t_final = 10.0;
  ec.record_every = 0.5;
  double worst = 0;
  nls_evolve(
      b.phi, V, nl, ec,
      [&](double, const ComplexField& u) {
        for (std::size_t i = 0; i < u.size(); ++i) worst = std::max(worst, std::abs(std::abs(u[i]) - b.phi[i].real()));
      },
      false);
  r.measures.push_back(less_than("max_t || |u(t)| - phi_E ||_inf", worst, 1e-6));
  r.note = "dt = 0.001, T = 10";
}

inline void c4(AcceptanceContext& ctx, CriterionResult& r) {
  ExperimentConfig cfg = ctx.default_config();
  cfg.eps0 = 0.005;
  cfg.dt = 0.001;
  cfg.t_final = 10.0;
  cfg.record_every = 0.05;
  cfg.snapshot_every = 0.05;
  auto mc = modulation_consistency(cfg);
  r.measures.push_back(at_least("points with ||v||_H1 < 1e-2", mc.points, 10));
  r.measures.push_back(less_than("relative L2 error of dE/dt", mc.e_dot_rel_l2, 0.05));
  r.measures.push_back(less_than("relative L2 error of dtheta/dt - E", mc.rate_rel_l2, 0.05));
  r.note = "eps0 = 0.005, dt = 0.001 and 0.0005 extrapolated, T = 10, records every 0.05";
}

inline void c5(AcceptanceContext& ctx, CriterionResult& r) {
  const auto& v = ctx.default_run();
  r.measures.push_back(equals("decomposition lost", v.left_tube ? 1.0 : 0.0, 0.0));
  r.measures.push_back(less_than("total variation of E over the final quarter", v.e_convergence, 1e-3));
  r.measures.push_back(less_than("E+", v.e_plus, 0.0));
  r.measures.push_back(less_than("M2 growth from T/2 to T", v.m2_growth, 0.05));
  double worst = NAN;
  const auto& c = v.scattering_cauchy;
  if (c.size() >= 3) {
    std::size_t k = c.size();
    worst = std::max(c[k - 1].l_norm / c[k - 2].l_norm, c[k - 2].l_norm / c[k - 3].l_norm);
  }
  r.measures.push_back(less_than("max ratio of consecutive Cauchy differences (last three pairs)", worst, 1.0));
  ExperimentConfig base = ctx.default_config();
  std::vector<SweepPoint> pts;
  for (double sc : base.sweep_scales) {
    if (sc == 1.0) {
      pts.push_back(sweep_point(sc, base, v));
      continue;
    }
    ExperimentConfig cs = scaled_config(base, sc);
    cs.cauchy = false;
    pts.push_back(sweep_point(sc, cs, run_stability(cs)));
  }
  SweepFit fit = fit_sweep(pts);
  r.measures.push_back(at_most("sweep: worst factor from the origin fit of |E+ - E*| vs ||u0||_H1", fit.worst_factor, 2.0));
  r.note = "sweep scales the whole datum (E0 - E* by s^2, eps0 by s); fit against ||u0 - soliton||_H1 gives factor " +
           format_double(fit.worst_factor_perturbation);
}

inline void c6(AcceptanceContext&, CriterionResult& r) {
  auto t0 = std::chrono::steady_clock::now();
  Grid2D g(288, 80.0);
  Potential V = gaussian_well(g, 5.0);
  SpectralData sd = ground_state(V);
  auto rep = smoothing_report(V, sd, probe_set(g), 100.0, 1.5, 0.25);
  for (const auto& e : rep.entries) r.measures.push_back(less_than("growth 50 -> 100, " + e.name, e.growth, 0.05));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.measures.push_back(less_than("wall seconds", secs, 900.0));
  int flagged = 0;
  for (const auto& e : rep.entries) flagged += e.recurrence_flag;
  r.note = std::to_string(flagged) + " of 6 probes have T beyond the estimated box recurrence time";
}

inline void c7(AcceptanceContext&, CriterionResult& r) {
  Grid2D g(768, 240.0);
  auto fn = [](double x, double y) { return cplx(std::exp(-(x * x + y * y) / 2), 0); };
  std::vector<std::pair<double, double>> pts;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b) pts.push_back({2.0 * a, 2.0 * b});
  std::vector<double> sups;
  for (double lam : {0.5, 1.0, 2.0}) sups.push_back(free_sup_x_l2t(dilate(g, fn, lam), pts, 200.0).sup);
  auto [mn, mx] = std::minmax_element(sups.begin(), sups.end());
  r.measures.push_back(less_than("max/min - 1 over lambda in {1/2, 1, 2}", *mx / *mn - 1.0, 0.1));
  r.note = "sup constants " + format_double(sups[0]) + ", " + format_double(sups[1]) + ", " + format_double(sups[2]) +
           " (T = 200, box 240)";
}

inline void c8(AcceptanceContext&, CriterionResult& r) {
  Grid2D g(1024, 512.0);
  Potential V = gaussian_well(g, 5.0);
  SpectralData sd = ground_state(V);
  auto f = ComplexField::from_function(g, [](double x, double y) { return cplx(std::exp(-(x * x + y * y) / 4), 0); });
  std::vector<double> ts;
  for (int i = 0; i <= 32; ++i) ts.push_back(std::pow(40.0, i / 32.0));
  auto pr = dispersive_decay_probe(f, V, sd, ts, 1.0, 40.0);
  r.measures.push_back(within("fitted L4 decay exponent on [1, 40]", pr.exponent, -0.62, -0.42));
  r.measures.push_back(equals("samples dropped by the recurrence guard", double(ts.size() - pr.t.size()), 0.0));
}

inline void c9(AcceptanceContext&, CriterionResult& r) {
  Grid2D g(128, 30.0);
  auto f = ComplexField::from_function(
      g, [](double x, double y) { return std::exp(-((x - 1) * (x - 1) + y * y)) * std::polar(1.0, 0.5 * y); });
  for (double k : {0.5, 2.0, 5.0}) {
    FreeResolvent R0(g, k);
    r.measures.push_back(
        less_than("interior inverse error, k = " + format_double(k), resolvent_inverse_check(R0, f, 1).interior_error, 1e-4));
  }
  auto s = sample_log_grid([](double y) { return std::exp(-y); }, 1e-6, 60.0, 2000);
  auto x = log_grid(0.1, 20.0, 50);
  auto h = hankel_rooney_ops(s, x);
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(h.t1[i] - 1 / std::sqrt(1 + x[i] * x[i])));
  r.measures.push_back(less_than("max |T1 e^{-y} - (1 + x^2)^{-1/2}|", worst, 1e-6));
  auto gauss = ComplexField::from_function(
      g, [](double a, double b) { return cplx(std::exp(-(a * a + b * b) / 2) / std::sqrt(std::numbers::pi), 0); });
  std::vector<std::pair<double, double>> pts;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b) pts.push_back({2.0 * a, 2.0 * b});
  auto kr = k_integral_sup(gauss, pts, 0.05, 10.0, 32);
  r.measures.push_back(less_than("relative change of the k-integral sup under doubling", kr.relative_change, 0.1));
}

inline void c10(AcceptanceContext&, CriterionResult& r) {
  Grid2D g(128, 30.0);
  auto probes = probe_set(g);
  for (int side : {1, -1}) {
    auto a = low_energy_expansion(1e-2, g, probes, side);
    auto b = low_energy_expansion(1e-3, g, probes, side);
    if (side == 1) r.measures.push_back(equals("|c_- - conj(c_+)|", std::abs(b.c_minus - std::conj(b.c_plus)), 0.0));
    r.measures.push_back(at_least(std::string("remainder ratio 1e-2 / 1e-3, side ") + (side > 0 ? "+" : "-"),
                                  a.remainder / b.remainder, 1.5));
  }
}

inline void c11(AcceptanceContext&, CriterionResult& r) {
  auto a = check_non_resonance(gaussian_well(Grid2D(96, 30.0), 5.0));
  auto b = check_non_resonance(gaussian_well(Grid2D(128, 30.0), 5.0));
  r.measures.push_back(greater_than("sigma_min(D0), n = 128", b.sigma_min, 1e-3));
  r.measures.push_back(greater_than("sigma_min(D0), n = 96", a.sigma_min, 1e-3));
  r.measures.push_back(less_than("relative change 96 -> 128", std::abs(a.sigma_min - b.sigma_min) / b.sigma_min, 0.1));
}

inline void c12(AcceptanceContext&, CriterionResult& r) {
  Grid2D g(128, 30.0);
  Potential V = gaussian_well(g, 5.0);
  SpectralData sd = ground_state(V);
  std::vector<double> lams;
  for (int i = 0; i < 12; ++i) lams.push_back(std::pow(50.0, i / 11.0));
  auto rep = high_energy_profile(V, sd, probe_set(g), lams);
  r.measures.push_back(less_than("max/min of <lambda>^{1/2} sup-probe ratio on [1, 50]", rep.max_over_min, 5.0));
}

inline void c13(AcceptanceContext&, CriterionResult& r) {
  double worst = 0;
  for (int i = 0; i <= 4000; ++i) {
    double z = 0.1 * std::pow(500.0, i / 4000.0);
    worst = std::max(worst, std::abs(wronskian0(z) * std::numbers::pi * z / 2 - 1.0));
  }
  r.measures.push_back(less_than("max relative Wronskian error on [0.1, 50]", worst, 1e-8));
  double a = 2.0, b = 3.0;
  for (int i = 0; i < 100; ++i) {
    double m = 0.5 * (a + b);
    (bessel_j0(a) * bessel_j0(m) <= 0 ? b : a) = m;
  }
  r.measures.push_back(less_than("|first J0 zero - 2.404826|", std::abs(0.5 * (a + b) - 2.404826), 1e-6));
}

}  // namespace criteria

inline CriterionResult evaluate_criterion(int id, AcceptanceContext& ctx) {
  using Fn = void (*)(AcceptanceContext&, CriterionResult&);
  static const Fn table[] = {nullptr,       criteria::c1,  criteria::c2,  criteria::c3,  criteria::c4,
                             criteria::c5,  criteria::c6,  criteria::c7,  criteria::c8,  criteria::c9,
                             criteria::c10, criteria::c11, criteria::c12, criteria::c13};
  if (id < 1 || id > 13) throw DomainError("criterion id must lie in 1..13");
  CriterionResult r;
  r.id = id;
  r.title = criterion_titles()[id];
  auto t0 = std::chrono::steady_clock::now();
  try {
    table[id](ctx, r);
  } catch (const std::exception& ex) {
    r.error = ex.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace nls2d
