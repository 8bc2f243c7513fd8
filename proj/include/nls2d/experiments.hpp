#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "nls2d/config.hpp"
#include "nls2d/evolution.hpp"
#include "nls2d/modulation.hpp"
#include "nls2d/probes.hpp"
#include "nls2d/spectral.hpp"

namespace nls2d {

/// Results of the three structural checks on V: decay (H1), exactly one
/// negative eigenvalue (H2), no zero-energy resonance (H3).
struct HypothesisReport {
  DecayReport decay;
  NegativeCount negatives;
  std::optional<NonResonanceReport> non_resonance;
  bool h1 = false, h2 = false, h3 = false;
  std::string h1_detail, h2_detail, h3_detail;

  bool pass() const { return h1 && h2 && h3; }

  /// Name and reason of the first failing hypothesis.
  std::optional<std::pair<std::string, std::string>> first_failure() const {
    if (!h1) return std::pair{std::string("H1"), h1_detail};
    if (!h2) return std::pair{std::string("H2"), h2_detail};
    if (!h3) return std::pair{std::string("H3"), h3_detail};
    return std::nullopt;
  }
};

inline HypothesisReport certify_hypotheses(const Potential& V, unsigned seed = 12345) {
  HypothesisReport r;
  r.decay = check_decay(V);
  r.h1 = r.decay.pass;
  r.h1_detail = "sup <x>^sigma (|V| + |grad V|) on the outer shells = " + format_double(r.decay.sup_weighted) +
                ", inner " + format_double(r.decay.inner_shell) + ", outer " + format_double(r.decay.outer_shell);
  r.negatives = count_negative_eigenvalues(V, 1e-6, seed, 8);
  r.h2 = r.negatives.count == 1;
  r.h2_detail = "expected exactly one negative eigenvalue, found " + std::to_string(r.negatives.count);
  if (V.is_zero()) {
    r.h3_detail = "potential is zero; D0 has no support";
  } else {
    r.non_resonance = check_non_resonance(V);
    r.h3 = r.non_resonance->pass;
    r.h3_detail = "smallest singular value of D0 = " + format_double(r.non_resonance->sigma_min) + " (threshold " +
                  format_double(r.non_resonance->threshold) + ")";
  }
  return r;
}

/// Throws HypothesisError naming the first failing hypothesis.
inline void require_hypotheses(const HypothesisReport& r) {
  if (auto f = r.first_failure()) throw HypothesisError(f->first, f->second);
}

/// u0 = e^{-i theta0} (phi_{E0} + eps0 eta) with eta normalized in H1.
struct InitialData {
  double e0 = 0.0;
  ComplexField phi;
  ComplexField eta;
  ComplexField u0;
};

/// eta = P_c(bump), then Re eta orthogonal to phi_E and Im eta orthogonal to dphi_E/dE, ||eta||_{H1} = 1.
inline ComplexField perturbation_shape(const ExperimentConfig& cfg, const SpectralData& sd,
                                       const ProfileInterpolant::Eval& pr) {
  const Grid2D& g = pr.phi.grid();
  ComplexField b(g);
  if (cfg.eta_shape == "random_band") {
    b = probe_set(g, unsigned(cfg.seed))[5].f;
  } else {
    const double w2 = cfg.eta_width * cfg.eta_width;
    b = ComplexField::from_function(g, [w2](double x, double y) { return cplx(std::exp(-(x * x + y * y) / w2), 0); });
  }
  ComplexField eta = project(b, SpectralPart::continuous, sd);
  ComplexField re = eta.real_part(), im = eta.imag_part();
  re.axpy(-inner_real(re, pr.phi) / inner_real(pr.phi, pr.phi), pr.phi);
  im.axpy(-inner_real(im, pr.dphi) / inner_real(pr.dphi, pr.dphi), pr.dphi);
  eta = re;
  eta.axpy(cplx(0, 1), im);
  const double nh = h1_norm(eta);
  if (!(nh > 0.0)) throw DomainError("perturbation shape vanishes after projection");
  eta *= 1.0 / nh;
  return eta;
}

inline InitialData make_initial_data(const ExperimentConfig& cfg, ProfileFamily& fam) {
  InitialData d{fam.e_star() + cfg.e_offset, ComplexField(fam.potential().grid), ComplexField(fam.potential().grid),
                ComplexField(fam.potential().grid)};
  const auto& pr = fam.at(d.e0);
  d.phi = pr.phi;
  d.eta = perturbation_shape(cfg, fam.spectral(), pr);
  d.u0 = d.phi;
  d.u0.axpy(cfg.eps0, d.eta);
  d.u0 *= std::polar(1.0, -cfg.theta0);
  return d;
}

/// ||f||_L = <f, (L - E* + 1) f>^{1/2}; equivalent to H1 and invariant under e^{-itL}.
inline double l_norm(const ComplexField& f, const Potential& V, double e_star) {
  ComplexField Lf = apply_schrodinger(V, f);
  Lf.axpy(1.0 - e_star, f);
  return std::sqrt(std::max(0.0, inner_real(f, Lf)));
}

struct StabilityRecord {
  double t = 0, e = 0, theta = 0;
  double v_h1 = 0, v_loc_h1 = 0;  // ||v||_{H1}, ||<x>^{-s} v||_{H1}
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0, m5 = 0;
  double mass = 0, energy = 0;
  double constraint_residual = 0;
};

struct CauchyEntry {
  double t_from = 0, t_to = 0;
  double l_norm = 0;  // ||w(t_to) - e^{-i(t_to - t_from)L} w(t_from)||_L
};

struct StabilityVerdict {
  double e_star = 0, e0 = 0;
  double e_plus = NAN;          // mean of E over the final quarter
  double e_convergence = NAN;   // total variation of E over the final quarter
  bool left_tube = false;
  double exit_time = NAN;
  std::string exit_reason;
  double t_reached = 0;
  std::vector<double> radiation_t, radiation_decay;
  double radiation_tail = 0;    // int over the final quarter of ||<x>^{-s} v||_{H1}^2
  std::vector<CauchyEntry> scattering_cauchy;
  bool cauchy_decreasing = false;  // across the last three pairs
  double m2_half = 0, m2_full = 0, m2_growth = NAN;
  double edot_l1 = 0, m23_squared = 0, edot_constant = NAN;
  bool edot_dominated = false;
  double drift_n = 0, drift_h = 0;
  double u0_h1 = 0, perturbation_h1 = 0;
  double v_plus_l_norm = 0;
  std::vector<StabilityRecord> records;
  std::optional<ComplexField> u_final, v_plus;
  HypothesisReport hypotheses;
  long steps = 0;
  double wall_seconds = 0;
};

/// Evolves the perturbed soliton, tracks (E, theta, v) at every record and
/// fills the verdict. Losing the decomposition ends the run early with
/// left_tube set.
inline StabilityVerdict run_stability(const ExperimentConfig& cfg) {
  cfg.validate();
  const Grid2D g = cfg.grid();
  const Potential V = cfg.make_potential(g);
  const Nonlinearity nl = cfg.nonlinearity();
  StabilityVerdict out;
  out.hypotheses = certify_hypotheses(V);
  require_hypotheses(out.hypotheses);
  SpectralData sd = ground_state(V);
  ProfileFamily fam(V, sd, nl);
  InitialData id = make_initial_data(cfg, fam);
  out.e_star = sd.e_star;
  out.e0 = id.e0;
  out.u0_h1 = h1_norm(id.u0);
  out.perturbation_h1 = cfg.eps0 * h1_norm(id.eta);

  EvolutionConfig ec;
  ec.dt = cfg.dt;
  ec.t_final = cfg.t_final;
  ec.record_every = cfg.record_every;
  ec.abort_on_drift = false;

  const double T = cfg.t_final;
  const long snap_stride = std::lround(cfg.snapshot_every / cfg.record_every);
  NormLedger ledger(cfg.s, nl.p, sd.e_star);
  double e_guess = id.e0, th_guess = cfg.theta0;
  long rec_index = 0;
  bool half_seen = false;
  std::map<long, ComplexField> snaps;  // record index -> w
  std::optional<ComplexField> last_u;

  auto observe = [&](double t, const ComplexField& u) {
    ModulationState ms = decompose(u, fam, e_guess, th_guess, DecomposeOptions{cfg.tube, 30, t});
    e_guess = ms.e;
    th_guess = ms.theta + ms.e * cfg.record_every;
    ledger = norm_ledger_update(ledger, ms, sd, t);
    StabilityRecord r;
    r.t = t;
    r.e = ms.e;
    r.theta = ms.theta;
    r.v_h1 = h1_norm(ms.v);
    r.v_loc_h1 = weighted_norm(ms.v, WeightSpec{cfg.s, -1}, 1);
    r.m1 = ledger.m1;
    r.m2 = ledger.m2;
    r.m3 = ledger.m3;
    r.m4 = ledger.m4;
    r.m5 = ledger.m5;
    r.mass = mass(u);
    r.energy = energy(u, V, nl);
    r.constraint_residual = ms.constraint_residual;
    out.records.push_back(r);
    out.radiation_t.push_back(t);
    out.radiation_decay.push_back(r.v_loc_h1);
    if (!half_seen && t >= 0.5 * T - 1e-9) {
      half_seen = true;
      out.m2_half = ledger.m2;
    }
    if (rec_index % snap_stride == 0) snaps.emplace(rec_index, ms.w);
    ++rec_index;
    out.t_reached = t;
    if (cfg.write_fields) last_u = u;
  };

  try {
    Trajectory tr = nls_evolve(id.u0, V, nl, ec, observe, false);
    out.drift_n = tr.conserved.drift_n;
    out.drift_h = tr.conserved.drift_h;
    out.steps = tr.steps;
    out.wall_seconds = tr.wall_seconds;
  } catch (const DecompositionLost& ex) {
    out.left_tube = true;
    out.exit_time = ex.time();
    out.exit_reason = ex.what();
  }

  // conservation over the recorded part (also valid after an early exit)
  if (!out.records.empty()) {
    const double n0 = out.records.front().mass, h0 = out.records.front().energy;
    out.drift_n = out.drift_h = 0;
    for (const auto& r : out.records) {
      out.drift_n = std::max(out.drift_n, std::abs(r.mass - n0) / std::max(n0, 1e-300));
      out.drift_h = std::max(out.drift_h, std::abs(r.energy - h0) / std::max(std::abs(h0), 1e-300));
    }
  }

  const double t_end = out.t_reached;
  const double q0 = 0.75 * t_end;
  double sum = 0, tv = 0, tail = 0;
  int cnt = 0;
  const StabilityRecord* prev = nullptr;
  for (const auto& r : out.records) {
    if (r.t >= q0 - 1e-9) {
      sum += r.e;
      ++cnt;
      if (prev && prev->t >= q0 - 1e-9) {
        tv += std::abs(r.e - prev->e);
        tail += 0.5 * (r.t - prev->t) * (r.v_loc_h1 * r.v_loc_h1 + prev->v_loc_h1 * prev->v_loc_h1);
      }
    }
    if (prev) out.edot_l1 += std::abs(r.e - prev->e);
    prev = &r;
  }
  if (cnt > 0) {
    out.e_plus = sum / cnt;
    out.e_convergence = tv;
    out.radiation_tail = tail;
  }
  out.m2_full = ledger.m2;
  if (out.m2_half > 0) out.m2_growth = out.m2_full / out.m2_half - 1.0;
  out.m23_squared = std::pow(ledger.m2 + ledger.m3, 2);
  if (out.m23_squared > 0) out.edot_constant = out.edot_l1 / out.m23_squared;
  out.edot_dominated = std::isfinite(out.edot_l1) &&
                       (out.edot_l1 == 0.0 || (out.m23_squared > 0 && std::isfinite(out.edot_constant)));

  // Cauchy differences over snapshot pairs in the second half
  if (!snaps.empty()) {
    LinearPropagator P(V);
    auto it = snaps.begin();
    for (auto nx = std::next(it); nx != snaps.end(); it = nx, ++nx) {
      double t0 = it->first * cfg.record_every, t1 = nx->first * cfg.record_every;
      if (!cfg.cauchy || t0 < 0.5 * t_end - 1e-9) continue;
      ComplexField d = nx->second - P.apply(it->second, t1 - t0);
      out.scattering_cauchy.push_back({t0, t1, l_norm(d, V, sd.e_star)});
    }
    const auto& c = out.scattering_cauchy;
    if (c.size() >= 3) {
      std::size_t k = c.size();
      out.cauchy_decreasing = c[k - 1].l_norm < c[k - 2].l_norm && c[k - 2].l_norm < c[k - 3].l_norm;
    }
    const ComplexField& w_last = snaps.rbegin()->second;
    out.v_plus_l_norm = l_norm(w_last, V, sd.e_star);
    if (cfg.write_fields) out.v_plus = P.apply(w_last, -snaps.rbegin()->first * cfg.record_every);
  }
  if (cfg.write_fields && last_u) out.u_final = *last_u;
  return out;
}

/// dt-extrapolated comparison of the modulation system with finite
/// differences of the tracked parameters.
struct ModulationCheck {
  double dt = 0, record_every = 0;
  std::vector<double> t, v_h1;
  std::vector<double> e_dot_system, e_dot_fd, rate_system, rate_fd;  // rate = theta' - E
  double e_dot_rel_l2 = NAN, rate_rel_l2 = NAN;
  double max_v_h1 = 0;
  int points = 0;
};

inline ModulationCheck modulation_consistency(const ExperimentConfig& cfg) {
  cfg.validate();
  const Grid2D g = cfg.grid();
  const Potential V = cfg.make_potential(g);
  const Nonlinearity nl = cfg.nonlinearity();
  SpectralData sd = ground_state(V);
  ProfileFamily fam(V, sd, nl);
  InitialData id = make_initial_data(cfg, fam);
  struct Run {
    std::vector<double> t, e, th, se, sr, vh;
  };
  auto track = [&](double dt) {
    Run r;
    EvolutionConfig ec;
    ec.dt = dt;
    ec.t_final = cfg.t_final;
    ec.record_every = cfg.record_every;
    ec.abort_on_drift = false;
    double eg = id.e0, tg = cfg.theta0;
    nls_evolve(
        id.u0, V, nl, ec,
        [&](double t, const ComplexField& u) {
          auto ms = decompose(u, fam, eg, tg, DecomposeOptions{cfg.tube, 30, t});
          eg = ms.e;
          tg = ms.theta + ms.e * cfg.record_every;
          auto rates = modulation_system(ms, fam);
          r.t.push_back(t);
          r.e.push_back(ms.e);
          r.th.push_back(ms.theta);
          r.se.push_back(rates.e_dot);
          r.sr.push_back(rates.theta_dot_minus_e);
          r.vh.push_back(h1_norm(ms.v));
        },
        false);
    return r;
  };
  Run a = track(cfg.dt), b = track(0.5 * cfg.dt);
  if (a.t.size() != b.t.size()) throw DomainError("record grids of the two runs differ");
  // second order in dt: X = (4 X_{dt/2} - X_dt) / 3
  auto rich = [](double coarse, double fine) { return (4 * fine - coarse) / 3; };
  const std::size_t m = a.t.size();
  std::vector<double> e(m), th(m), se(m), sr(m);
  for (std::size_t i = 0; i < m; ++i) {
    e[i] = rich(a.e[i], b.e[i]);
    th[i] = rich(a.th[i], b.th[i]);
    se[i] = rich(a.se[i], b.se[i]);
    sr[i] = rich(a.sr[i], b.sr[i]);
  }
  ModulationCheck mc;
  mc.dt = cfg.dt;
  mc.record_every = cfg.record_every;
  double ne = 0, de = 0, nr = 0, dr = 0;
  const double h = cfg.record_every;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const double vmax = std::max({b.vh[i - 1], b.vh[i], b.vh[i + 1]});
    if (vmax >= 1e-2) continue;
    const double fe = (e[i + 1] - e[i - 1]) / (2 * h);
    const double fr = (th[i + 1] - th[i - 1]) / (2 * h) - e[i];
    mc.t.push_back(a.t[i]);
    mc.v_h1.push_back(b.vh[i]);
    mc.e_dot_system.push_back(se[i]);
    mc.e_dot_fd.push_back(fe);
    mc.rate_system.push_back(sr[i]);
    mc.rate_fd.push_back(fr);
    mc.max_v_h1 = std::max(mc.max_v_h1, vmax);
    ne += (se[i] - fe) * (se[i] - fe);
    de += fe * fe;
    nr += (sr[i] - fr) * (sr[i] - fr);
    dr += fr * fr;
  }
  mc.points = int(mc.t.size());
  if (mc.points > 0) {
    mc.e_dot_rel_l2 = de > 0 ? std::sqrt(ne / de) : (ne == 0 ? 0.0 : INFINITY);
    mc.rate_rel_l2 = dr > 0 ? std::sqrt(nr / dr) : (nr == 0 ? 0.0 : INFINITY);
  }
  return mc;
}

/// Data scaled as a whole: E0 - E* -> scale^2 (E0 - E*) (so phi_{E0} scales
/// like `scale`) and eps0 -> scale eps0.
inline ExperimentConfig scaled_config(ExperimentConfig cfg, double scale) {
  if (!(scale > 0.0)) throw DomainError("scale must be positive");
  cfg.e_offset *= scale * scale;
  cfg.eps0 *= scale;
  cfg.validate();
  return cfg;
}

struct SweepPoint {
  double scale = 0, eps0 = 0, e_offset = 0;
  double u0_h1 = 0, perturbation_h1 = 0;
  double e_plus = NAN, distance = NAN;  // |E+ - E*|
  bool left_tube = false;
};

struct SweepFit {
  std::vector<SweepPoint> points;
  double slope = NAN;         // |E+ - E*| ~ slope * ||u0||_{H1}, fitted through the origin
  double worst_factor = NAN;  // max over points of max(r, 1 / r), r = distance / fit
  double slope_perturbation = NAN, worst_factor_perturbation = NAN;  // same against ||u0 - phi_{E0}||_{H1}
};

inline SweepPoint sweep_point(double scale, const ExperimentConfig& cfg, const StabilityVerdict& v) {
  return {scale, cfg.eps0, cfg.e_offset, v.u0_h1, v.perturbation_h1, v.e_plus, std::abs(v.e_plus - v.e_star),
          v.left_tube};
}

namespace detail {

inline std::pair<double, double> origin_fit(const std::vector<double>& x, const std::vector<double>& y) {
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  if (!(sxx > 0)) return {NAN, NAN};
  const double c = sxy / sxx;
  double worst = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] / (c * x[i]);
    worst = std::max(worst, r > 0 ? std::max(r, 1 / r) : INFINITY);
  }
  return {c, worst};
}

}  // namespace detail

inline SweepFit fit_sweep(std::vector<SweepPoint> pts) {
  SweepFit f;
  f.points = std::move(pts);
  std::vector<double> x, xp, y;
  for (const auto& p : f.points) {
    if (p.left_tube || !std::isfinite(p.distance)) {
      f.worst_factor = f.worst_factor_perturbation = INFINITY;
      return f;
    }
    x.push_back(p.u0_h1);
    xp.push_back(p.perturbation_h1);
    y.push_back(p.distance);
  }
  std::tie(f.slope, f.worst_factor) = detail::origin_fit(x, y);
  std::tie(f.slope_perturbation, f.worst_factor_perturbation) = detail::origin_fit(xp, y);
  return f;
}

}  // namespace nls2d
