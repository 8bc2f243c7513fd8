#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nls2d/acceptance.hpp"
#include "nls2d/field_io.hpp"

namespace nls2d {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct TableSchema {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, std::string>> columns;
  bool time_series = false;
};

/// Every CSV written by a scenario. SCHEMA.md is generated from this list.
inline const std::vector<TableSchema>& table_schemas() {
  static const std::vector<TableSchema> s{
      {"stability_trace",
       "one row per record of a tracked run",
       {{"t", "time"},
        {"e", "tracked E(t)"},
        {"theta", "tracked theta(t) wrapped to (-pi, pi]"},
        {"v_h1", "||v(t)||_H1"},
        {"v_loc_h1", "||<x>^{-s} v(t)||_H1"},
        {"m1", "running M1 = sup |E - E*|"},
        {"m2", "running M2 = ||<x>^{-s} P_c w||_{L2_t H1}"},
        {"m3", "running M3 = ||<x>^{-s} P_d w||_{L2_t H1}"},
        {"m4", "running M4 (P_c w in L_inf H1 + L_q W1,2p)"},
        {"m5", "running M5 (P_d w, same norms)"},
        {"mass", "N(u(t))"},
        {"energy", "H(u(t))"},
        {"constraint_residual", "max of |<Re v, phi_E>| and |<Im v, dphi_E/dE>|"}},
       true},
      {"cauchy",
       "scattering Cauchy differences between consecutive late snapshots",
       {{"t_from", "earlier snapshot time"},
        {"t_to", "later snapshot time"},
        {"l_norm", "||w(t_to) - e^{-i(t_to - t_from)L} w(t_from)||_L, L-norm <f,(L - E* + 1)f>^{1/2}"}},
       false},
      {"conservation",
       "mass and energy at every record of a plain evolution",
       {{"t", "time"}, {"mass", "N(u(t))"}, {"energy", "H(u(t))"}},
       true},
      {"modulation",
       "modulation system against finite differences of the dt-extrapolated tracked parameters",
       {{"t", "time"},
        {"v_h1", "||v||_H1 of the dt/2 run"},
        {"e_dot_system", "dE/dt from the 2x2 system"},
        {"e_dot_fd", "centred difference of E"},
        {"rate_system", "dtheta/dt - E from the 2x2 system"},
        {"rate_fd", "centred difference of theta minus E"}},
       true},
      {"sweep",
       "amplitude sweep of the stability run",
       {{"scale", "datum scale s"},
        {"eps0", "perturbation amplitude"},
        {"e_offset", "E0 - E*"},
        {"u0_h1", "||u0||_H1"},
        {"perturbation_h1", "||u0 - e^{-i theta0} phi_{E0}||_H1"},
        {"e_plus", "E+"},
        {"distance", "|E+ - E*|"},
        {"left_tube", "1 when the decomposition was lost"}},
       false},
      {"branch",
       "bound-state branch",
       {{"e", "E"},
        {"distance", "E - E*"},
        {"phi_inf", "||phi_E||_inf"},
        {"phi_l2", "||phi_E||_L2"},
        {"residual", "||-Delta phi + V phi + alpha phi^p - E phi||_L2"},
        {"newton_steps", "Newton iterations"},
        {"seed_amplitude", "bifurcation seed amplitude a(E)"}},
       false},
      {"inverse_check",
       "free resolvent inverse check",
       {{"k", "wavenumber"}, {"side", "+1 outgoing, -1 incoming"}, {"interior_error", "max |(-Delta - k^2) chi R0 f - f| / max|f|"}},
       false},
      {"hankel_pair",
       "T1 and T2 of e^{-y} against closed forms",
       {{"x", "output point"},
        {"t1", "int J0(xy) e^{-y} dy"},
        {"t1_exact", "(1 + x^2)^{-1/2}"},
        {"t2", "int Y0(xy) e^{-y} dy"},
        {"t2_exact", "-(2/pi) asinh(1/x) / (1 + x^2)^{1/2}"}},
       false},
      {"low_energy",
       "weighted remainder of R0 - c P0 - G0 per probe",
       {{"lambda", "energy"}, {"side", "+1 or -1"}, {"probe", "probe index (see report.json)"}, {"ratio", "||E0 f||_{L2,-s} / ||f||_{L2,s}"}},
       false},
      {"smoothing",
       "local smoothing constants per probe",
       {{"probe", "probe index"},
        {"c_half", "constant over (0, T/2)"},
        {"c_full", "constant over (0, T)"},
        {"growth", "c_full / c_half - 1"},
        {"t_recurrence", "estimated box recurrence time"},
        {"recurrence_flag", "1 when T exceeds t_recurrence"}},
       false},
      {"free_smoothing",
       "free sup_x L2_t constants for the dilation family",
       {{"lambda", "dilation"}, {"sup", "constant over (0, T)"}, {"sup_half", "constant over (0, T/2)"}},
       false},
      {"decay",
       "L4 norm of e^{-itL} P_c f",
       {{"t", "time"}, {"l4", "||e^{-itL} P_c f||_L4"}},
       true},
      {"m_operator",
       "samples of h(lambda) = 1 / <vhat, M(lambda)^{-1} vhat>",
       {{"lambda", "energy"}, {"re_h", "Re h"}, {"im_h", "Im h"}, {"qmq_vs_qd0q", "||Q (M - D0) Q||_F / ||Q D0 Q||_F"}},
       false},
      {"high_energy",
       "weighted perturbed resolvent ratios times <lambda>^{1/2}",
       {{"lambda", "energy"}, {"sup", "sup over probes"}, {"probe", "probe index"}, {"ratio", "per-probe ratio"}},
       false},
      {"criteria",
       "acceptance measurements",
       {{"criterion", "criterion id"}, {"measure", "measurement index (see report.json)"}, {"value", "measured value"}, {"pass", "1 if within the bound"}},
       false},
  };
  return s;
}

inline const TableSchema& table_schema(const std::string& name) {
  for (const auto& t : table_schemas())
    if (t.name == name) return t;
  throw DomainError("unknown table '" + name + "'");
}

inline std::string schema_markdown() {
  std::string s = "# Output schema\n\nEvery scenario directory holds `config.txt` (all keys echoed), `report.json` and the CSV "
                  "tables below. Time series also get a gnuplot-ready `.dat` copy (whitespace separated, `#` header). "
                  "Wall-clock timings go to `timing.json` only, so CSV and JSON outputs are byte-identical across reruns "
                  "with the same seeds.\n";
  for (const auto& t : table_schemas()) {
    s += "\n## " + t.name + ".csv\n\n" + t.description + (t.time_series ? " (also `" + t.name + ".dat`)" : "") +
         ".\n\n| column | meaning |\n|---|---|\n";
    for (const auto& [c, d] : t.columns) s += "| `" + c + "` | " + d + " |\n";
  }
  return s;
}

class Table {
 public:
  explicit Table(const std::string& name) : schema_(&table_schema(name)) {}

  void add(std::vector<double> row) {
    if (row.size() != schema_->columns.size())
      throw DomainError("row width " + std::to_string(row.size()) + " does not match table " + schema_->name);
    rows_.push_back(std::move(row));
  }

  const TableSchema& schema() const { return *schema_; }
  std::size_t rows() const { return rows_.size(); }

  std::string csv() const {
    std::string s;
    for (std::size_t c = 0; c < schema_->columns.size(); ++c) s += (c ? "," : "") + schema_->columns[c].first;
    s += "\n";
    for (const auto& r : rows_) {
      for (std::size_t c = 0; c < r.size(); ++c) s += (c ? "," : "") + format_double(r[c]);
      s += "\n";
    }
    return s;
  }

  std::string dat() const {
    std::string s = "#";
    for (const auto& [c, d] : schema_->columns) s += " " + c;
    s += "\n";
    for (const auto& r : rows_) {
      for (std::size_t c = 0; c < r.size(); ++c) s += (c ? " " : "") + format_double(r[c]);
      s += "\n";
    }
    return s;
  }

 private:
  const TableSchema* schema_;
  std::vector<std::vector<double>> rows_;
};

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot open " + p.string() + " for writing");
  os << text;
}

/// What one scenario produced.
struct ScenarioOutcome {
  std::string name, kind;
  bool pass = false;
  std::string error;
  json report = json::object();
  std::vector<Table> tables;
  std::vector<std::pair<std::string, ComplexField>> fields;
  std::vector<std::pair<std::string, std::string>> extra_files;  // name, contents
  double seconds = 0;
};

namespace detail {

inline json measurement_json(const Measurement& m) {
  return {{"name", m.name}, {"value", m.value}, {"relation", m.relation}, {"bound", m.bound},
          {"bound_hi", m.bound_hi}, {"pass", m.pass}};
}

inline json hypotheses_json(const HypothesisReport& h) {
  json j = {{"H1", {{"pass", h.h1}, {"detail", h.h1_detail}}},
            {"H2", {{"pass", h.h2}, {"detail", h.h2_detail}, {"eigenvalues", h.negatives.eigenvalues}}},
            {"H3", {{"pass", h.h3}, {"detail", h.h3_detail}}},
            {"pass", h.pass()}};
  if (h.non_resonance) j["H3"]["sigma_min"] = h.non_resonance->sigma_min;
  return j;
}

inline std::vector<std::pair<double, double>> sample_points() {
  std::vector<std::pair<double, double>> pts;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b) pts.push_back({2.0 * a, 2.0 * b});
  return pts;
}

inline json probe_names(const std::vector<ProbeField>& probes) {
  json j = json::array();
  for (const auto& p : probes) j.push_back(p.name);
  return j;
}

inline void fill_stability(ScenarioOutcome& o, const StabilityVerdict& v) {
  Table tr("stability_trace");
  for (const auto& r : v.records)
    tr.add({r.t, r.e, wrap_angle(r.theta), r.v_h1, r.v_loc_h1, r.m1, r.m2, r.m3, r.m4, r.m5, r.mass, r.energy, r.constraint_residual});
  Table ca("cauchy");
  json cj = json::array();
  for (const auto& c : v.scattering_cauchy) {
    ca.add({c.t_from, c.t_to, c.l_norm});
    cj.push_back({{"t_from", c.t_from}, {"t_to", c.t_to}, {"l_norm", c.l_norm}});
  }
  o.tables.push_back(std::move(tr));
  o.tables.push_back(std::move(ca));
  o.report["verdict"] = {{"e_star", v.e_star},
                         {"e0", v.e0},
                         {"e_plus", v.e_plus},
                         {"e_convergence", v.e_convergence},
                         {"left_soliton_tube", v.left_tube},
                         {"exit_time", v.left_tube ? json(v.exit_time) : json(nullptr)},
                         {"exit_reason", v.exit_reason},
                         {"t_reached", v.t_reached},
                         {"radiation_tail", v.radiation_tail},
                         {"scattering_cauchy", cj},
                         {"cauchy_decreasing_last_three", v.cauchy_decreasing},
                         {"m2_half", v.m2_half},
                         {"m2_full", v.m2_full},
                         {"m2_growth", v.m2_growth},
                         {"edot_l1", v.edot_l1},
                         {"m23_squared", v.m23_squared},
                         {"edot_constant", v.edot_constant},
                         {"edot_dominated", v.edot_dominated},
                         {"drift_n", v.drift_n},
                         {"drift_h", v.drift_h},
                         {"u0_h1", v.u0_h1},
                         {"perturbation_h1", v.perturbation_h1},
                         {"v_plus_l_norm", v.v_plus_l_norm},
                         {"steps", v.steps}};
  if (!v.records.empty()) {
    const auto& r = v.records.back();
    o.report["ledger"] = {{"m1", r.m1}, {"m2", r.m2}, {"m3", r.m3}, {"m4", r.m4}, {"m5", r.m5}};
  }
  o.report["hypotheses"] = hypotheses_json(v.hypotheses);
  o.report["semantics"] =
      "finite-horizon proxy: E(t) counts as converged when its total variation over the final quarter is below 1e-3; "
      "v+ is the pullback e^{iTL} w(T) and is not extrapolated";
  if (v.u_final) o.fields.push_back({"u_final", *v.u_final});
  if (v.v_plus) o.fields.push_back({"v_plus", *v.v_plus});
}

}  // namespace detail

/// Decomposes the snapshots of an `evolve` directory in order. The
/// directory's config.txt supplies V, the nonlinearity and the initial guess.
inline void track_trajectory(ScenarioOutcome& o, const fs::path& dir) {
  const ExperimentConfig tc = load_config((dir / "config.txt").string());
  std::ifstream is(dir / "trajectory.json");
  if (!is) throw Error("no trajectory.json in " + dir.string());
  const json man = json::parse(is);
  const Grid2D g = tc.grid();
  const Potential V = tc.make_potential(g);
  const Nonlinearity nl = tc.nonlinearity();
  SpectralData sd = ground_state(V);
  ProfileFamily fam(V, sd, nl);
  NormLedger ledger(tc.s, nl.p, sd.e_star);
  double eg = sd.e_star + tc.e_offset, tg = tc.theta0;
  Table tr("stability_trace");
  bool lost = false;
  const json& list = man.at("snapshots");
  for (std::size_t k = 0; k < list.size(); ++k) {
    const json& sn = list[k];
    const double t = sn.at("t").get<double>();
    const double t_next = k + 1 < list.size() ? list[k + 1].at("t").get<double>() : t;
    ComplexField u = read_field((dir / sn.at("file").get<std::string>()).string());
    if (u.grid() != g) throw DomainError("snapshot grid does not match config.txt");
    std::optional<ModulationState> found;
    try {
      found = decompose(u, fam, eg, tg, DecomposeOptions{tc.tube, 30, t});
    } catch (const DecompositionLost& ex) {
      o.report["left_soliton_tube"] = true;
      o.report["exit_time"] = ex.time();
      o.report["exit_reason"] = ex.what();
      lost = true;
      break;
    }
    const ModulationState& ms = *found;
    eg = ms.e;
    tg = ms.theta + ms.e * (t_next - t);
    ledger = norm_ledger_update(ledger, ms, sd, t);
    tr.add({t, ms.e, wrap_angle(ms.theta), h1_norm(ms.v), weighted_norm(ms.v, WeightSpec{tc.s, -1}, 1), ledger.m1,
            ledger.m2, ledger.m3, ledger.m4, ledger.m5, mass(u), energy(u, V, nl), ms.constraint_residual});
  }
  if (!lost) o.report["left_soliton_tube"] = false;
  o.report["trajectory"] = dir.string();
  o.report["records"] = tr.rows();
  o.report["ledger"] = {{"m1", ledger.m1}, {"m2", ledger.m2}, {"m3", ledger.m3}, {"m4", ledger.m4}, {"m5", ledger.m5}};
  o.report["semantics"] = "ledger quadratures use the snapshot spacing of the trajectory, coarser than a live track";
  o.tables.push_back(std::move(tr));
  o.pass = !lost;
}

/// Runs one scenario. `kind` picks the experiment; the outcome carries the
/// report, tables and pass flag but nothing is written.
inline ScenarioOutcome run_scenario(const std::string& name, const std::string& kind, const ExperimentConfig& cfg,
                                    AcceptanceContext* ctx = nullptr) {
  ScenarioOutcome o;
  o.name = name;
  o.kind = kind;
  auto t0 = std::chrono::steady_clock::now();
  try {
    cfg.validate();
    o.report["kind"] = kind;
    if (kind == "certify" || kind == "spectral") {
      const Grid2D g = cfg.grid();
      const Potential V = cfg.make_potential(g);
      auto h = certify_hypotheses(V);
      o.report["hypotheses"] = detail::hypotheses_json(h);
      o.report["n_negative"] = h.negatives.count;
      o.report["h1_sup"] = h.decay.sup_weighted;
      o.report["d0_sigma_min"] = h.non_resonance ? json(h.non_resonance->sigma_min) : json(nullptr);
      if (kind == "spectral" && h.negatives.count >= 1) {
        SpectralData sd = ground_state(V);
        o.report["e_star"] = sd.e_star;
        o.report["residual"] = sd.residual;
        o.report["ground_state_positive"] = ground_state_positive(sd);
        if (cfg.write_fields) o.fields.push_back({"phi_star", sd.phi_star});
      }
      o.pass = h.pass();
      if (auto f = h.first_failure()) o.error = HypothesisError(f->first, f->second).what();
    } else if (kind == "branch") {
      const Grid2D g = cfg.grid();
      const Potential V = cfg.make_potential(g);
      const Nonlinearity nl = cfg.nonlinearity();
      SpectralData sd = ground_state(V);
      BranchOptions bo;
      bo.derivatives = false;
      Branch br = branch_continuation(V, sd, sd.e_star + cfg.branch_lo, sd.e_star + cfg.branch_hi, cfg.branch_steps, nl, bo);
      Table t("branch");
      std::vector<double> d, amp;
      for (const auto& b : br.profiles) {
        t.add({b.e, b.e - sd.e_star, b.phi.max_abs(), l2_norm(b.phi), b.residual, double(b.newton_steps),
               seed_amplitude(b.e, sd, nl)});
        d.push_back(std::abs(b.e - sd.e_star));
        if (cfg.write_fields) o.fields.push_back({"phi_" + std::to_string(o.fields.size()), b.phi});
        amp.push_back(b.phi.max_abs());
      }
      o.tables.push_back(std::move(t));
      o.report["branch"] = {{"e_star", sd.e_star},
                            {"complete", br.complete()},
                            {"failure", br.failure},
                            {"loglog_slope", d.size() >= 2 ? loglog_slope(d, amp) : NAN},
                            {"expected_slope", 1.0 / (nl.p - 1)}};
      o.pass = br.complete() && !br.profiles.empty();
    } else if (kind == "evolve") {
      const Grid2D g = cfg.grid();
      const Potential V = cfg.make_potential(g);
      const Nonlinearity nl = cfg.nonlinearity();
      SpectralData sd = ground_state(V);
      ProfileFamily fam(V, sd, nl);
      InitialData id = make_initial_data(cfg, fam);
      EvolutionConfig ec;
      ec.dt = cfg.dt;
      ec.t_final = cfg.t_final;
      ec.record_every = cfg.record_every;
      ec.abort_on_drift = false;
      const long stride = std::lround(cfg.snapshot_every / cfg.record_every);
      long rec = 0;
      json snaps = json::array();
      Trajectory tr = nls_evolve(
          id.u0, V, nl, ec,
          [&](double t, const ComplexField& u) {
            if (rec++ % stride) return;
            char buf[32];
            std::snprintf(buf, sizeof buf, "snap_%05zu", o.fields.size());
            o.fields.push_back({buf, u});
            snaps.push_back({{"index", o.fields.size() - 1}, {"t", t}, {"file", std::string(buf) + ".bin"}});
          },
          false);
      Table t("conservation");
      for (std::size_t i = 0; i < tr.conserved.times.size(); ++i)
        t.add({tr.conserved.times[i], tr.conserved.n_series[i], tr.conserved.h_series[i]});
      o.tables.push_back(std::move(t));
      o.report["conservation"] = {{"drift_n", tr.conserved.drift_n},
                                  {"drift_h", tr.conserved.drift_h},
                                  {"max_drift_n", ec.max_drift_n},
                                  {"max_drift_h", ec.max_drift_h},
                                  {"steps", tr.steps}};
      o.report["snapshots"] = snaps;
      o.report["e_star"] = sd.e_star;
      o.report["e0"] = id.e0;
      o.pass = tr.conserved.drift_n < ec.max_drift_n && tr.conserved.drift_h < ec.max_drift_h;
      json manifest = {{"config", echo_config(cfg)},
                       {"conservation", o.report["conservation"]},
                       {"snapshots", snaps},
                       {"wall_seconds", tr.wall_seconds}};
      o.extra_files.push_back({"trajectory.json", manifest.dump(2) + "\n"});
    } else if (kind == "track" && !cfg.trajectory.empty()) {
      track_trajectory(o, cfg.trajectory);
    } else if (kind == "track") {
      StabilityVerdict v = run_stability(cfg);
      detail::fill_stability(o, v);
      o.pass = !v.left_tube && v.e_plus < 0 && v.e_convergence < 1e-3;
    } else if (kind == "sweep") {
      std::vector<SweepPoint> pts;
      for (double sc : cfg.sweep_scales) {
        ExperimentConfig cs = scaled_config(cfg, sc);
        cs.cauchy = false;
        cs.write_fields = false;
        pts.push_back(sweep_point(sc, cs, run_stability(cs)));
      }
      SweepFit fit = fit_sweep(pts);
      Table t("sweep");
      for (const auto& p : fit.points)
        t.add({p.scale, p.eps0, p.e_offset, p.u0_h1, p.perturbation_h1, p.e_plus, p.distance, p.left_tube ? 1.0 : 0.0});
      o.tables.push_back(std::move(t));
      o.report["sweep"] = {{"slope", fit.slope},
                           {"worst_factor", fit.worst_factor},
                           {"slope_perturbation", fit.slope_perturbation},
                           {"worst_factor_perturbation", fit.worst_factor_perturbation}};
      o.pass = fit.worst_factor <= 2.0;
    } else if (kind == "modulation") {
      auto mc = modulation_consistency(cfg);
      Table t("modulation");
      for (std::size_t i = 0; i < mc.t.size(); ++i)
        t.add({mc.t[i], mc.v_h1[i], mc.e_dot_system[i], mc.e_dot_fd[i], mc.rate_system[i], mc.rate_fd[i]});
      o.tables.push_back(std::move(t));
      o.report["modulation"] = {{"e_dot_rel_l2", mc.e_dot_rel_l2},
                                {"rate_rel_l2", mc.rate_rel_l2},
                                {"max_v_h1", mc.max_v_h1},
                                {"points", mc.points}};
      o.pass = mc.points > 0 && mc.e_dot_rel_l2 < 0.05 && mc.rate_rel_l2 < 0.05;
    } else if (kind == "resolvent_free") {
      const Grid2D g = cfg.grid();
      auto f = ComplexField::from_function(
          g, [](double x, double y) { return std::exp(-((x - 1) * (x - 1) + y * y)) * std::polar(1.0, 0.5 * y); });
      Table inv("inverse_check");
      bool ok = true;
      for (double k : cfg.k_values) {
        FreeResolvent R0(g, k);
        for (int side : {1, -1}) {
          double e = resolvent_inverse_check(R0, f, side).interior_error;
          inv.add({k, double(side), e});
          ok = ok && e < 1e-4;
        }
      }
      auto s = sample_log_grid([](double y) { return std::exp(-y); }, 1e-6, 60.0, 2000);
      auto x = log_grid(0.1, 20.0, 50);
      auto h = hankel_rooney_ops(s, x);
      Table hp("hankel_pair");
      double worst = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        double q = std::sqrt(1 + x[i] * x[i]);
        hp.add({x[i], h.t1[i], 1 / q, h.t2[i], -2 / std::numbers::pi * std::asinh(1 / x[i]) / q});
        worst = std::max(worst, std::abs(h.t1[i] - 1 / q));
      }
      auto gauss = ComplexField::from_function(
          g, [](double a, double b) { return cplx(std::exp(-(a * a + b * b) / 2) / std::sqrt(std::numbers::pi), 0); });
      auto kr = k_integral_sup(gauss, detail::sample_points(), 0.05, 10.0, 32);
      o.tables.push_back(std::move(inv));
      o.tables.push_back(std::move(hp));
      o.report["hankel_pair_max_error"] = worst;
      o.report["k_integral"] = {{"sup_coarse", kr.sup_coarse}, {"sup_fine", kr.sup_fine}, {"relative_change", kr.relative_change}};
      o.pass = ok && worst < 1e-6 && kr.relative_change < 0.1;
    } else if (kind == "lowenergy") {
      const Grid2D g = cfg.grid();
      auto probes = probe_set(g, unsigned(cfg.seed));
      std::vector<double> lams = cfg.lambdas;
      std::sort(lams.begin(), lams.end(), std::greater<>());
      Table t("low_energy");
      json rem = json::array();
      bool ok = true;
      for (int side : {1, -1}) {
        double prev = INFINITY;
        for (double l : lams) {
          auto le = low_energy_expansion(l, g, probes, side, cfg.s);
          for (std::size_t p = 0; p < le.remainder_ratios.size(); ++p) t.add({l, double(side), double(p), le.remainder_ratios[p]});
          rem.push_back({{"lambda", l}, {"side", side}, {"remainder", le.remainder}});
          ok = ok && le.remainder < prev && le.c_minus == std::conj(le.c_plus);
          prev = le.remainder;
        }
      }
      o.tables.push_back(std::move(t));
      o.report["probes"] = detail::probe_names(probes);
      o.report["remainders"] = rem;
      o.pass = ok;
    } else if (kind == "smoothing") {
      const Grid2D g = cfg.grid();
      const Potential V = cfg.make_potential(g);
      SpectralData sd = ground_state(V);
      auto probes = probe_set(g, unsigned(cfg.seed));
      auto rep = smoothing_report(V, sd, probes, cfg.probe_T, cfg.s);
      Table t("smoothing");
      for (std::size_t i = 0; i < rep.entries.size(); ++i) {
        const auto& e = rep.entries[i];
        t.add({double(i), e.c_half, e.c_full, e.growth, e.t_recurrence, e.recurrence_flag ? 1.0 : 0.0});
      }
      o.tables.push_back(std::move(t));
      o.report["probes"] = detail::probe_names(probes);
      o.report["max_growth"] = rep.max_growth();
      o.pass = rep.max_growth() < 0.05;
    } else if (kind == "free_smoothing") {
      const Grid2D g = cfg.grid();
      auto fn = [](double x, double y) { return cplx(std::exp(-(x * x + y * y) / 2), 0); };
      Table t("free_smoothing");
      std::vector<double> sups;
      for (double lam : {0.5, 1.0, 2.0}) {
        auto r = free_sup_x_l2t(dilate(g, fn, lam), detail::sample_points(), cfg.probe_T);
        t.add({lam, r.sup, r.sup_half});
        sups.push_back(r.sup);
      }
      auto [mn, mx] = std::minmax_element(sups.begin(), sups.end());
      o.tables.push_back(std::move(t));
      o.report["variation"] = *mx / *mn - 1.0;
      o.pass = *mx / *mn - 1.0 < 0.1;
    } else if (kind == "decay") {
      const Grid2D g = cfg.grid();
      const Potential V = cfg.make_potential(g);
      SpectralData sd = ground_state(V);
      const double w2 = cfg.eta_width * cfg.eta_width;
      auto f = ComplexField::from_function(g, [w2](double x, double y) { return cplx(std::exp(-(x * x + y * y) / w2), 0); });
      std::vector<double> ts;
      for (int i = 0; i <= 32; ++i) ts.push_back(std::pow(cfg.probe_T, i / 32.0));
      auto pr = dispersive_decay_probe(f, V, sd, ts, 1.0, cfg.probe_T);
      Table t("decay");
      for (std::size_t i = 0; i < pr.t.size(); ++i) t.add({pr.t[i], pr.l4[i]});
      o.tables.push_back(std::move(t));
      o.report["exponent"] = pr.exponent;
      o.report["warning"] = pr.warning ? json(*pr.warning) : json(nullptr);
      o.pass = pr.exponent >= -0.62 && pr.exponent <= -0.42;
    } else if (kind == "mfit") {
      const Grid2D g = cfg.grid();
      const Potential V = cfg.make_potential(g);
      json fits = json::array();
      Table t("m_operator");
      bool ok = true;
      for (int side : {1, -1}) {
        auto fit = m_operator_fit(cfg.lambdas, V, side);
        if (side == 1)
          for (const auto& smp : fit.samples) t.add({smp.lambda, smp.h.real(), smp.h.imag(), smp.qmq_vs_qd0q});
        fits.push_back({{"side", side},
                        {"a", fit.a},
                        {"a_reference", fit.a_reference},
                        {"re_z", fit.z.real()},
                        {"im_z", fit.z.imag()},
                        {"fit_residual", fit.fit_residual},
                        {"reliable", fit.reliable},
                        {"note", fit.note},
                        {"support_size", fit.support_size}});
        ok = ok && fit.reliable;
      }
      o.tables.push_back(std::move(t));
      o.report["fits"] = fits;
      o.pass = ok;
    } else if (kind == "highenergy") {
      const Grid2D g = cfg.grid();
      const Potential V = cfg.make_potential(g);
      SpectralData sd = ground_state(V);
      auto probes = probe_set(g, unsigned(cfg.seed));
      std::vector<double> lams;
      for (int i = 0; i < 12; ++i) lams.push_back(std::pow(50.0, i / 11.0));
      auto rep = high_energy_profile(V, sd, probes, lams, cfg.s);
      Table t("high_energy");
      for (std::size_t i = 0; i < lams.size(); ++i)
        for (std::size_t p = 0; p < probes.size(); ++p) t.add({lams[i], rep.sup_over_probes[i], double(p), rep.ratios[i][p]});
      o.tables.push_back(std::move(t));
      o.report["probes"] = detail::probe_names(probes);
      o.report["max_over_min"] = rep.max_over_min;
      o.pass = rep.max_over_min < 5.0;
    } else if (kind == "criterion") {
      AcceptanceContext local;
      CriterionResult r = evaluate_criterion(cfg.criterion, ctx ? *ctx : local);
      Table t("criteria");
      json ms = json::array();
      for (std::size_t i = 0; i < r.measures.size(); ++i) {
        t.add({double(r.id), double(i), r.measures[i].value, r.measures[i].pass ? 1.0 : 0.0});
        ms.push_back(detail::measurement_json(r.measures[i]));
      }
      o.tables.push_back(std::move(t));
      o.report["criterion"] = {{"id", r.id}, {"title", r.title}, {"measures", ms}, {"note", r.note}, {"pass", r.pass()}};
      o.error = r.error;
      o.pass = r.pass();
    } else {
      throw DomainError("unknown scenario kind '" + kind + "'");
    }
  } catch (const std::exception& ex) {
    o.pass = false;
    o.error = ex.what();
  }
  o.report["pass"] = o.pass;
  o.report["error"] = o.error.empty() ? json(nullptr) : json(o.error);
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

/// Writes config.txt, report.json, tables (.csv, .dat for time series),
/// fields and timing.json into `dir`.
inline void write_outcome(const ScenarioOutcome& o, const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "config.txt", echo_config(cfg));
  write_text(dir / "report.json", o.report.dump(2) + "\n");
  for (const auto& t : o.tables) {
    write_text(dir / (t.schema().name + ".csv"), t.csv());
    if (t.schema().time_series) write_text(dir / (t.schema().name + ".dat"), t.dat());
  }
  for (const auto& [n, f] : o.fields) write_field((dir / (n + ".bin")).string(), f);
  for (const auto& [n, text] : o.extra_files) write_text(dir / n, text);
  write_text(dir / "timing.json", json{{"seconds", o.seconds}}.dump(2) + "\n");
}

struct SuiteEntry {
  std::string name, kind;
  ExperimentConfig cfg;
};

struct SuiteSummary {
  std::vector<ScenarioOutcome> outcomes;
  bool pass() const {
    for (const auto& o : outcomes)
      if (!o.pass) return false;
    return true;
  }
};

/// {"scenarios": [{"name": ..., "kind": ..., "config_file": ..., "config": {key: value}}]}.
/// Relative config files resolve against `base_dir`.
inline std::vector<SuiteEntry> parse_manifest(const json& m, const fs::path& base_dir,
                                              std::optional<std::uint64_t> seed = std::nullopt) {
  std::vector<SuiteEntry> out;
  if (!m.contains("scenarios")) return out;
  std::map<std::string, int> seen;
  for (const auto& s : m.at("scenarios")) {
    SuiteEntry e;
    e.name = s.at("name").get<std::string>();
    e.kind = s.at("kind").get<std::string>();
    if (e.name.empty() || e.name.find('/') != std::string::npos || e.name == "." || e.name == "..")
      throw DomainError("scenario name '" + e.name + "' is not a plain directory name");
    if (seen[e.name]++) throw DomainError("duplicate scenario name '" + e.name + "'");
    if (s.contains("config_file")) {
      fs::path p = s.at("config_file").get<std::string>();
      e.cfg = load_config((p.is_absolute() ? p : base_dir / p).string());
    }
    if (s.contains("config"))
      for (const auto& [k, v] : s.at("config").items()) {
        std::string text;
        if (v.is_string()) text = v.get<std::string>();
        else if (v.is_boolean()) text = v.get<bool>() ? "true" : "false";
        else if (v.is_number_integer()) text = std::to_string(v.get<long long>());
        else if (v.is_number()) text = format_double(v.get<double>());
        else if (v.is_array()) {
          for (std::size_t i = 0; i < v.size(); ++i) text += (i ? "," : "") + format_double(v[i].get<double>());
        } else throw DomainError("config value for '" + k + "' has an unsupported type");
        set_config_value(e.cfg, k, text);
      }
    if (seed) e.cfg.seed = *seed;
    e.cfg.scenario = e.name;
    e.cfg.validate();
    out.push_back(std::move(e));
  }
  return out;
}

/// Runs the scenarios with at most `jobs` in flight, writes each into
/// out_dir/<name>/ and a top-level summary.json, summary.csv and SCHEMA.md.
inline SuiteSummary run_suite(const std::vector<SuiteEntry>& entries, const fs::path& out_dir, int jobs = 1) {
  fs::create_directories(out_dir);
  AcceptanceContext ctx;
  SuiteSummary sum;
  sum.outcomes.resize(entries.size());
  jobs = std::max(1, jobs);
  std::mutex mu;
  std::condition_variable cv;
  int running = 0;
  std::vector<std::future<void>> futs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return running < jobs; });
      ++running;
    }
    futs.push_back(std::async(std::launch::async, [&, i] {
      const auto& e = entries[i];
      ExperimentConfig cfg = e.cfg;
      cfg.out = (out_dir / e.name).string();
      sum.outcomes[i] = run_scenario(e.name, e.kind, cfg, &ctx);
      try {
        write_outcome(sum.outcomes[i], cfg, out_dir / e.name);
      } catch (const std::exception& ex) {
        sum.outcomes[i].pass = false;
        sum.outcomes[i].error = ex.what();
      }
      std::lock_guard lock(mu);
      --running;
      cv.notify_one();
    }));
  }
  for (auto& f : futs) f.get();

  json sj = {{"pass", sum.pass()}, {"scenarios", json::array()}, {"criteria", json::array()}};
  std::string csv = "name,kind,pass\n";
  for (const auto& o : sum.outcomes) {
    sj["scenarios"].push_back(
        {{"name", o.name}, {"kind", o.kind}, {"pass", o.pass}, {"error", o.error.empty() ? json(nullptr) : json(o.error)}});
    csv += o.name + "," + o.kind + "," + (o.pass ? "1" : "0") + "\n";
    if (o.kind == "criterion" && o.report.contains("criterion"))
      sj["criteria"].push_back({{"id", o.report["criterion"]["id"]}, {"title", o.report["criterion"]["title"]}, {"pass", o.pass}});
  }
  write_text(out_dir / "summary.json", sj.dump(2) + "\n");
  write_text(out_dir / "summary.csv", csv);
  write_text(out_dir / "SCHEMA.md", schema_markdown());
  return sum;
}

inline SuiteSummary run_suite_file(const fs::path& manifest, const fs::path& out_dir, int jobs = 1,
                                   std::optional<std::uint64_t> seed = std::nullopt) {
  std::ifstream is(manifest);
  if (!is) throw Error("cannot open manifest " + manifest.string());
  json m;
  try {
    m = json::parse(is);
  } catch (const json::exception& ex) {
    throw DomainError("manifest " + manifest.string() + ": " + ex.what());
  }
  return run_suite(parse_manifest(m, manifest.parent_path(), seed), out_dir, jobs);
}

}  // namespace nls2d
