#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nls2d/suite.hpp"

using namespace nls2d;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n = 128;
  c.l_dom = 30.0;
  c.t_final = 2.0;
  c.record_every = 0.1;
  c.snapshot_every = 0.5;
  c.cauchy = false;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("nls2d_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, EchoRoundTrip) {
  ExperimentConfig c = small_config();
  c.eta_shape = "random_band";
  c.lambdas = {0.5, 0.25};
  c.seed = 7;
  ExperimentConfig d = parse_config_string(echo_config(c));
  EXPECT_EQ(echo_config(d), echo_config(c));
  EXPECT_EQ(d.lambdas.size(), 2u);
  EXPECT_EQ(d.seed, 7u);
}

TEST(Config, EveryKeyEchoed) {
  const std::string e = echo_config(ExperimentConfig{});
  for (const auto& k : config_keys()) EXPECT_NE(e.find(k.name + " = "), std::string::npos) << k.name;
}

TEST(Config, CommentsAndQuotes) {
  auto c = parse_config_string("# header\neps0 = 0.01  # inline\npotential = \"zero\"\nscenario = \"a#b\"\n");
  EXPECT_DOUBLE_EQ(c.eps0, 0.01);
  EXPECT_EQ(c.potential, "zero");
  EXPECT_EQ(c.scenario, "a#b");
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config_string("no_such_key = 1\n"), DomainError);
  EXPECT_THROW(parse_config_string("eps0 = 0.2\n"), DomainError);
  EXPECT_THROW(parse_config_string("eps0 = abc\n"), DomainError);
  EXPECT_THROW(parse_config_string("n = 100.5\n"), DomainError);
  EXPECT_THROW(parse_config_string("just text\n"), DomainError);
  EXPECT_THROW(parse_config_string("record_every = 0.0123\n"), DomainError);
}

TEST(Certify, DefaultWellPasses) {
  ExperimentConfig c = small_config();
  auto h = certify_hypotheses(c.make_potential(c.grid()));
  EXPECT_TRUE(h.pass());
  EXPECT_EQ(h.negatives.count, 1);
  EXPECT_FALSE(h.first_failure().has_value());
}

TEST(Certify, ZeroPotentialFailsH2) {
  ExperimentConfig c = small_config();
  auto h = certify_hypotheses(zero_potential(c.grid()));
  ASSERT_TRUE(h.first_failure().has_value());
  EXPECT_EQ(h.first_failure()->first, "H2");
  EXPECT_EQ(h.negatives.count, 0);
  try {
    require_hypotheses(h);
    FAIL() << "expected HypothesisError";
  } catch (const HypothesisError& e) {
    EXPECT_NE(std::string(e.what()).find("H2"), std::string::npos);
  }
}

TEST(Certify, DeepWellFailsH2) {
  ExperimentConfig c = small_config();
  auto h = certify_hypotheses(gaussian_well(c.grid(), 40.0));
  EXPECT_GT(h.negatives.count, 1);
  ASSERT_TRUE(h.first_failure().has_value());
  EXPECT_EQ(h.first_failure()->first, "H2");
}

TEST(Stability, ZeroPerturbationKeepsParameters) {
  ExperimentConfig c = small_config();
  c.eps0 = 0.0;
  auto v = run_stability(c);
  ASSERT_FALSE(v.left_tube);
  ASSERT_FALSE(v.records.empty());
  for (const auto& r : v.records) EXPECT_NEAR(r.e, v.e0, 1e-6) << "t = " << r.t;
  const auto& last = v.records.back();
  EXPECT_NEAR(last.m1, std::abs(v.e0 - v.e_star), 1e-6);
  // the only radiation left is the O(dt^2) splitting defect of the discrete profile
  EXPECT_LT(last.m2, 2e-4);
  EXPECT_LT(last.m3, 2e-4);
  EXPECT_LT(last.m4, 2e-4);
  EXPECT_LT(last.m5, 2e-4);
  c.dt *= 0.5;
  auto h = run_stability(c);
  EXPECT_LT(h.records.back().m4, last.m4 / 3.0);
}

TEST(Stability, LedgerMonotoneAndFinite) {
  auto v = run_stability(small_config());
  ASSERT_GE(v.records.size(), 2u);
  for (std::size_t i = 1; i < v.records.size(); ++i) {
    const auto &a = v.records[i - 1], &b = v.records[i];
    EXPECT_GE(b.m1, a.m1);
    EXPECT_GE(b.m2, a.m2);
    EXPECT_GE(b.m3, a.m3);
    EXPECT_GE(b.m4, a.m4);
    EXPECT_GE(b.m5, a.m5);
  }
  EXPECT_TRUE(std::isfinite(v.e_plus));
  EXPECT_LT(v.drift_n, 1e-8);
}

TEST(Stability, GaugeCovariance) {
  ExperimentConfig a = small_config(), b = small_config();
  b.theta0 = 0.7;
  auto va = run_stability(a), vb = run_stability(b);
  ASSERT_EQ(va.records.size(), vb.records.size());
  for (std::size_t i = 0; i < va.records.size(); ++i) {
    EXPECT_NEAR(va.records[i].e, vb.records[i].e, 1e-9);
    EXPECT_NEAR(wrap_angle(vb.records[i].theta - va.records[i].theta - 0.7), 0.0, 1e-9);
    EXPECT_NEAR(va.records[i].v_h1, vb.records[i].v_h1, 1e-9);
  }
}

TEST(Stability, TimeStepConvergence) {
  ExperimentConfig a = small_config(), b = small_config();
  b.dt = 0.5 * a.dt;
  EXPECT_LT(std::abs(run_stability(a).e_plus - run_stability(b).e_plus), 1e-4);
}

TEST(Sweep, OriginFitOnExactData) {
  std::vector<SweepPoint> pts;
  for (double s : {0.5, 1.0, 2.0}) {
    SweepPoint p;
    p.scale = s;
    p.u0_h1 = s;
    p.perturbation_h1 = 0.1 * s;
    p.distance = 3.0 * s;
    pts.push_back(p);
  }
  auto f = fit_sweep(pts);
  EXPECT_NEAR(f.slope, 3.0, 1e-12);
  EXPECT_NEAR(f.worst_factor, 1.0, 1e-12);
  EXPECT_NEAR(f.slope_perturbation, 30.0, 1e-10);
  pts[1].distance = 6.0;
  f = fit_sweep(pts);
  EXPECT_GT(f.worst_factor, 1.5);
  pts[2].left_tube = true;
  EXPECT_TRUE(std::isinf(fit_sweep(pts).worst_factor));
}

TEST(Sweep, ScaledConfig) {
  ExperimentConfig c;
  auto d = scaled_config(c, 0.5);
  EXPECT_DOUBLE_EQ(d.e_offset, 0.25 * c.e_offset);
  EXPECT_DOUBLE_EQ(d.eps0, 0.5 * c.eps0);
  EXPECT_THROW(scaled_config(c, 0.0), DomainError);
}

TEST(Schema, TablesMatchSchemaHeaders) {
  for (const auto& s : table_schemas()) {
    Table t(s.name);
    std::string header = t.csv();
    header.pop_back();
    std::string expect;
    for (std::size_t i = 0; i < s.columns.size(); ++i) expect += (i ? "," : "") + s.columns[i].first;
    EXPECT_EQ(header, expect);
    EXPECT_NE(schema_markdown().find("## " + s.name + ".csv"), std::string::npos);
  }
  Table t("decay");
  EXPECT_THROW(t.add({1.0}), DomainError);
  EXPECT_THROW(Table("nope"), DomainError);
}

TEST(Suite, EmptyManifestSucceeds) {
  fs::path out = scratch("empty");
  auto sum = run_suite(parse_manifest(json::object(), "."), out);
  EXPECT_TRUE(sum.pass());
  EXPECT_TRUE(sum.outcomes.empty());
  auto j = json::parse(slurp(out / "summary.json"));
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_TRUE(j["scenarios"].empty());
  EXPECT_TRUE(fs::exists(out / "SCHEMA.md"));
  auto e2 = run_suite(parse_manifest(json{{"scenarios", json::array()}}, "."), out);
  EXPECT_TRUE(e2.pass());
}

TEST(Suite, ManifestValidation) {
  json dup = {{"scenarios", {{{"name", "a"}, {"kind", "certify"}}, {{"name", "a"}, {"kind", "certify"}}}}};
  EXPECT_THROW(parse_manifest(dup, "."), DomainError);
  json bad_name = {{"scenarios", {{{"name", "../x"}, {"kind", "certify"}}}}};
  EXPECT_THROW(parse_manifest(bad_name, "."), DomainError);
  json bad_key = {{"scenarios", {{{"name", "a"}, {"kind", "certify"}, {"config", {{"bogus", 1}}}}}}};
  EXPECT_THROW(parse_manifest(bad_key, "."), DomainError);
}

TEST(Suite, DeterministicOutputsAndFailureRecording) {
  json m = {{"scenarios",
             {{{"name", "cert"}, {"kind", "certify"}, {"config", {{"n", 128}, {"l_dom", 30.0}}}},
              {{"name", "zero"}, {"kind", "certify"}, {"config", {{"n", 128}, {"l_dom", 30.0}, {"potential", "zero"}}}},
              {{"name", "run"},
               {"kind", "track"},
               {"config", {{"n", 128}, {"l_dom", 30.0}, {"t_final", 1.0}, {"record_every", 0.1}, {"snapshot_every", 0.5}}}},
              {{"name", "weird"}, {"kind", "no_such_kind"}}}}};
  fs::path a = scratch("det_a"), b = scratch("det_b");
  auto sa = run_suite(parse_manifest(m, "."), a, 2);
  auto sb = run_suite(parse_manifest(m, "."), b, 1);
  EXPECT_FALSE(sa.pass());
  ASSERT_EQ(sa.outcomes.size(), 4u);
  EXPECT_TRUE(sa.outcomes[0].pass);
  EXPECT_FALSE(sa.outcomes[1].pass);
  EXPECT_NE(sa.outcomes[1].error.find("H2"), std::string::npos);
  EXPECT_TRUE(sa.outcomes[2].pass);
  EXPECT_FALSE(sa.outcomes[3].pass);
  for (const char* f : {"summary.json", "summary.csv", "run/stability_trace.csv", "run/stability_trace.dat",
                        "run/report.json", "cert/report.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  auto echoed = load_config((a / "run" / "config.txt").string());
  EXPECT_DOUBLE_EQ(echoed.t_final, 1.0);
  EXPECT_EQ(echoed.scenario, "run");
}

TEST(Suite, TrackConsumesEvolveDirectory) {
  fs::path dir = scratch("traj");
  ExperimentConfig c = small_config();
  auto ev = run_scenario("ev", "evolve", c);
  ASSERT_TRUE(ev.pass) << ev.error;
  write_outcome(ev, c, dir / "ev");
  EXPECT_TRUE(fs::exists(dir / "ev" / "trajectory.json"));
  EXPECT_TRUE(fs::exists(dir / "ev" / "snap_00000.bin"));
  ExperimentConfig t = small_config();
  t.trajectory = (dir / "ev").string();
  auto tr = run_scenario("tr", "track", t);
  ASSERT_TRUE(tr.pass) << tr.error << "\n" << tr.report.dump(2);
  ASSERT_EQ(tr.tables.size(), 1u);
  EXPECT_EQ(tr.tables[0].rows(), ev.report["snapshots"].size());
  // the live track and the trajectory track decompose the same fields
  auto live = run_stability(c);
  EXPECT_NEAR(tr.report["ledger"]["m1"].get<double>(), live.records.back().m1, 1e-8);
}
