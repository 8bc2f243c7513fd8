#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nls2d/suite.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "flat key = value config file");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "override the RNG seed");
  sub->add_option("--set", c.sets, "override one key, key=value (repeatable)");
}

nls2d::ExperimentConfig build_config(const Common& c, const std::string& default_out) {
  nls2d::ExperimentConfig cfg;
  if (!c.config_path.empty()) cfg = nls2d::load_config(c.config_path);
  for (const auto& kv : c.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw nls2d::DomainError("--set expects key=value, got '" + kv + "'");
    nls2d::set_config_value(cfg, std::string(nls2d::detail::trim(kv.substr(0, eq))), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  else if (c.config_path.empty() && cfg.out == "out") cfg.out = "out/" + default_out;
  cfg.validate();
  return cfg;
}

int run_single(const Common& c, const std::string& kind, const std::string& label) {
  nls2d::ExperimentConfig cfg = build_config(c, label);
  nls2d::ScenarioOutcome o = nls2d::run_scenario(cfg.scenario, kind, cfg);
  nls2d::write_outcome(o, cfg, cfg.out);
  std::cout << o.report.dump(2) << "\n";
  std::cerr << (o.pass ? "PASS" : "FAIL") << " " << kind << " -> " << cfg.out << "\n";
  if (!o.error.empty()) std::cerr << "error: " << o.error << "\n";
  if (o.pass) return 0;
  // failed check or hypothesis: 1; any other thrown error: 2
  const bool errored = !o.error.empty() && kind != "criterion" && kind != "certify" && kind != "spectral";
  return errored ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nls2d: ground-state stability experiments for 2D NLS with a potential"};
  app.require_subcommand(1);

  struct Sub {
    std::string name, kind, help;
  };
  const std::vector<Sub> simple{
      {"spectral", "spectral", "ground state of L = -Delta + V and hypothesis checks"},
      {"certify", "certify", "check decay, single negative eigenvalue and non-resonance of V"},
      {"branch", "branch", "continue the nonlinear bound-state branch from E*"},
      {"evolve", "evolve", "plain NLS evolution with conservation table"},
  };
  std::vector<Common> commons(simple.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < simple.size(); ++i) {
    subs.push_back(app.add_subcommand(simple[i].name, simple[i].help));
    add_common(subs.back(), commons[i]);
  }

  Common track_c;
  std::string track_what = "stability";
  auto* track = app.add_subcommand("track", "tracked stability run, modulation check or amplitude sweep");
  add_common(track, track_c);
  track->add_option("--what", track_what, "stability | modulation | sweep")
      ->check(CLI::IsMember({"stability", "modulation", "sweep"}));
  std::string track_dir;
  track->add_option("--trajectory", track_dir, "decompose the snapshots of an evolve output directory");

  Common res_c;
  std::string res_what;
  auto* res = app.add_subcommand("resolvent", "resolvent and dispersive estimates");
  add_common(res, res_c);
  res->add_option("what", res_what, "free | lowenergy | smoothing | free-smoothing | decay | mfit | highenergy")
      ->required()
      ->check(CLI::IsMember({"free", "lowenergy", "smoothing", "free-smoothing", "decay", "mfit", "highenergy"}));

  Common crit_c;
  int crit_id = 0;
  auto* crit = app.add_subcommand("criterion", "evaluate one acceptance criterion");
  add_common(crit, crit_c);
  crit->add_option("id", crit_id, "criterion number 1-13")->required()->check(CLI::Range(1, 13));

  std::string manifest, suite_out = "out/suite";
  int jobs = 1;
  std::optional<std::uint64_t> suite_seed;
  auto* suite = app.add_subcommand("suite", "run every scenario of a JSON manifest");
  suite->add_option("--manifest", manifest, "manifest file")->required();
  suite->add_option("--out", suite_out, "output directory");
  suite->add_option("--jobs", jobs, "scenarios run concurrently")->check(CLI::PositiveNumber);
  suite->add_option("--seed", suite_seed, "override every scenario seed");

  auto* schema = app.add_subcommand("schema", "print the output table schema as markdown");
  auto* keys = app.add_subcommand("config", "print every config key with its default value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (std::size_t i = 0; i < simple.size(); ++i)
      if (*subs[i]) return run_single(commons[i], simple[i].kind, simple[i].name);
    if (*track) {
      if (!track_dir.empty()) track_c.sets.push_back("trajectory=" + track_dir);
      const std::string kind = track_what == "stability" ? "track" : track_what;
      return run_single(track_c, kind, "track_" + track_what);
    }
    if (*res) {
      static const std::map<std::string, std::string> kinds{
          {"free", "resolvent_free"}, {"lowenergy", "lowenergy"}, {"smoothing", "smoothing"},
          {"free-smoothing", "free_smoothing"}, {"decay", "decay"}, {"mfit", "mfit"}, {"highenergy", "highenergy"}};
      return run_single(res_c, kinds.at(res_what), "resolvent_" + res_what);
    }
    if (*crit) {
      crit_c.sets.push_back("criterion=" + std::to_string(crit_id));
      return run_single(crit_c, "criterion", "criterion_" + std::to_string(crit_id));
    }
    if (*suite) {
      auto sum = nls2d::run_suite_file(manifest, suite_out, jobs, suite_seed);
      for (const auto& o : sum.outcomes)
        std::cout << (o.pass ? "PASS " : "FAIL ") << o.name << " (" << o.kind << ")"
                  << (o.error.empty() ? "" : ": " + o.error) << "\n";
      std::cout << "summary: " << suite_out << "/summary.json\n";
      return sum.pass() ? 0 : 1;
    }
    if (*schema) {
      std::cout << nls2d::schema_markdown();
      return 0;
    }
    if (*keys) {
      std::cout << nls2d::echo_config(nls2d::ExperimentConfig{});
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
