#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "nls2d/bound_states.hpp"
#include "nls2d/error.hpp"
#include "nls2d/grid.hpp"
#include "nls2d/spectral.hpp"

namespace nls2d {

/// Shortest round-trip text for a double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& key) {
  double x = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw DomainError("config key '" + key + "': '" + std::string(s) + "' is not a number");
  return x;
}

inline long long parse_int(std::string_view s, const std::string& key) {
  long long x = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw DomainError("config key '" + key + "': '" + std::string(s) + "' is not an integer");
  return x;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return std::string(s.substr(1, s.size() - 2));
  return std::string(s);
}

}  // namespace detail

/// Everything a scenario needs. Defaults reproduce the default stability run.
struct ExperimentConfig {
  std::string scenario = "default";
  // potential
  std::string potential = "gaussian_well";  // gaussian_well | zero
  double depth = 5.0, width = 1.0;
  // nonlinearity
  double alpha = 1.0, p = 3.0;
  // grid
  int n = 256;
  double l_dom = 60.0;
  // evolution
  double dt = 0.005, t_final = 200.0, record_every = 0.5, snapshot_every = 25.0;
  double s = 1.5;
  // initial data u0 = e^{-i theta0} (phi_{E0} + eps0 eta), E0 = E* + e_offset
  double e_offset = 0.04;
  double eps0 = 0.02;
  std::string eta_shape = "gaussian";  // gaussian | random_band
  double eta_width = 2.0;
  double theta0 = 0.0;
  double tube = 0.2;
  // scenario parameters
  int branch_steps = 16;
  double branch_lo = 0.005, branch_hi = 0.08;
  std::vector<double> k_values{0.5, 2.0, 5.0};
  std::vector<double> lambdas{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  std::vector<double> sweep_scales{0.5, 0.71, 1.0};
  double probe_T = 100.0;
  int criterion = 0;
  bool write_fields = false;
  bool cauchy = true;  // scattering Cauchy table (costs one linear flow over T / 2)
  std::string trajectory;  // track: read snapshots from this evolve directory instead of evolving
  // plumbing
  std::string out = "out";
  std::uint64_t seed = 20240601;

  Nonlinearity nonlinearity() const { return {alpha, p}; }
  Grid2D grid() const { return Grid2D(n, l_dom); }

  Potential make_potential(const Grid2D& g) const {
    if (potential == "zero") return zero_potential(g);
    return gaussian_well(g, depth, width);
  }

  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

namespace detail {

template <class T>
ConfigKey key_of(std::string name, T ExperimentConfig::*m) {
  ConfigKey k;
  k.name = name;
  if constexpr (std::is_same_v<T, double>) {
    k.set = [m, name](ExperimentConfig& c, std::string_view v) { c.*m = parse_double(v, name); };
    k.get = [m](const ExperimentConfig& c) { return format_double(c.*m); };
  } else if constexpr (std::is_same_v<T, int>) {
    k.set = [m, name](ExperimentConfig& c, std::string_view v) { c.*m = int(parse_int(v, name)); };
    k.get = [m](const ExperimentConfig& c) { return std::to_string(c.*m); };
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    k.set = [m, name](ExperimentConfig& c, std::string_view v) {
      long long x = parse_int(v, name);
      if (x < 0) throw DomainError("config key '" + name + "' must be nonnegative");
      c.*m = std::uint64_t(x);
    };
    k.get = [m](const ExperimentConfig& c) { return std::to_string(c.*m); };
  } else if constexpr (std::is_same_v<T, bool>) {
    k.set = [m, name](ExperimentConfig& c, std::string_view v) {
      if (v == "true") c.*m = true;
      else if (v == "false") c.*m = false;
      else throw DomainError("config key '" + name + "' expects true or false");
    };
    k.get = [m](const ExperimentConfig& c) { return std::string(c.*m ? "true" : "false"); };
  } else if constexpr (std::is_same_v<T, std::string>) {
    k.set = [m](ExperimentConfig& c, std::string_view v) { c.*m = unquote(v); };
    k.get = [m](const ExperimentConfig& c) { return "\"" + c.*m + "\""; };
  } else {
    // comma separated list of doubles
    k.set = [m, name](ExperimentConfig& c, std::string_view v) {
      std::vector<double> out;
      const std::string text = unquote(v);
      std::string_view rest = text;
      while (!rest.empty()) {
        auto pos = rest.find(',');
        auto item = trim(rest.substr(0, pos));
        if (!item.empty()) out.push_back(parse_double(item, name));
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + 1);
      }
      c.*m = std::move(out);
    };
    k.get = [m](const ExperimentConfig& c) {
      std::string s;
      for (std::size_t i = 0; i < (c.*m).size(); ++i) s += (i ? "," : "") + format_double((c.*m)[i]);
      return s;
    };
  }
  return k;
}

}  // namespace detail

/// The recognized keys, in echo order.
inline const std::vector<ConfigKey>& config_keys() {
  using C = ExperimentConfig;
  using detail::key_of;
  static const std::vector<ConfigKey> keys{
      key_of("scenario", &C::scenario),         key_of("potential", &C::potential),
      key_of("depth", &C::depth),               key_of("width", &C::width),
      key_of("alpha", &C::alpha),               key_of("p", &C::p),
      key_of("n", &C::n),                       key_of("l_dom", &C::l_dom),
      key_of("dt", &C::dt),                     key_of("t_final", &C::t_final),
      key_of("record_every", &C::record_every), key_of("snapshot_every", &C::snapshot_every),
      key_of("s", &C::s),                       key_of("e_offset", &C::e_offset),
      key_of("eps0", &C::eps0),                 key_of("eta_shape", &C::eta_shape),
      key_of("eta_width", &C::eta_width),       key_of("theta0", &C::theta0),
      key_of("tube", &C::tube),                 key_of("branch_steps", &C::branch_steps),
      key_of("branch_lo", &C::branch_lo),       key_of("branch_hi", &C::branch_hi),
      key_of("k_values", &C::k_values),         key_of("lambdas", &C::lambdas),
      key_of("sweep_scales", &C::sweep_scales), key_of("probe_T", &C::probe_T),
      key_of("criterion", &C::criterion),       key_of("write_fields", &C::write_fields),
      key_of("cauchy", &C::cauchy),             key_of("trajectory", &C::trajectory),
      key_of("out", &C::out),                   key_of("seed", &C::seed),
  };
  return keys;
}

inline void set_config_value(ExperimentConfig& c, const std::string& key, std::string_view value) {
  for (const auto& k : config_keys())
    if (k.name == key) {
      k.set(c, detail::trim(value));
      return;
    }
  throw DomainError("unknown config key '" + key + "'");
}

inline bool multiple_of(double a, double b) {
  double m = a / b;
  return std::abs(m - std::round(m)) <= 1e-9 * std::max(1.0, m);
}

inline void ExperimentConfig::validate() const {
  if (!(eps0 >= 0.0 && eps0 <= 0.1)) throw DomainError("eps0 must lie in [0, 0.1]");
  if (potential != "gaussian_well" && potential != "zero") throw DomainError("unknown potential '" + potential + "'");
  if (potential == "gaussian_well" && !(width > 0.0 && std::isfinite(depth))) throw DomainError("bad well parameters");
  if (eta_shape != "gaussian" && eta_shape != "random_band") throw DomainError("unknown eta_shape '" + eta_shape + "'");
  if (!(eta_width > 0.0)) throw DomainError("eta_width must be positive");
  if (!(n >= 16 && fft_friendly(n))) throw DomainError("n must be of the form 2^a 3^b and at least 16");
  if (!(l_dom > 0.0)) throw DomainError("l_dom must be positive");
  if (!(dt > 0.0 && record_every > 0.0 && t_final >= 0.0)) throw DomainError("time parameters must be positive");
  if (!multiple_of(record_every, dt)) throw DomainError("record_every must be a multiple of dt");
  if (!(snapshot_every > 0.0) || !multiple_of(snapshot_every, record_every))
    throw DomainError("snapshot_every must be a multiple of record_every");
  if (!(s > 1.0 && s <= 1.5)) throw DomainError("weight exponent s must lie in (1, 3/2]");
  nonlinearity().validate();
  if (!(e_offset * alpha > 0.0)) throw DomainError("e_offset must have the sign of alpha");
  if (!(tube > 0.0 && tube < 1.0)) throw DomainError("tube must lie in (0, 1)");
  if (!(branch_steps >= 2 && branch_lo * alpha > 0 && branch_hi * alpha > 0 && branch_lo != branch_hi))
    throw DomainError("bad branch range");
  if (!(probe_T > 0.0)) throw DomainError("probe_T must be positive");
  for (double k : k_values)
    if (!(k > 0.0)) throw DomainError("k_values must be positive");
  for (double l : lambdas)
    if (!(l > 0.0)) throw DomainError("lambdas must be positive");
  for (double x : sweep_scales)
    if (!(x > 0.0 && x * eps0 <= 0.1)) throw DomainError("sweep_scales must be positive and keep eps0 <= 0.1");
}

/// Flat `key = value` text; `#` starts a comment.
inline ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view sv(line);
    bool quoted = false;
    std::size_t cut = sv.size();
    for (std::size_t i = 0; i < sv.size(); ++i) {
      if (sv[i] == '"') quoted = !quoted;
      if (sv[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    sv = detail::trim(sv.substr(0, cut));
    if (sv.empty()) continue;
    auto eq = sv.find('=');
    if (eq == std::string_view::npos) throw DomainError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key(detail::trim(sv.substr(0, eq)));
    set_config_value(base, key, sv.substr(eq + 1));
  }
  base.validate();
  return base;
}

inline ExperimentConfig parse_config_string(const std::string& text, ExperimentConfig base = {}) {
  std::istringstream is(text);
  return parse_config(is, std::move(base));
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config " + path);
  return parse_config(is, std::move(base));
}

/// Every key with its current value, one `key = value` per line.
inline std::string echo_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

}  // namespace nls2d
