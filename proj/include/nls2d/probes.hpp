#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nls2d/grid.hpp"

namespace nls2d {

struct ProbeField {
  std::string name;
  ComplexField f;
};

/// Six localized test fields: two centered Gaussians of different widths, an
/// off-center Gaussian, an oscillatory Gaussian, a ring and a random
/// band-limited field under a Gaussian envelope.
inline std::vector<ProbeField> probe_set(const Grid2D& g, unsigned seed = 20240601) {
  std::vector<ProbeField> out;
  auto add = [&](std::string name, auto fn) { out.push_back({std::move(name), ComplexField::from_function(g, fn)}); };
  add("gauss_w1", [](double x, double y) { return cplx(std::exp(-(x * x + y * y) / 2), 0); });
  add("gauss_w2", [](double x, double y) { return cplx(std::exp(-(x * x + y * y) / 8), 0); });
  add("gauss_off", [](double x, double y) { return cplx(std::exp(-((x - 3) * (x - 3) + y * y) / 2), 0); });
  add("oscillatory", [](double x, double y) { return std::exp(-(x * x + y * y)) * std::polar(1.0, 3 * x); });
  add("ring", [](double x, double y) {
    double r = std::hypot(x, y);
    return cplx(std::exp(-(r - 3) * (r - 3)), 0);
  });
  // 24 plane waves with |xi| <= 2, directions and phases from the seed
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  struct Wave {
    double k1, k2;
    cplx a;
  };
  std::vector<Wave> waves;
  for (int m = 0; m < 24; ++m) {
    double r = 2.0 * std::sqrt(u01(rng)), th = 2 * std::numbers::pi * u01(rng);
    waves.push_back({r * std::cos(th), r * std::sin(th), cplx(nrm(rng), nrm(rng))});
  }
  add("random_band", [waves](double x, double y) {
    cplx s = 0;
    for (const auto& w : waves) s += w.a * std::polar(1.0, w.k1 * x + w.k2 * y);
    return s * std::exp(-(x * x + y * y) / 8) / std::sqrt(24.0);
  });
  return out;
}

}  // namespace nls2d
