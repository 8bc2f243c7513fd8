#pragma once

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nls2d/bessel.hpp"

namespace nls2d {

/// Samples of a radial profile on r_i = r_min * q^i.
struct RadialSamples {
  std::vector<double> r, f;

  double log_step() const { return std::log(r[1] / r[0]); }

  void validate() const {
    if (r.size() < 8 || r.size() != f.size()) throw DomainError("radial samples need at least 8 matching points");
    if (!(r[0] > 0.0)) throw DomainError("radial grid must start at r > 0");
    const double ls = log_step();
    if (!(ls > 0.0)) throw DomainError("radial grid must increase");
    for (std::size_t i = 1; i < r.size(); ++i)
      if (std::abs(std::log(r[i] / r[i - 1]) - ls) > 1e-9 * ls) throw DomainError("radial grid is not log-uniform");
    for (std::size_t i = 0; i < f.size(); ++i)
      if (!std::isfinite(f[i])) throw NonFiniteError("radial sample", i);
  }
};

inline RadialSamples sample_log_grid(const std::function<double(double)>& fn, double r_min, double r_max,
                                     int points) {
  if (!(r_min > 0.0 && r_max > r_min && points >= 8)) throw DomainError("bad log grid");
  RadialSamples s;
  const double q = std::log(r_max / r_min) / (points - 1);
  for (int i = 0; i < points; ++i) {
    double r = r_min * std::exp(q * i);
    s.r.push_back(r);
    s.f.push_back(fn(r));
  }
  return s;
}

inline std::vector<double> log_grid(double a, double b, int points) {
  std::vector<double> x(points);
  for (int i = 0; i < points; ++i) x[i] = a * std::exp(std::log(b / a) * i / (points - 1));
  return x;
}

struct HankelOptions {
  double tail_threshold = 1e-8;  // |f(r_max)| / max|f| above this attaches a warning
  bool want_t2 = true;
};

struct HankelResult {
  std::vector<double> x, t1, t2;
  std::optional<std::string> warning;
};

namespace detail {

/// Cubic B-spline in s = log r; constant below r_min, zero above r_max.
class LogSpline {
 public:
  explicit LogSpline(const RadialSamples& f)
      : s0_(std::log(f.r.front())),
        s1_(std::log(f.r.back())),
        f0_(f.f.front()),
        sp_(f.f.begin(), f.f.end(), std::log(f.r.front()), f.log_step(), 0.0) {}

  double operator()(double y) const {
    if (y <= 0.0) return f0_;
    double s = std::log(y);
    if (s <= s0_) return f0_;
    if (s > s1_) return 0.0;
    return sp_(s);
  }

 private:
  double s0_, s1_, f0_;
  boost::math::interpolators::cardinal_cubic_b_spline<double> sp_;
};

/// Panel edges on [0, y_max]: graded toward 0, doubling up to y_max, and no
/// panel longer than half a period pi / x of J0(x .).
inline std::vector<double> hankel_panels(double y_min, double y_max, double x) {
  std::vector<double> e{0.0};
  double a = y_min * std::ldexp(1.0, -45);
  for (; a < y_min; a *= 2) e.push_back(a);
  for (; a < y_max; a *= 2) e.push_back(a);
  e.push_back(y_max);
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  while (e.back() > y_max) e.pop_back();
  if (e.back() < y_max) e.push_back(y_max);
  const double cap = x > 0.0 ? std::numbers::pi / x : y_max;
  std::vector<double> out{e[0]};
  for (std::size_t i = 1; i < e.size(); ++i) {
    double len = e[i] - e[i - 1];
    int pieces = std::max(1, int(std::ceil(len / cap)));
    for (int k = 1; k <= pieces; ++k) out.push_back(e[i - 1] + len * k / pieces);
  }
  return out;
}

}  // namespace detail

/// T1 f(x) = int_0^inf J0(xy) f(y) dy and T2 f(x) = int_0^inf Y0(xy) f(y) dy.
inline HankelResult hankel_rooney_ops(const RadialSamples& f, const std::vector<double>& x_out,
                                      const HankelOptions& opt = {}) {
  f.validate();
  HankelResult res;
  res.x = x_out;
  double fmax = 0.0;
  for (double v : f.f) fmax = std::max(fmax, std::abs(v));
  if (fmax == 0.0) {
    res.t1.assign(x_out.size(), 0.0);
    res.t2.assign(x_out.size(), 0.0);
    return res;
  }
  if (std::abs(f.f.back()) > opt.tail_threshold * fmax)
    res.warning = "input does not decay: |f(r_max)| / max|f| = " + std::to_string(std::abs(f.f.back()) / fmax) +
                  ", truncation error not controlled";
  detail::LogSpline sp(f);
  using GL = boost::math::quadrature::gauss<double, 20>;
  for (double x : x_out) {
    if (!(x > 0.0)) throw DomainError("output points must be positive");
    auto edges = detail::hankel_panels(f.r.front(), f.r.back(), x);
    double a1 = 0.0, a2 = 0.0;
    for (std::size_t i = 1; i < edges.size(); ++i) {
      double lo = edges[i - 1], hi = edges[i];
      a1 += GL::integrate([&](double y) { return bessel_eval(x * y).j0 * sp(y); }, lo, hi);
      if (opt.want_t2) a2 += GL::integrate([&](double y) { return bessel_eval(x * y).y0 * sp(y); }, lo, hi);
    }
    res.t1.push_back(a1);
    res.t2.push_back(opt.want_t2 ? a2 : 0.0);
  }
  return res;
}

/// Order-0 Hankel transform g -> int_0^inf J0(xy) g(y) y dy.
inline std::vector<double> hankel_transform0(const RadialSamples& g, const std::vector<double>& x_out) {
  RadialSamples h = g;
  for (std::size_t i = 0; i < h.f.size(); ++i) h.f[i] *= h.r[i];
  HankelOptions o;
  o.want_t2 = false;
  o.tail_threshold = INFINITY;
  return hankel_rooney_ops(h, x_out, o).t1;
}

/// (int |f|^2 w(x) dx)^{1/2} by the trapezoid rule on a sorted grid.
inline double radial_norm(const std::vector<double>& x, const std::vector<double>& f,
                          const std::function<double(double)>& w) {
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    acc += 0.5 * (x[i] - x[i - 1]) * (f[i] * f[i] * w(x[i]) + f[i - 1] * f[i - 1] * w(x[i - 1]));
  return std::sqrt(acc);
}

/// Boundedness ratios ||T f|| / ||f|| in the two measures r dr and sqrt(r) dr.
struct HankelBoundedness {
  double t1_rdr = 0, t2_rdr = 0, t1_sqrt = 0, t2_sqrt = 0;
};

inline HankelBoundedness hankel_boundedness(const RadialSamples& f, const HankelResult& t) {
  auto rdr = [](double r) { return r; };
  auto sq = [](double r) { return std::sqrt(r); };
  HankelBoundedness b;
  double n1 = radial_norm(f.r, f.f, rdr), n2 = radial_norm(f.r, f.f, sq);
  if (n1 == 0.0) return b;
  b.t1_rdr = radial_norm(t.x, t.t1, rdr) / n1;
  b.t2_rdr = radial_norm(t.x, t.t2, rdr) / n1;
  b.t1_sqrt = radial_norm(t.x, t.t1, sq) / n2;
  b.t2_sqrt = radial_norm(t.x, t.t2, sq) / n2;
  return b;
}

}  // namespace nls2d
