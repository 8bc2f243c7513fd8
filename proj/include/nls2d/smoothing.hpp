#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nls2d/evolution.hpp"
#include "nls2d/probes.hpp"

namespace nls2d {

/// One measured constant with its value at T / 2 for self-convergence.
struct EstimateEntry {
  std::string name;
  double c_half = 0.0, c_full = 0.0;
  double growth = 0.0;         // c_full / c_half - 1
  double t_recurrence = 0.0;   // half-box crossing time at the rms group velocity
  bool recurrence_flag = false;
};

struct EstimateReport {
  std::string kind;
  double T = 0.0, s = 1.5;
  std::vector<EstimateEntry> entries;

  double max_growth() const {
    double g = 0.0;
    for (const auto& e : entries) g = std::max(g, e.growth);
    return g;
  }
};

/// Root-mean-square wavenumber of f.
inline double rms_wavenumber(const ComplexField& f) {
  cvec fh = fft2(f);
  double a = 0, b = 0;
  const auto& ksq = f.grid().ksq();
  for (std::size_t i = 0; i < fh.size(); ++i) {
    double w = std::norm(fh[i]);
    a += ksq[i] * w;
    b += w;
  }
  return b > 0 ? std::sqrt(a / b) : 0.0;
}

inline double recurrence_time(const ComplexField& f) {
  double k = rms_wavenumber(f);
  return k > 0 ? 0.25 * f.grid().l_dom() / k : INFINITY;
}

namespace detail {

inline double simpson(const std::vector<double>& q, int m, double dt) {
  double s = q[0] + q[m];
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4 : 2) * q[i];
  return s * dt / 3;
}

}  // namespace detail

/// ||<x>^{-s} e^{-itL} P_c f||_{L^2_{t,x}(0,T)} / ||f||_{L^2} at T / 2 and T.
inline EstimateEntry local_smoothing_constant(const std::string& name, const ComplexField& f, const Potential& V,
                                              const SpectralData& sd, double T, double s = 1.5,
                                              double dt_sample = 0.25) {
  const int m = int(std::lround(T / dt_sample));
  if (m < 4 || m % 4 || std::abs(m * dt_sample - T) > 1e-9 * T)
    throw DomainError("T must be a multiple of 4 sample steps");
  EstimateEntry e;
  e.name = name;
  const double nf = l2_norm(f);
  ComplexField u = project(f, SpectralPart::continuous, sd);
  e.t_recurrence = recurrence_time(u);
  e.recurrence_flag = T > e.t_recurrence;
  if (nf == 0.0 || l2_norm(u) <= 1e-14 * nf) return e;
  LinearPropagator P(V);
  std::vector<double> q(m + 1);
  for (int i = 0; i <= m; ++i) {
    if (i) u = P.apply(u, dt_sample);
    double w = weighted_norm(u, WeightSpec{s, -1});
    q[i] = w * w;
  }
  e.c_half = std::sqrt(detail::simpson(q, m / 2, dt_sample)) / nf;
  e.c_full = std::sqrt(detail::simpson(q, m, dt_sample)) / nf;
  e.growth = e.c_full / e.c_half - 1.0;
  return e;
}

inline EstimateReport smoothing_report(const Potential& V, const SpectralData& sd,
                                       const std::vector<ProbeField>& probes, double T, double s = 1.5,
                                       double dt_sample = 0.25) {
  EstimateReport r{"local_smoothing", T, s, {}};
  for (const auto& p : probes) r.entries.push_back(local_smoothing_constant(p.name, p.f, V, sd, T, s, dt_sample));
  return r;
}

/// Time panels for dispersive integrands: doubling from t0, capped at `cap`.
inline std::vector<double> time_panels(double T, double t0 = 0.05, double cap = 10.0) {
  std::vector<double> e{0.0};
  double a = t0;
  while (a < T) {
    e.push_back(a);
    a = std::min(2 * a, a + cap);
  }
  e.push_back(T);
  return e;
}

/// sup over sample points x of (int_0^T |e^{itDelta} f(x)|^2 dt)^{1/2} / ||f||_{L^2}.
struct FreeSupReport {
  std::vector<std::pair<double, double>> points;
  std::vector<double> per_point, per_point_half;
  double sup = 0.0, sup_half = 0.0;
};

inline FreeSupReport free_sup_x_l2t(const ComplexField& f, const std::vector<std::pair<double, double>>& points,
                                    double T) {
  const Grid2D& g = f.grid();
  std::vector<std::size_t> idx;
  for (auto [x, y] : points) {
    int i = int(std::lround((x + 0.5 * g.l_dom()) / g.spacing())), j = int(std::lround((y + 0.5 * g.l_dom()) / g.spacing()));
    if (i < 0 || j < 0 || i >= g.n() || j >= g.n()) throw DomainError("sample point outside the box");
    idx.push_back(g.index(i, j));
  }
  const double nf = l2_norm(f);
  FreeSupReport r;
  r.points = points;
  r.per_point.assign(idx.size(), 0.0);
  r.per_point_half.assign(idx.size(), 0.0);
  if (nf == 0.0) return r;
  const cvec fh = fft2(f);
  const auto& ksq = g.ksq();
  auto sample = [&](double t) {
    cvec uh(fh.size());
    for (std::size_t i = 0; i < fh.size(); ++i) uh[i] = fh[i] * std::polar(1.0, -ksq[i] * t);
    ComplexField u = ifft2(g, uh);
    std::vector<double> v;
    for (auto k : idx) v.push_back(std::norm(u[k]));
    return v;
  };
  using GL = boost::math::quadrature::gauss<double, 15>;
  const auto& nodes = GL::abscissa();
  const auto& weights = GL::weights();
  auto integrate = [&](double a, double b, std::vector<double>& acc) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    auto add = [&](double x, double w) {
      auto v = sample(c + h * x);
      for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += h * w * v[p];
    };
    // boost stores the non-negative half of a symmetric rule
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      add(nodes[k], weights[k]);
      if (nodes[k] != 0.0) add(-nodes[k], weights[k]);
    }
  };
  auto edges = time_panels(T / 2);
  for (std::size_t i = 1; i < edges.size(); ++i) integrate(edges[i - 1], edges[i], r.per_point_half);
  r.per_point = r.per_point_half;
  auto edges2 = time_panels(T / 2, T / 2 > 10 ? 10.0 : T / 2);
  for (std::size_t i = 1; i < edges2.size(); ++i) integrate(T / 2 + edges2[i - 1], T / 2 + edges2[i], r.per_point);
  for (auto& v : r.per_point) v = std::sqrt(v) / nf;
  for (auto& v : r.per_point_half) v = std::sqrt(v) / nf;
  r.sup = *std::max_element(r.per_point.begin(), r.per_point.end());
  r.sup_half = *std::max_element(r.per_point_half.begin(), r.per_point_half.end());
  return r;
}

/// lambda f(lambda x) for a profile given as a function.
inline ComplexField dilate(const Grid2D& g, const std::function<cplx(double, double)>& fn, double lambda) {
  return ComplexField::from_function(g, [&](double x, double y) { return lambda * fn(lambda * x, lambda * y); });
}

/// Retarded and mixed Duhamel estimates for a source g(t):
/// ||<x>^{-s} W||_{L^2_{t,x}} and ||W||_{L^q_t L^r_x} against ||<x>^s g||_{L^2_{t,x}},
/// W(t) = int_0^t e^{-i(t - tau)L} P_c g(tau) dtau (trapezoid in tau).
struct DuhamelEstimate {
  double retarded = 0.0, mixed = 0.0;
  double q = 4.0, r = 4.0;
  double source_norm = 0.0;
};

inline DuhamelEstimate duhamel_estimates(const Potential& V, const SpectralData& sd,
                                         const std::function<ComplexField(double)>& source, double T, double dt,
                                         double s = 1.5, double q = 4.0) {
  if (!(q > 2.0)) throw DomainError("admissible pairs need q > 2");
  const int m = int(std::lround(T / dt));
  if (m < 2 || m % 2) throw DomainError("T / dt must be an even integer");
  DuhamelEstimate d;
  d.q = q;
  d.r = 1.0 / (0.5 - 1.0 / q);
  LinearPropagator P(V);
  ComplexField pg = project(source(0.0), SpectralPart::continuous, sd);
  ComplexField W(V.grid);
  std::vector<double> src(m + 1), ret(m + 1), mix(m + 1);
  auto record = [&](int i, const ComplexField& g) {
    double a = weighted_norm(g, WeightSpec{s, 1});
    src[i] = a * a;
    double b = weighted_norm(W, WeightSpec{s, -1});
    ret[i] = b * b;
    mix[i] = std::pow(lp_norm(W, d.r), q);
  };
  record(0, source(0.0));
  const cplx mi(0, -0.5 * dt);
  for (int i = 1; i <= m; ++i) {
    double t = i * dt;
    ComplexField half = W;
    half.axpy(mi, pg);
    W = P.apply(half, dt);
    ComplexField gt = source(t);
    pg = project(gt, SpectralPart::continuous, sd);
    W.axpy(mi, pg);
    record(i, gt);
  }
  d.source_norm = std::sqrt(detail::simpson(src, m, dt));
  if (d.source_norm == 0.0) return d;
  d.retarded = std::sqrt(detail::simpson(ret, m, dt)) / d.source_norm;
  d.mixed = std::pow(detail::simpson(mix, m, dt), 1.0 / q) / d.source_norm;
  return d;
}

}  // namespace nls2d
