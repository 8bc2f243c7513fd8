#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nls2d/grid.hpp"
#include "nls2d/krylov.hpp"
#include "nls2d/spectral.hpp"

namespace nls2d {

/// f(u) = alpha |u|^{p-1} u.
struct Nonlinearity {
  double alpha = 1.0;
  double p = 3.0;

  void validate() const {
    if (alpha != 1.0 && alpha != -1.0) throw DomainError("alpha must be +1 or -1");
    if (!(p >= 3.0)) throw DomainError("nonlinearity exponent must satisfy p >= 3");
  }
  cplx operator()(cplx u) const { return alpha * std::pow(std::abs(u), p - 1) * u; }
  ComplexField apply(const ComplexField& u) const {
    ComplexField r(u.grid());
    for (std::size_t i = 0; i < u.size(); ++i) r[i] = (*this)(u[i]);
    return r;
  }
};

/// Checks the branch side: (E - E*) alpha > 0.
inline void require_branch_side(double e, double e_star, const Nonlinearity& nl) {
  if (!((e - e_star) * nl.alpha > 0.0))
    throw DomainError("sign condition of the bifurcation branch violated: need (E - E*) alpha > 0");
}

inline double lp_power(const ComplexField& f, double q) {
  double l = lp_norm(f, q);
  return std::pow(l, q);
}

/// a = |E - E*|^{1/(p-1)} ||phi*||_{p+1}^{-(p+1)/(p-1)}.
inline double seed_amplitude(double e, const SpectralData& sd, const Nonlinearity& nl) {
  require_branch_side(e, sd.e_star, nl);
  const double p = nl.p;
  return std::pow(std::abs(e - sd.e_star), 1.0 / (p - 1)) * std::pow(lp_norm(sd.phi_star, p + 1), -(p + 1) / (p - 1));
}

/// Leading-order profile a * phi*.
inline ComplexField bifurcation_seed(double e, const SpectralData& sd, const Nonlinearity& nl) {
  return seed_amplitude(e, sd, nl) * sd.phi_star;
}

/// F(phi) = Delta phi + E phi - V phi - f(phi).
inline ComplexField profile_residual(const Potential& V, const ComplexField& phi, double e, const Nonlinearity& nl) {
  ComplexField r = laplacian(phi);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += (e - V.values[i]) * phi[i] - nl(phi[i]);
  return r;
}

inline double profile_residual_norm(const Potential& V, const ComplexField& phi, double e, const Nonlinearity& nl) {
  return l2_norm(profile_residual(V, phi, e, nl));
}

struct BoundStateProfile {
  double e = 0.0;
  ComplexField phi;
  ComplexField dphi_de;
  ComplexField d2phi_de2;
  double alpha = 1.0;
  double p = 3.0;
  double residual = 0.0;
  int newton_steps = 0;
  std::vector<double> residual_history;
  double fd_error = 0.0;  // relative FD error estimate of dphi_de (0 when not computed)
};

struct NewtonOptions {
  double step_tol = 1e-10;  // on ||delta||_{L2} / ||phi||_{L2}
  int max_iter = 30;
  double inner_tol = 1e-12;
  int inner_max_iter = 2000;
  /// Replace f(u) by its projection <f(u), phi*> phi* (scalar toy problem).
  const SpectralData* toy_projection = nullptr;
};

namespace detail {

inline double min_real(const ComplexField& f) {
  double m = f[0].real();
  for (const auto& z : f.values()) m = std::min(m, z.real());
  return m;
}

}  // namespace detail

/// Newton iteration for the real positive solution of
/// Delta phi + E phi = V phi + alpha |phi|^{p-1} phi.
inline BoundStateProfile solve_profile(const Potential& V, double e, const ComplexField& seed, const Nonlinearity& nl,
                                       const NewtonOptions& opt = {}) {
  nl.validate();
  require_finite(seed, "profile seed");
  if (!(e < 0.0)) throw DomainError("bound-state energy must be negative");
  ComplexField phi = seed.real_part();
  {
    double s = 0;
    for (const auto& z : phi.values()) s += z.real();
    if (s < 0) phi *= -1.0;
  }
  const double p = nl.p;
  const SpectralData* toy = opt.toy_projection;
  auto F = [&](const ComplexField& u) {
    if (!toy) return profile_residual(V, u, e, nl);
    ComplexField r = laplacian(u);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += (e - V.values[i]) * u[i];
    cplx c = inner_bilinear(nl.apply(u), toy->phi_star);
    r.axpy(-c, toy->phi_star);
    return r;
  };
  std::vector<double> history;
  KrylovOptions ko;
  ko.tol = opt.inner_tol;
  ko.max_iter = opt.inner_max_iter;
  auto prec = shifted_laplacian_inverse(std::max(-e, 1e-3));
  // -J = -Delta - E + V + alpha p phi^{p-1}
  auto minus_jacobian_local = [&](const std::vector<double>& w) {
    return [&, w](const ComplexField& d) {
      ComplexField r = laplacian(d);
      r *= -1.0;
      for (std::size_t i = 0; i < r.size(); ++i) r[i] += (V.values[i] - e + w[i]) * d[i];
      return r;
    };
  };
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    ComplexField res = F(phi);
    history.push_back(l2_norm(res));
    ComplexField delta(phi.grid());
    if (!toy) {
      std::vector<double> w(phi.size());
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = nl.alpha * p * std::pow(std::abs(phi[i].real()), p - 1);
      auto sol = minres(minus_jacobian_local(w), res, ko, prec);
      if (!sol.converged) throw ConvergenceError("Newton inner solve failed at E = " + std::to_string(e), sol.residual);
      delta = sol.x;
    } else {
      // -J d = (-Delta - E + V) d + c(d) phi*, c(d) = alpha p <|phi|^{p-1} d, phi*>; Sherman-Morrison
      std::vector<double> zero(phi.size(), 0.0);
      auto J0 = minus_jacobian_local(zero);
      auto s1 = minres(J0, res, ko, prec);
      auto s2 = minres(J0, toy->phi_star, ko, prec);
      if (!s1.converged || !s2.converged) throw ConvergenceError("toy Newton inner solve failed", std::max(s1.residual, s2.residual));
      ComplexField g(phi.grid());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = nl.alpha * p * std::pow(std::abs(phi[i].real()), p - 1) * toy->phi_star[i];
      cplx num = inner_bilinear(g, s1.x), den = 1.0 + inner_bilinear(g, s2.x);
      delta = s1.x;
      delta.axpy(-num / den, s2.x);
    }
    // F(phi) + J delta = 0  <=>  (-J) delta = F(phi)
    phi += delta;
    for (auto& z : phi.values()) z = cplx(z.real(), 0.0);
    double scale = phi.max_abs();
    if (detail::min_real(phi) < -1e-8 * scale)
      throw ConvergenceError("left the positive branch at Newton step " + std::to_string(it + 1), history.back());
    double step = l2_norm(delta) / std::max(l2_norm(phi), 1e-300);
    if (!std::isfinite(step)) throw ConvergenceError("Newton diverged", history.back());
    if (step < opt.step_tol) {
      ++it;
      break;
    }
  }
  if (it == opt.max_iter) {
    std::string hist;
    for (double r : history) hist += " " + std::to_string(r);
    throw ConvergenceError("Newton did not converge; residual history:" + hist, history.back());
  }
  const double residual = toy ? l2_norm(F(phi)) : profile_residual_norm(V, phi, e, nl);
  const Grid2D& g = phi.grid();
  return BoundStateProfile{.e = e,
                           .phi = phi,
                           .dphi_de = ComplexField(g),
                           .d2phi_de2 = ComplexField(g),
                           .alpha = nl.alpha,
                           .p = p,
                           .residual = residual,
                           .newton_steps = it,
                           .residual_history = std::move(history)};
}

/// The residual invariant: ||F(phi_E)|| < 1e-9 max(1, ||phi_E||_{H1}).
inline bool profile_residual_ok(const BoundStateProfile& b) { return b.residual < 1e-9 * std::max(1.0, h1_norm(b.phi)); }

struct Branch {
  double e_star = 0.0;
  Nonlinearity nl;
  double delta = 0.0;  // max |E - E*| resolved
  std::vector<BoundStateProfile> profiles;
  std::optional<std::size_t> failed_at;
  std::string failure;

  bool complete() const { return !failed_at.has_value(); }
  ComplexField phi1(std::size_t i) const { return (1.0 / l2_norm(profiles[i].phi)) * profiles[i].phi; }
  ComplexField phi2(std::size_t i) const { return (1.0 / l2_norm(profiles[i].dphi_de)) * profiles[i].dphi_de; }
};

struct BranchOptions {
  NewtonOptions newton;
  double fd_tol = 1e-4;      // relative FD error target for dphi/dE
  bool derivatives = true;
};

/// dphi/dE and d2phi/dE2 at a converged profile by centred differences of
/// auxiliary profiles at E +- h and E +- h/2, Richardson-combined. h shrinks
/// until the estimated relative error of the first derivative is below fd_tol.
inline void attach_derivatives(const Potential& V, const SpectralData& sd, BoundStateProfile& b, const Nonlinearity& nl,
                               const BranchOptions& opt) {
  const double dist = std::abs(b.e - sd.e_star);
  double h = 0.05 * dist;
  auto solve_at = [&](double e) {
    // seed from the current profile rescaled along the leading-order law
    double s = std::pow(std::abs(e - sd.e_star) / dist, 1.0 / (nl.p - 1));
    return solve_profile(V, e, s * b.phi, nl, opt.newton).phi;
  };
  for (int attempt = 0; attempt < 6; ++attempt) {
    ComplexField pp = solve_at(b.e + h), pm = solve_at(b.e - h);
    ComplexField qp = solve_at(b.e + h / 2), qm = solve_at(b.e - h / 2);
    ComplexField d1 = (1.0 / (2 * h)) * (pp - pm);
    ComplexField d2 = (1.0 / h) * (qp - qm);
    ComplexField dr = (4.0 / 3.0) * d2 - (1.0 / 3.0) * d1;
    ComplexField s1 = (1.0 / (h * h)) * (pp - 2.0 * b.phi + pm);
    ComplexField s2 = (4.0 / (h * h)) * (qp - 2.0 * b.phi + qm);
    ComplexField sr = (4.0 / 3.0) * s2 - (1.0 / 3.0) * s1;
    double err = l2_norm(d2 - d1) / 3.0 / l2_norm(dr);
    b.dphi_de = dr;
    b.d2phi_de2 = sr;
    b.fd_error = err;
    if (err < opt.fd_tol) return;
    h *= 0.5;
  }
}

/// Profiles at `steps` equally spaced energies from e_from to e_to (inclusive),
/// each Newton solve seeded by the previous profile.
inline Branch branch_continuation(const Potential& V, const SpectralData& sd, double e_from, double e_to, int steps,
                                  const Nonlinearity& nl, const BranchOptions& opt = {}) {
  nl.validate();
  if (steps < 1) throw DomainError("branch needs at least one step");
  require_branch_side(e_from, sd.e_star, nl);
  require_branch_side(e_to, sd.e_star, nl);
  Branch br;
  br.e_star = sd.e_star;
  br.nl = nl;
  ComplexField seed = bifurcation_seed(e_from, sd, nl);
  double e_prev = e_from;
  for (int k = 0; k < steps; ++k) {
    double e = steps == 1 ? e_from : e_from + (e_to - e_from) * k / (steps - 1);
    try {
      if (k > 0) seed = std::pow(std::abs(e - sd.e_star) / std::abs(e_prev - sd.e_star), 1.0 / (nl.p - 1)) * seed;
      BoundStateProfile b = solve_profile(V, e, seed, nl, opt.newton);
      if (opt.derivatives) attach_derivatives(V, sd, b, nl, opt);
      seed = b.phi;
      e_prev = e;
      br.delta = std::max(br.delta, std::abs(e - sd.e_star));
      br.profiles.push_back(std::move(b));
    } catch (const Error& ex) {
      br.failed_at = std::size_t(k);
      br.failure = ex.what();
      break;
    }
  }
  return br;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw DomainError("slope fit needs at least two matching samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ProfileDistanceFit {
  double c = 0.0;          // max over the branch of the ratio below
  double ratio_spread = 0.0;  // max/min of ||phi_{1,E} - phi*||_{H1} / |E - E*|
  std::vector<double> ratios;
};

/// ||phi_{1,E} - phi*||_{H1} + ||phi_{2,E} - phi*||_{H1} <= C |E - E*|, with phi_1 ratios reported separately.
inline ProfileDistanceFit profile_distance_fit(const Branch& br, const SpectralData& sd) {
  ProfileDistanceFit f;
  double mn = INFINITY, mx = 0;
  for (std::size_t i = 0; i < br.profiles.size(); ++i) {
    double d = std::abs(br.profiles[i].e - sd.e_star);
    double a = h1_norm(br.phi1(i) - sd.phi_star);
    double b = br.profiles[i].dphi_de.max_abs() > 0 ? h1_norm(br.phi2(i) - sd.phi_star) : 0.0;
    f.c = std::max(f.c, (a + b) / d);
    f.ratios.push_back(a / d);
    mn = std::min(mn, a / d);
    mx = std::max(mx, a / d);
  }
  f.ratio_spread = mx / mn;
  return f;
}

/// Profiles phi_E, dphi/dE, d2phi/dE2 at arbitrary E in [e_lo, e_hi] from exact
/// solves at Chebyshev nodes, via the interpolating polynomial and its derivatives.
class ProfileInterpolant {
 public:
  struct Eval {
    ComplexField phi, dphi, d2phi;
  };

  ProfileInterpolant(const Potential& V, const SpectralData& sd, const Nonlinearity& nl, double e_lo, double e_hi,
                     int nodes = 11, const NewtonOptions& newton = {})
      : lo_(e_lo), hi_(e_hi), nl_(nl) {
    if (!(e_hi > e_lo)) throw DomainError("interpolation interval is empty");
    require_branch_side(e_lo, sd.e_star, nl);
    require_branch_side(e_hi, sd.e_star, nl);
    const double c = 0.5 * (lo_ + hi_), r = 0.5 * (hi_ - lo_);
    for (int j = 0; j < nodes; ++j) {
      // Chebyshev points of the second kind
      double e = c + r * std::cos(std::numbers::pi * j / (nodes - 1));
      nodes_.push_back(e);
      ComplexField seed = bifurcation_seed(e, sd, nl);
      if (!phis_.empty()) seed = std::pow(std::abs(e - sd.e_star) / std::abs(nodes_[j - 1] - sd.e_star), 1.0 / (nl.p - 1)) * phis_.back();
      auto b = solve_profile(V, e, seed, nl, newton);
      max_residual_ = std::max(max_residual_, b.residual);
      phis_.push_back(b.phi);
    }
  }

  bool contains(double e) const { return e >= lo_ && e <= hi_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double max_node_residual() const { return max_residual_; }

  /// Lagrange basis values and first two derivatives at e.
  void weights(double e, std::vector<double>& l0, std::vector<double>& l1, std::vector<double>& l2) const {
    const int n = int(nodes_.size());
    l0.assign(n, 0.0);
    l1.assign(n, 0.0);
    l2.assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
      // l_j(x) = prod_{m != j} (x - x_m) / (x_j - x_m); derivatives by the product rule
      double den = 1.0;
      for (int m = 0; m < n; ++m)
        if (m != j) den *= nodes_[j] - nodes_[m];
      double p0 = 1.0, p1 = 0.0, p2 = 0.0;
      for (int m = 0; m < n; ++m) {
        if (m == j) continue;
        double t = e - nodes_[m];
        p2 = p2 * t + 2.0 * p1;
        p1 = p1 * t + p0;
        p0 = p0 * t;
      }
      l0[j] = p0 / den;
      l1[j] = p1 / den;
      l2[j] = p2 / den;
    }
  }

  Eval eval(double e) const {
    if (!contains(e)) throw DomainError("energy outside the interpolation interval");
    std::vector<double> l0, l1, l2;
    weights(e, l0, l1, l2);
    const Grid2D& g = phis_[0].grid();
    Eval r{ComplexField(g), ComplexField(g), ComplexField(g)};
    for (std::size_t j = 0; j < phis_.size(); ++j) {
      r.phi.axpy(l0[j], phis_[j]);
      r.dphi.axpy(l1[j], phis_[j]);
      r.d2phi.axpy(l2[j], phis_[j]);
    }
    return r;
  }

 private:
  double lo_, hi_;
  Nonlinearity nl_;
  std::vector<double> nodes_;
  std::vector<ComplexField> phis_;
  double max_residual_ = 0.0;
};

}  // namespace nls2d
